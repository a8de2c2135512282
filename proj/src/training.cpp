#include "lstmeq/training.hpp"

#include "lstmeq/error.hpp"
#include "lstmeq/seed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

namespace lstmeq {

// ---------------------------------------------------------------------------
// Dataset

void Dataset::append(const Dataset& other)
{
    if (other.empty())
        return;
    if (empty() && vectors.empty()) {
        *this = other;
        return;
    }
    if (other.width != width || other.length != length)
        throw ShapeError("cannot append datasets with different window geometry");
    const std::size_t offset = vectors.size() / width;
    vectors.insert(vectors.end(), other.vectors.begin(), other.vectors.end());
    for (auto s : other.starts)
        starts.push_back(s + offset);
    targets.insert(targets.end(), other.targets.begin(), other.targets.end());
}

Dataset build_dataset(const BitStream& tx, const Waveform& rx_ticks, const LinkConfig& cfg,
                      std::size_t latency_offset)
{
    cfg.validate();
    const auto stride = static_cast<std::size_t>(cfg.tick_stride());
    const double tick_period = cfg.sample_period() * static_cast<double>(stride);
    if (std::abs(rx_ticks.sample_period - tick_period) > 1e-6 * tick_period)
        throw ConfigError("rx must be sampled at one sample per delay tick");

    const auto n = static_cast<std::size_t>(cfg.delay_depth);
    const std::size_t ticks = rx_ticks.size();
    if (ticks < n)
        throw DataError("sequence of " + std::to_string(ticks) + " ticks is shorter than one window of " +
                        std::to_string(n));

    Dataset d;
    d.width = n;
    d.length = n;
    d.vectors.reserve(ticks * n);
    DelayLine line(n);
    for (double s : rx_ticks.samples) {
        auto regs = line.push(s);
        d.vectors.insert(d.vectors.end(), regs.begin(), regs.end());
    }

    const auto spb = static_cast<std::size_t>(cfg.samples_per_bit);
    const auto phase = static_cast<std::size_t>(cfg.sampling_phase);
    for (std::size_t end = n - 1; end < ticks; ++end) {
        if (end < latency_offset)
            continue;
        const std::size_t tick = end - latency_offset;
        const std::size_t bit = (phase + tick * stride) / spb;
        if (bit >= tx.size())
            break;
        d.starts.push_back(end + 1 - n);
        d.targets.push_back(cfg.level(tx[bit]));
    }
    if (d.empty())
        throw DataError("no usable training windows (latency or bit count too small)");
    return d;
}

double mse_loss(std::span<const double> pred, std::span<const double> target)
{
    if (pred.size() != target.size())
        throw ShapeError("mse_loss: prediction and target lengths differ");
    if (pred.empty())
        throw ShapeError("mse_loss: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = target[i] - pred[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

Matrix xavier_init(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed)
{
    if (fan_in < 1 || fan_out < 1)
        throw ConfigError("xavier_init: fans must be >= 1");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(fan_out, fan_in);
    for (auto& v : m.data)
        v = u(rng);
    return m;
}

LstmStack init_model(std::size_t input_width, const std::vector<std::size_t>& hidden,
                     double dropout_rate, std::vector<double> post_fir, std::uint64_t seed)
{
    LstmStack m = LstmStack::zeros(input_width, hidden, dropout_rate);
    std::uint64_t stream = 0;
    for (auto& layer : m.layers) {
        for (std::size_t g = 0; g < kGateCount; ++g) {
            layer.w[g] = xavier_init(layer.input_width(), layer.hidden(), derive_seed(seed, stream++));
            layer.wr[g] = xavier_init(layer.hidden(), layer.hidden(), derive_seed(seed, stream++));
        }
    }
    const auto fc = xavier_init(m.fc_w.size(), 1, derive_seed(seed, stream++));
    m.fc_w = fc.data;
    m.post_fir = std::move(post_fir);
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Gradients

Gradients Gradients::zeros_like(const LstmStack& m)
{
    Gradients g;
    for (const auto& l : m.layers)
        g.layers.push_back(GateParams::zeros(l.input_width(), l.hidden()));
    g.fc_w.assign(m.fc_w.size(), 0.0);
    return g;
}

void Gradients::add(const Gradients& other)
{
    auto dst = parameter_blocks(*this);
    auto src = parameter_blocks(other);
    if (dst.size() != src.size())
        throw ShapeError("gradient shapes differ");
    for (std::size_t b = 0; b < dst.size(); ++b) {
        if (dst[b].size() != src[b].size())
            throw ShapeError("gradient shapes differ");
        for (std::size_t k = 0; k < dst[b].size(); ++k)
            dst[b][k] += src[b][k];
    }
}

void Gradients::scale(double s)
{
    for (auto block : parameter_blocks(*this))
        for (auto& v : block)
            v *= s;
}

bool Gradients::all_finite() const
{
    for (auto block : parameter_blocks(*this))
        for (double v : block)
            if (!std::isfinite(v))
                return false;
    return true;
}

namespace {

template <class Layers, class Vec, class Scalar, class Span>
std::vector<Span> collect_blocks(Layers& layers, Vec& fc_w, Scalar& fc_b)
{
    std::vector<Span> blocks;
    for (auto& l : layers) {
        for (std::size_t g = 0; g < kGateCount; ++g) {
            blocks.emplace_back(l.w[g].data);
            blocks.emplace_back(l.wr[g].data);
            blocks.emplace_back(l.b[g]);
        }
    }
    blocks.emplace_back(fc_w);
    blocks.emplace_back(&fc_b, 1);
    return blocks;
}

}  // namespace

std::vector<std::span<double>> parameter_blocks(LstmStack& m)
{
    return collect_blocks<decltype(m.layers), decltype(m.fc_w), double, std::span<double>>(m.layers, m.fc_w, m.fc_b);
}

std::vector<std::span<double>> parameter_blocks(Gradients& g)
{
    return collect_blocks<decltype(g.layers), decltype(g.fc_w), double, std::span<double>>(g.layers, g.fc_w, g.fc_b);
}

std::vector<std::span<const double>> parameter_blocks(const Gradients& g)
{
    return collect_blocks<const std::vector<GateParams>, const std::vector<double>, const double,
                          std::span<const double>>(g.layers, g.fc_w, g.fc_b);
}

std::size_t parameter_count(const LstmStack& m)
{
    std::size_t n = m.fc_w.size() + 1;
    for (const auto& l : m.layers)
        n += kGateCount * (l.hidden() * l.input_width() + l.hidden() * l.hidden() + l.hidden());
    return n;
}

// ---------------------------------------------------------------------------
// Forward / backward through time

namespace {

/// Per-window activations kept for the backward pass.
struct Trace {
    std::size_t steps = 0;
    std::vector<std::vector<std::vector<double>>> x;      // [t][l] layer input
    std::vector<std::vector<std::vector<double>>> gates;  // [t][l] f, i, cs, o
    std::vector<std::vector<std::vector<double>>> c;      // [t][l]
    std::vector<std::vector<std::vector<double>>> h;      // [t][l]
    double z_out = 0.0;
    double y = 0.0;
};

void check_window(const LstmStack& m, std::span<const double> window, std::size_t length,
                  std::span<const DropoutMask> masks)
{
    if (length < 1 || window.size() != length * m.input_width())
        throw ShapeError("window holds " + std::to_string(window.size()) + " values, expected " +
                         std::to_string(length) + " x " + std::to_string(m.input_width()));
    if (!masks.empty()) {
        if (masks.size() != m.layers.size() - 1)
            throw ShapeError("one dropout mask per layer boundary required");
        for (std::size_t l = 0; l + 1 < m.layers.size(); ++l)
            if (masks[l].keep.size() != m.layers[l].hidden())
                throw ShapeError("dropout mask width differs from hidden width");
    }
}

void run_forward(const LstmStack& m, std::span<const double> window, std::size_t length,
                 std::span<const DropoutMask> masks, Trace& tr)
{
    const std::size_t layers = m.layers.size();
    const std::size_t in = m.input_width();
    tr.steps = length;
    tr.x.assign(length, std::vector<std::vector<double>>(layers));
    tr.gates.assign(length, std::vector<std::vector<double>>(layers));
    tr.c.assign(length, std::vector<std::vector<double>>(layers));
    tr.h.assign(length, std::vector<std::vector<double>>(layers));

    std::vector<std::vector<double>> zero(layers);
    for (std::size_t l = 0; l < layers; ++l)
        zero[l].assign(m.layers[l].hidden(), 0.0);

    for (std::size_t t = 0; t < length; ++t) {
        for (std::size_t l = 0; l < layers; ++l) {
            const auto& p = m.layers[l];
            const auto hid = p.hidden();
            auto& x = tr.x[t][l];
            if (l == 0) {
                x.assign(window.begin() + static_cast<std::ptrdiff_t>(t * in),
                         window.begin() + static_cast<std::ptrdiff_t>((t + 1) * in));
            } else {
                x = tr.h[t][l - 1];
                if (!masks.empty())
                    for (std::size_t k = 0; k < x.size(); ++k)
                        x[k] = masks[l - 1].keep[k] ? x[k] * masks[l - 1].scale : 0.0;
            }
            const auto& h_prev = t ? tr.h[t - 1][l] : zero[l];
            const auto& c_prev = t ? tr.c[t - 1][l] : zero[l];
            tr.gates[t][l].resize(kGateCount * hid);
            tr.c[t][l].resize(hid);
            tr.h[t][l].resize(hid);
            detail::cell_kernel(p, x, h_prev, c_prev, tr.gates[t][l], tr.h[t][l], tr.c[t][l]);
        }
    }
    const auto& top = tr.h[length - 1][layers - 1];
    double z = m.fc_b;
    for (std::size_t k = 0; k < top.size(); ++k)
        z += m.fc_w[k] * top[k];
    tr.z_out = z;
    tr.y = sigmoid(z);
}

}  // namespace

double forward_window(const LstmStack& m, std::span<const double> window, std::size_t length,
                      std::span<const DropoutMask> masks)
{
    check_window(m, window, length, masks);
    Trace tr;
    run_forward(m, window, length, masks, tr);
    return tr.y;
}

BackwardResult backward(const LstmStack& m, std::span<const double> window, std::size_t length,
                        double target, std::span<const DropoutMask> masks)
{
    check_window(m, window, length, masks);
    Trace tr;
    run_forward(m, window, length, masks, tr);

    BackwardResult res;
    res.prediction = tr.y;
    const double err = tr.y - target;
    res.loss = err * err;
    res.grads = Gradients::zeros_like(m);
    auto& G = res.grads;

    const std::size_t layers = m.layers.size();
    const double dz_out = 2.0 * err * tr.y * (1.0 - tr.y);
    const auto& top = tr.h[length - 1][layers - 1];
    for (std::size_t k = 0; k < top.size(); ++k)
        G.fc_w[k] = dz_out * top[k];
    G.fc_b = dz_out;

    std::vector<std::vector<double>> dh_rec(layers), dc_rec(layers), dh_above(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        dh_rec[l].assign(m.layers[l].hidden(), 0.0);
        dc_rec[l].assign(m.layers[l].hidden(), 0.0);
        dh_above[l].assign(m.layers[l].hidden(), 0.0);
    }
    std::vector<double> dz, dh, dc;

    for (std::size_t t = length; t-- > 0;) {
        if (t == length - 1)
            for (std::size_t k = 0; k < m.fc_w.size(); ++k)
                dh_above[layers - 1][k] = dz_out * m.fc_w[k];
        else
            std::fill(dh_above[layers - 1].begin(), dh_above[layers - 1].end(), 0.0);

        for (std::size_t l = layers; l-- > 0;) {
            const auto& p = m.layers[l];
            auto& gl = G.layers[l];
            const std::size_t hid = p.hidden();
            const std::size_t in = p.input_width();
            const auto& gates = tr.gates[t][l];
            const auto& c = tr.c[t][l];
            const auto& x = tr.x[t][l];
            const std::vector<double>* h_prev = t ? &tr.h[t - 1][l] : nullptr;
            const std::vector<double>* c_prev = t ? &tr.c[t - 1][l] : nullptr;

            dz.assign(kGateCount * hid, 0.0);
            dh.resize(hid);
            dc.resize(hid);
            for (std::size_t r = 0; r < hid; ++r) {
                const double f = gates[forget * hid + r];
                const double i = gates[input * hid + r];
                const double cs = gates[candidate * hid + r];
                const double o = gates[output * hid + r];
                const double tc = std::tanh(c[r]);
                dh[r] = dh_rec[l][r] + dh_above[l][r];
                dc[r] = dc_rec[l][r] + dh[r] * o * (1.0 - tc * tc);
                const double cp = c_prev ? (*c_prev)[r] : 0.0;
                dz[forget * hid + r] = dc[r] * cp * f * (1.0 - f);
                dz[input * hid + r] = dc[r] * cs * i * (1.0 - i);
                dz[candidate * hid + r] = dc[r] * i * (1.0 - cs * cs);
                dz[output * hid + r] = dh[r] * tc * o * (1.0 - o);
                dc_rec[l][r] = dc[r] * f;
            }

            std::fill(dh_rec[l].begin(), dh_rec[l].end(), 0.0);
            std::vector<double> dx(in, 0.0);
            for (std::size_t g = 0; g < kGateCount; ++g) {
                const double* w = p.w[g].data.data();
                const double* wr = p.wr[g].data.data();
                double* gw = gl.w[g].data.data();
                double* gwr = gl.wr[g].data.data();
                for (std::size_t r = 0; r < hid; ++r) {
                    const double d = dz[g * hid + r];
                    gl.b[g][r] += d;
                    for (std::size_t k = 0; k < in; ++k) {
                        gw[r * in + k] += d * x[k];
                        dx[k] += w[r * in + k] * d;
                    }
                    if (h_prev) {
                        for (std::size_t k = 0; k < hid; ++k)
                            gwr[r * hid + k] += d * (*h_prev)[k];
                    }
                    for (std::size_t k = 0; k < hid; ++k)
                        dh_rec[l][k] += wr[r * hid + k] * d;
                }
            }
            if (l > 0) {
                auto& below = dh_above[l - 1];
                for (std::size_t k = 0; k < in; ++k) {
                    double v = dx[k];
                    if (!masks.empty())
                        v = masks[l - 1].keep[k] ? v * masks[l - 1].scale : 0.0;
                    below[k] = v;
                }
            }
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Optimizer

void TrainConfig::validate() const
{
    if (!(learning_rate > 0))
        throw ConfigError("learning rate must be > 0");
    if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1))
        throw ConfigError("Adam betas must lie in (0, 1)");
    if (!(epsilon > 0))
        throw ConfigError("Adam epsilon must be > 0");
    if (validation_interval < 1)
        throw ConfigError("validation interval must be >= 1");
    if (batch_size < 1)
        throw ConfigError("batch size must be >= 1");
    if (!(convergence_delta >= 0))
        throw ConfigError("convergence delta must be >= 0");
}

void adam_step(LstmStack& params, AdamState& state, const Gradients& g, std::size_t step_index,
               const TrainConfig& cfg)
{
    if (step_index < 1)
        throw ConfigError("Adam step index starts at 1");
    auto p = parameter_blocks(params);
    auto d = parameter_blocks(g);
    if (p.size() != d.size())
        throw ShapeError("gradient shape differs from model");
    const std::size_t total = parameter_count(params);
    if (state.m.empty()) {
        state.m.assign(total, 0.0);
        state.v.assign(total, 0.0);
    }
    if (state.m.size() != total || state.v.size() != total)
        throw ShapeError("optimizer state shape differs from model");

    const double t = static_cast<double>(step_index);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    std::size_t idx = 0;
    for (std::size_t b = 0; b < p.size(); ++b) {
        if (p[b].size() != d[b].size())
            throw ShapeError("gradient shape differs from model");
        for (std::size_t k = 0; k < p[b].size(); ++k, ++idx) {
            const double gk = d[b][k];
            state.m[idx] = cfg.beta1 * state.m[idx] + (1.0 - cfg.beta1) * gk;
            state.v[idx] = cfg.beta2 * state.v[idx] + (1.0 - cfg.beta2) * gk * gk;
            const double mhat = state.m[idx] / c1;
            const double vhat = state.v[idx] / c2;
            p[b][k] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

const char* to_string(StopReason r)
{
    switch (r) {
    case StopReason::max_epochs:
        return "max_epochs";
    case StopReason::max_steps:
        return "max_steps";
    case StopReason::converged:
        return "converged";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

std::size_t worker_count(std::size_t requested, std::size_t jobs)
{
    std::size_t n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    return std::max<std::size_t>(1, std::min(n, jobs));
}

/// Runs fn(i) for i in [0, jobs) across workers; results must go to per-index slots.
template <class Fn>
void parallel_for(std::size_t jobs, std::size_t threads, Fn&& fn)
{
    const std::size_t workers = worker_count(threads, jobs);
    if (workers == 1) {
        for (std::size_t i = 0; i < jobs; ++i)
            fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < jobs; i += workers)
                fn(i);
        });
}

}  // namespace

double evaluate_loss(const LstmStack& m, const Dataset& data, std::size_t threads)
{
    if (data.empty())
        throw DataError("cannot evaluate on an empty dataset");
    std::vector<double> losses(data.size());
    parallel_for(data.size(), threads, [&](std::size_t j) {
        const double e = forward_window(m, data.window(j), data.length) - data.targets[j];
        losses[j] = e * e;
    });
    double acc = 0.0;
    for (double l : losses)
        acc += l;
    return acc / static_cast<double>(data.size());
}

TrainReport train(const LstmStack& m0, const Dataset& train_set, const Dataset& valid_set,
                  const TrainConfig& cfg)
{
    cfg.validate();
    m0.validate();
    TrainReport report;
    report.parameters = m0;
    if (cfg.max_epochs == 0)
        return report;
    if (train_set.empty() || valid_set.empty())
        throw DataError("training and validation sets must be non-empty");
    if (train_set.width != m0.input_width() || valid_set.width != m0.input_width())
        throw ShapeError("dataset width differs from model input width");

    LstmStack params = m0;
    AdamState adam;
    std::mt19937_64 shuffle_rng(cfg.seed);
    const std::uint64_t dropout_seed = cfg.dropout_seed;
    const bool use_dropout = params.dropout_rate > 0 && params.layers.size() > 1;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    double best = std::numeric_limits<double>::infinity();
    double patience_ref = best;
    std::size_t stale = 0;
    std::size_t step = 0;
    bool stopped = false;

    auto validate_now = [&] {
        const double v = evaluate_loss(params, valid_set, cfg.threads);
        if (!std::isfinite(v))
            throw TrainingError("validation loss became non-finite at step " + std::to_string(step));
        report.validation.push_back({step, v});
        if (v < best) {
            best = v;
            report.parameters = params;
            report.best_step = step;
        }
        if (v < patience_ref - cfg.convergence_delta) {
            patience_ref = v;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            return true;
        }
        return false;
    };

    std::vector<BackwardResult> slots;
    for (std::size_t epoch = 0; epoch < cfg.max_epochs && !stopped; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - first);
            slots.assign(count, BackwardResult{});
            parallel_for(count, cfg.threads, [&](std::size_t k) {
                const std::size_t j = order[first + k];
                std::vector<DropoutMask> masks;
                if (use_dropout) {
                    const auto window_seed = derive_seed(dropout_seed, step * order.size() + first + k);
                    for (std::size_t l = 0; l + 1 < params.layers.size(); ++l)
                        masks.push_back(make_dropout_mask(params.dropout_rate, params.layers[l].hidden(),
                                                          derive_seed(window_seed, l)));
                }
                slots[k] = backward(params, train_set.window(j), train_set.length, train_set.targets[j], masks);
            });

            Gradients g = std::move(slots[0].grads);
            double loss = slots[0].loss;
            for (std::size_t k = 1; k < count; ++k) {
                g.add(slots[k].grads);
                loss += slots[k].loss;
            }
            const double inv = 1.0 / static_cast<double>(count);
            g.scale(inv);
            loss *= inv;
            if (!std::isfinite(loss) || !g.all_finite())
                throw TrainingError("training loss became non-finite at step " + std::to_string(step + 1) +
                                    " (epoch " + std::to_string(epoch) + ")");

            ++step;
            adam_step(params, adam, g, step, cfg);
            report.train_loss.push_back(loss);

            if (step % cfg.validation_interval == 0 && validate_now()) {
                report.reason = StopReason::converged;
                stopped = true;
                break;
            }
            if (cfg.max_steps && step >= cfg.max_steps) {
                report.reason = StopReason::max_steps;
                stopped = true;
                break;
            }
        }
    }
    if (!stopped)
        report.reason = StopReason::max_epochs;
    if (report.validation.empty())
        validate_now();
    report.best_validation_loss = best;
    return report;
}

void write_report_csv(std::ostream& out, const TrainReport& report)
{
    out << "step,train_loss,valid_loss\n";
    std::size_t v = 0;
    char buf[96];
    for (std::size_t s = 0; s < report.train_loss.size(); ++s) {
        const std::size_t step = s + 1;
        std::snprintf(buf, sizeof buf, "%zu,%.17g,", step, report.train_loss[s]);
        out << buf;
        while (v < report.validation.size() && report.validation[v].step < step)
            ++v;
        if (v < report.validation.size() && report.validation[v].step == step) {
            std::snprintf(buf, sizeof buf, "%.17g", report.validation[v].loss);
            out << buf;
        }
        out << '\n';
    }
}

void write_report_csv(const std::string& path, const TrainReport& report)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open '" + path + "' for writing");
    write_report_csv(f, report);
}

}  // namespace lstmeq
