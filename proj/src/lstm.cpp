#include "lstmeq/lstm.hpp"

#include "lstmeq/channel.hpp"
#include "lstmeq/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lstmeq {

GateParams GateParams::zeros(std::size_t input_width, std::size_t hidden)
{
    if (input_width < 1 || hidden < 1)
        throw ShapeError("layer widths must be >= 1");
    GateParams p;
    for (std::size_t g = 0; g < kGateCount; ++g) {
        p.w[g] = Matrix(hidden, input_width);
        p.wr[g] = Matrix(hidden, hidden);
        p.b[g].assign(hidden, 0.0);
    }
    return p;
}

void GateParams::validate() const
{
    const auto in = input_width();
    const auto hid = hidden();
    if (in < 1 || hid < 1)
        throw ShapeError("layer widths must be >= 1");
    for (std::size_t g = 0; g < kGateCount; ++g) {
        if (w[g].rows != hid || w[g].cols != in || w[g].data.size() != hid * in)
            throw ShapeError("input weight shapes differ across gates");
        if (wr[g].rows != hid || wr[g].cols != hid || wr[g].data.size() != hid * hid)
            throw ShapeError("recurrent weight shapes differ across gates");
        if (b[g].size() != hid)
            throw ShapeError("bias length differs from hidden width");
        for (double v : w[g].data)
            if (!std::isfinite(v))
                throw ConfigError("non-finite input weight");
        for (double v : wr[g].data)
            if (!std::isfinite(v))
                throw ConfigError("non-finite recurrent weight");
        for (double v : b[g])
            if (!std::isfinite(v))
                throw ConfigError("non-finite bias");
    }
}

LstmStack LstmStack::zeros(std::size_t input_width, const std::vector<std::size_t>& hidden,
                           double dropout_rate)
{
    if (hidden.empty())
        throw ShapeError("stack needs at least one layer");
    LstmStack m;
    std::size_t in = input_width;
    for (auto h : hidden) {
        m.layers.push_back(GateParams::zeros(in, h));
        in = h;
    }
    m.dropout_rate = dropout_rate;
    m.fc_w.assign(hidden.back(), 0.0);
    m.validate();
    return m;
}

void LstmStack::validate() const
{
    if (layers.empty())
        throw ShapeError("stack needs at least one layer");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].validate();
        if (l > 0 && layers[l].input_width() != layers[l - 1].hidden())
            throw ShapeError("layer " + std::to_string(l) + " input width differs from previous hidden width");
    }
    if (!(dropout_rate >= 0 && dropout_rate < 1))
        throw ConfigError("dropout rate must lie in [0, 1)");
    if (fc_w.size() != layers.back().hidden())
        throw ShapeError("decoder width differs from last hidden width");
    if (post_fir.empty())
        throw ConfigError("post-filter needs at least one tap");
    for (double v : fc_w)
        if (!std::isfinite(v))
            throw ConfigError("non-finite decoder weight");
    if (!std::isfinite(fc_b))
        throw ConfigError("non-finite decoder bias");
}

std::vector<CellState> LstmStack::zero_states() const
{
    std::vector<CellState> s;
    s.reserve(layers.size());
    for (const auto& l : layers)
        s.push_back(CellState::zeros(l.hidden()));
    return s;
}

double sigmoid(double x)
{
    if (x >= 0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace detail {

void cell_kernel(const GateParams& p, std::span<const double> x, std::span<const double> h_prev,
                 std::span<const double> c_prev, std::span<double> gates, std::span<double> h_out,
                 std::span<double> c_out)
{
    const std::size_t hid = p.hidden();
    const std::size_t in = p.input_width();
    for (std::size_t g = 0; g < kGateCount; ++g) {
        const double* w = p.w[g].data.data();
        const double* wr = p.wr[g].data.data();
        for (std::size_t r = 0; r < hid; ++r) {
            double z = p.b[g][r];
            const double* wrow = w + r * in;
            for (std::size_t k = 0; k < in; ++k)
                z += wrow[k] * x[k];
            const double* rrow = wr + r * hid;
            for (std::size_t k = 0; k < hid; ++k)
                z += rrow[k] * h_prev[k];
            gates[g * hid + r] = g == candidate ? std::tanh(z) : sigmoid(z);
        }
    }
    for (std::size_t r = 0; r < hid; ++r) {
        const double f = gates[forget * hid + r];
        const double i = gates[input * hid + r];
        const double cs = gates[candidate * hid + r];
        const double o = gates[output * hid + r];
        const double c = f * c_prev[r] + i * cs;
        c_out[r] = c;
        h_out[r] = o * std::tanh(c);
    }
}

}  // namespace detail

CellState cell_step(const GateParams& p, std::span<const double> x, const CellState& state)
{
    const auto hid = p.hidden();
    if (x.size() != p.input_width())
        throw ShapeError("cell input width " + std::to_string(x.size()) + " != " +
                         std::to_string(p.input_width()));
    if (state.h.size() != hid || state.c.size() != hid)
        throw ShapeError("cell state width differs from hidden width");
    CellState next = CellState::zeros(hid);
    std::vector<double> gates(kGateCount * hid);
    detail::cell_kernel(p, x, state.h, state.c, gates, next.h, next.c);
    return next;
}

StackOutput stack_forward(const LstmStack& m, std::span<const double> x,
                          const std::vector<CellState>& states, std::span<const DropoutMask> masks)
{
    if (states.size() != m.layers.size())
        throw ShapeError("one cell state per layer required");
    if (!masks.empty() && masks.size() != m.layers.size() - 1)
        throw ShapeError("training mode needs one dropout mask per layer boundary");

    StackOutput out;
    out.states.reserve(m.layers.size());
    std::vector<double> feed(x.begin(), x.end());
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        out.states.push_back(cell_step(m.layers[l], feed, states[l]));
        feed = out.states.back().h;
        if (!masks.empty() && l + 1 < m.layers.size()) {
            const auto& mask = masks[l];
            if (mask.keep.size() != feed.size())
                throw ShapeError("dropout mask width differs from hidden width");
            for (std::size_t k = 0; k < feed.size(); ++k)
                feed[k] = mask.keep[k] ? feed[k] * mask.scale : 0.0;
        }
    }
    double z = m.fc_b;
    for (std::size_t k = 0; k < feed.size(); ++k)
        z += m.fc_w[k] * feed[k];
    out.y = sigmoid(z);
    return out;
}

DropoutMask make_dropout_mask(double rate, std::size_t width, std::uint64_t seed)
{
    if (!(rate >= 0 && rate < 1))
        throw ConfigError("dropout rate must lie in [0, 1)");
    DropoutMask mask;
    mask.scale = 1.0 / (1.0 - rate);
    mask.keep.assign(width, 1);
    if (rate == 0.0)
        return mask;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& k : mask.keep)
        k = u(rng) < rate ? 0 : 1;
    return mask;
}

Waveform fir_postfilter(const Waveform& y, std::span<const double> taps)
{
    if (taps.empty())
        throw ConfigError("post-filter needs at least one tap");
    return Waveform{fir_filter(y.samples, taps), y.sample_period};
}

std::vector<double> default_post_fir(const LinkConfig& cfg)
{
    const auto len = static_cast<std::size_t>(std::max(1, cfg.ticks_per_bit() / 2));
    return std::vector<double>(len, 1.0 / static_cast<double>(len));
}

std::vector<std::size_t> bit_center_ticks(const LinkConfig& cfg, std::size_t bit_count)
{
    const long spb = cfg.samples_per_bit;
    const long stride = cfg.tick_stride();
    std::vector<std::size_t> ticks(bit_count);
    for (std::size_t k = 0; k < bit_count; ++k) {
        const long center = static_cast<long>(k) * spb + spb / 2 - cfg.sampling_phase;
        ticks[k] = center > 0 ? static_cast<std::size_t>(center / stride) : 0;
    }
    return ticks;
}

StreamingEqualizer::StreamingEqualizer(const LstmStack& model, std::size_t delay_depth)
    : model_(&model), delay_(delay_depth)
{
    model.validate();
    if (model.input_width() != delay_depth)
        throw ShapeError("model input width " + std::to_string(model.input_width()) +
                         " != delay depth " + std::to_string(delay_depth));
    std::size_t widest = 0;
    for (const auto& l : model.layers) {
        h_.emplace_back(l.hidden(), 0.0);
        c_.emplace_back(l.hidden(), 0.0);
        widest = std::max(widest, l.hidden());
    }
    gates_.resize(kGateCount * widest);
    fir_history_.assign(model.post_fir.size(), 0.0);
}

void StreamingEqualizer::reset()
{
    delay_.reset();
    for (auto& v : h_)
        std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : c_)
        std::fill(v.begin(), v.end(), 0.0);
    std::fill(fir_history_.begin(), fir_history_.end(), 0.0);
    fir_pos_ = 0;
    last_y_ = 0.0;
}

double StreamingEqualizer::step(double sample)
{
    const auto& m = *model_;
    std::span<const double> feed = delay_.push(sample);
    std::vector<double> h_new, c_new;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto hid = m.layers[l].hidden();
        h_new.resize(hid);
        c_new.resize(hid);
        detail::cell_kernel(m.layers[l], feed, h_[l], c_[l],
                            std::span<double>(gates_.data(), kGateCount * hid), h_new, c_new);
        std::swap(h_[l], h_new);
        std::swap(c_[l], c_new);
        feed = h_[l];
    }
    double z = m.fc_b;
    for (std::size_t k = 0; k < feed.size(); ++k)
        z += m.fc_w[k] * feed[k];
    last_y_ = sigmoid(z);

    // Ring buffer: fir_history_[fir_pos_] is the newest decoder output.
    const std::size_t n = fir_history_.size();
    fir_pos_ = (fir_pos_ + n - 1) % n;
    fir_history_[fir_pos_] = last_y_;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        acc += m.post_fir[j] * fir_history_[(fir_pos_ + j) % n];
    return acc;
}

EqualizedStream equalize_ticks(const LstmStack& m, const Waveform& ticks, const LinkConfig& cfg)
{
    cfg.validate();
    StreamingEqualizer eq(m, static_cast<std::size_t>(cfg.delay_depth));
    EqualizedStream out;
    out.analog.sample_period = ticks.sample_period;
    out.analog.samples.reserve(ticks.size());
    for (double s : ticks.samples)
        out.analog.samples.push_back(eq.step(s));

    const auto stride = static_cast<std::size_t>(cfg.tick_stride());
    const std::size_t covered = ticks.size() * stride + static_cast<std::size_t>(cfg.sampling_phase);
    const std::size_t bit_count = covered / static_cast<std::size_t>(cfg.samples_per_bit);
    const auto centers = bit_center_ticks(cfg, bit_count);
    const double thr = cfg.mid_level();
    for (auto t : centers) {
        if (t >= out.analog.size())
            break;
        out.bits.bits.push_back(slice(out.analog.samples[t], thr));
    }
    return out;
}

EqualizedStream equalize_stream(const LstmStack& m, const Waveform& rx, const LinkConfig& cfg)
{
    cfg.validate();
    const auto ticks = sample_and_hold(rx, static_cast<std::size_t>(cfg.sampling_phase),
                                       static_cast<std::size_t>(cfg.tick_stride()));
    return equalize_ticks(m, ticks, cfg);
}

}  // namespace lstmeq
