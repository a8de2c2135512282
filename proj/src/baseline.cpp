#include "lstmeq/baseline.hpp"

#include "lstmeq/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace lstmeq {

std::vector<double> FfeTaps::taps() const
{
    std::vector<double> t(precursors);
    t.push_back(main);
    t.insert(t.end(), postcursors.begin(), postcursors.end());
    return t;
}

void FfeTaps::validate() const
{
    for (double v : taps())
        if (!std::isfinite(v))
            throw ConfigError("FFE taps must be finite");
    if (main == 0.0)
        throw ConfigError("FFE main cursor must be nonzero");
}

Waveform ffe_apply(const FfeTaps& t, const Waveform& rx, int samples_per_cursor)
{
    t.validate();
    if (samples_per_cursor < 1)
        throw ConfigError("samples_per_cursor must be >= 1");
    const auto taps = t.taps();
    const auto spc = static_cast<std::size_t>(samples_per_cursor);
    std::vector<double> spread((taps.size() - 1) * spc + 1, 0.0);
    for (std::size_t i = 0; i < taps.size(); ++i)
        spread[i * spc] = taps[i];
    return Waveform{fir_filter(rx.samples, spread), rx.sample_period};
}

DfeResult dfe_equalize(const DfeTaps& t, const Waveform& y, const LinkConfig& cfg)
{
    cfg.validate();
    for (double v : t.taps)
        if (!std::isfinite(v))
            throw ConfigError("DFE taps must be finite");
    DfeResult out;
    out.corrected.sample_period = y.sample_period;
    out.corrected.samples.reserve(y.size());
    out.bits.bits.reserve(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) {
        double v = y.samples[k];
        for (std::size_t j = 1; j <= t.taps.size(); ++j) {
            const double u = (k >= j ? out.bits.bits[k - j] : 0) ? 0.5 : -0.5;
            v -= t.taps[j - 1] * u;
        }
        out.corrected.samples.push_back(v);
        out.bits.bits.push_back(slice(v, t.threshold));
    }
    return out;
}

std::size_t main_cursor_index(const std::vector<double>& pulse)
{
    if (pulse.empty())
        throw FitError("empty pulse");
    std::size_t best = 0;
    for (std::size_t i = 1; i < pulse.size(); ++i)
        if (std::abs(pulse[i]) > std::abs(pulse[best]))
            best = i;
    std::size_t last = best;
    while (last + 1 < pulse.size() && pulse[last + 1] == pulse[best])
        ++last;
    return best + (last - best) / 2;
}

FfeFit fit_ffe_taps(const ImpulseResponse& pulse, int n_pre, int n_post, int samples_per_cursor,
                    std::optional<std::size_t> main_index)
{
    pulse.validate();
    if (n_pre < 0 || n_post < 0)
        throw ConfigError("cursor counts must be >= 0");
    if (samples_per_cursor < 1)
        throw ConfigError("samples_per_cursor must be >= 1");
    const auto& p = pulse.taps;
    const auto spc = static_cast<long>(samples_per_cursor);
    const long n_taps = n_pre + n_post + 1;
    const long m0 = static_cast<long>(main_index.value_or(main_cursor_index(p)));
    if (m0 >= static_cast<long>(p.size()))
        throw FitError("main cursor index lies outside the pulse");

    // Equalized pulse e[m] = sum_i c_i p[m - i * spc]; main cursor at m0 + n_pre * spc.
    const long last = static_cast<long>(p.size()) - 1 + (n_taps - 1) * spc;
    const long centre = m0 + n_pre * spc;
    const long q_lo = -(centre / spc);
    const long q_hi = (last - centre) / spc;
    const long rows = q_hi - q_lo + 1;

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, n_taps);
    Eigen::VectorXd target = Eigen::VectorXd::Zero(rows);
    for (long q = q_lo; q <= q_hi; ++q) {
        const long m = centre + q * spc;
        for (long i = 0; i < n_taps; ++i) {
            const long src = m - i * spc;
            if (src >= 0 && src < static_cast<long>(p.size()))
                a(q - q_lo, i) = p[static_cast<std::size_t>(src)];
        }
        if (q == 0)
            target(q - q_lo) = 1.0;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-12);
    if (qr.rank() < n_taps)
        throw FitError("FFE least-squares system is singular (pulse too short for the cursor span?)");
    const Eigen::VectorXd c = qr.solve(target);

    FfeFit fit;
    fit.main_index = static_cast<std::size_t>(m0);
    fit.residual = (a * c - target).squaredNorm();
    for (long i = 0; i < n_taps; ++i) {
        if (i < n_pre)
            fit.taps.precursors.push_back(c(i));
        else if (i == n_pre)
            fit.taps.main = c(i);
        else
            fit.taps.postcursors.push_back(c(i));
    }
    if (fit.taps.main == 0.0)
        throw FitError("fitted main cursor is zero");
    return fit;
}

DfeTaps fit_dfe_taps(const ImpulseResponse& equalized_pulse, int n_taps, const LinkConfig& cfg,
                     std::optional<std::size_t> main_index)
{
    cfg.validate();
    if (n_taps < 0)
        throw ConfigError("DFE tap count must be >= 0");
    const auto& e = equalized_pulse.taps;
    if (e.empty() || !(equalized_pulse.tap_period > 0))
        throw FitError("empty equalized pulse");
    const double ratio = cfg.unit_interval() / equalized_pulse.tap_period;
    const auto spacing = static_cast<std::size_t>(std::llround(ratio));
    if (spacing < 1 || std::abs(ratio - static_cast<double>(spacing)) > 1e-6 * ratio)
        throw FitError("pulse tap period does not divide the unit interval");
    const std::size_t m0 = main_index.value_or(main_cursor_index(e));
    if (m0 + static_cast<std::size_t>(n_taps) * spacing >= e.size())
        throw FitError("equalized pulse too short for " + std::to_string(n_taps) + " DFE taps");

    DfeTaps d;
    const double swing = cfg.high_level - cfg.low_level;
    for (int j = 1; j <= n_taps; ++j)
        d.taps.push_back(e[m0 + static_cast<std::size_t>(j) * spacing] * swing);
    double gain = 0.0;
    for (std::size_t m = m0 % spacing; m < e.size(); m += spacing)
        gain += e[m];
    d.threshold = cfg.mid_level() * gain;
    return d;
}

ImpulseResponse pulse_response(const ImpulseResponse& channel, const LinkConfig& cfg,
                               std::size_t tail_bits)
{
    cfg.validate();
    LinkConfig unit = cfg;
    unit.high_level = 1.0;
    unit.low_level = 0.0;
    const std::size_t tail = std::max<std::size_t>(
        tail_bits, channel.taps.size() / static_cast<std::size_t>(cfg.samples_per_bit) + 2);
    BitStream bits;
    bits.bits.assign(tail + 2, 0);
    bits.bits[1] = 1;
    const auto rx = apply_channel(modulate_nrz(bits, unit), channel);
    const auto spb = static_cast<std::size_t>(cfg.samples_per_bit);
    return ImpulseResponse{std::vector<double>(rx.samples.begin() + static_cast<std::ptrdiff_t>(spb),
                                               rx.samples.end()),
                           rx.sample_period};
}

Baseline fit_baseline(const ImpulseResponse& channel, const LinkConfig& cfg, int n_pre, int n_post,
                      int n_dfe)
{
    const auto pulse = pulse_response(channel, cfg);
    Baseline b;
    b.samples_per_cursor = cfg.samples_per_bit;
    const auto ffe = fit_ffe_taps(pulse, n_pre, n_post, b.samples_per_cursor);
    b.ffe = ffe.taps;
    b.ffe_residual = ffe.residual;
    const auto eq = ffe_apply(b.ffe, Waveform{pulse.taps, pulse.tap_period}, b.samples_per_cursor);
    const std::size_t main = ffe.main_index + static_cast<std::size_t>(n_pre * b.samples_per_cursor);
    // Pad so the DFE read-off never runs past the end of the filtered pulse.
    std::vector<double> padded = eq.samples;
    padded.resize(std::max(padded.size(),
                           main + static_cast<std::size_t>(n_dfe + 1) * static_cast<std::size_t>(cfg.samples_per_bit)),
                  0.0);
    b.dfe = fit_dfe_taps(ImpulseResponse{padded, pulse.tap_period}, n_dfe, cfg, main);
    b.decision_offset = main;
    return b;
}

BaselineOutput run_baseline(const Baseline& b, const Waveform& rx, const LinkConfig& cfg)
{
    cfg.validate();
    const auto ffe_out = ffe_apply(b.ffe, rx, b.samples_per_cursor);
    const auto spb = static_cast<std::size_t>(cfg.samples_per_bit);

    Waveform sampled;
    sampled.sample_period = cfg.unit_interval();
    for (std::size_t s = b.decision_offset; s < ffe_out.size(); s += spb)
        sampled.samples.push_back(ffe_out.samples[s]);
    auto dfe = dfe_equalize(b.dfe, sampled, cfg);

    BaselineOutput out;
    out.bits = dfe.bits;
    out.decisions = dfe.corrected;

    // Hold each bit's feedback correction over the unit interval centred on its decision.
    out.waveform = ffe_out;
    const long half = static_cast<long>(spb / 2);
    for (std::size_t s = 0; s < ffe_out.size(); ++s) {
        const long rel = static_cast<long>(s) - static_cast<long>(b.decision_offset) + half;
        const long k = rel >= 0 ? rel / static_cast<long>(spb) : -1;
        double fb = 0.0;
        for (std::size_t j = 1; j <= b.dfe.taps.size(); ++j) {
            const long idx = k - static_cast<long>(j);
            const bool one = idx >= 0 && static_cast<std::size_t>(idx) < dfe.bits.size() && dfe.bits[static_cast<std::size_t>(idx)];
            fb += b.dfe.taps[j - 1] * (one ? 0.5 : -0.5);
        }
        out.waveform.samples[s] -= fb;
    }
    return out;
}

}  // namespace lstmeq
