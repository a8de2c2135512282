#include "lstmeq/metrics.hpp"

#include "lstmeq/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>

namespace lstmeq {

double LevelMoments::stddev() const
{
    if (count == 0)
        return 0.0;
    const double m = mean();
    const double var = sum_sq / static_cast<double>(count) - m * m;
    return var > 0 ? std::sqrt(var) : 0.0;
}

namespace {

double median(std::vector<double>& v)
{
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2)
        return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

// Midpoint of the medians of the two level clusters, split first at the plain
// mean. Follows any offset or gain applied to the waveform, and edge samples
// do not pull it off the halfway point whatever the ones density.
double crossing_threshold(const std::vector<double>& x)
{
    double mean = 0.0;
    for (double v : x)
        mean += v;
    mean /= static_cast<double>(x.size());
    std::vector<double> hi, lo;
    for (double v : x)
        (v >= mean ? hi : lo).push_back(v);
    if (hi.empty() || lo.empty())
        return mean;
    return 0.5 * (median(hi) + median(lo));
}

}  // namespace

EyeHistogram accumulate_eye(const Waveform& w, const LinkConfig& cfg, std::size_t phase_offset,
                            std::size_t span_ui, std::size_t amp_bins)
{
    if (w.samples.empty())
        throw DataError("cannot build an eye from an empty waveform");
    if (span_ui < 1 || amp_bins < 1)
        throw ConfigError("eye span and amplitude bins must be >= 1");
    const double ratio = cfg.unit_interval() / w.sample_period;
    const auto ui = static_cast<std::size_t>(std::llround(ratio));
    if (ui < 1 || std::abs(ratio - static_cast<double>(ui)) > 1e-6 * ratio)
        throw ConfigError("waveform sample period does not divide the unit interval");
    if (w.size() < ui)
        throw DataError("waveform shorter than one unit interval");

    EyeHistogram h;
    h.ui_samples = ui;
    h.span_ui = span_ui;
    h.phase_bins = ui * span_ui;
    h.amp_bins = amp_bins;
    const auto [lo, hi] = std::minmax_element(w.samples.begin(), w.samples.end());
    double range = *hi - *lo;
    double pad = 0.05 * range;
    if (range == 0.0)
        pad = std::max(0.5, 0.05 * std::abs(*lo));
    h.amp_min = *lo - pad;
    h.amp_max = *hi + pad;
    h.bins.assign(h.phase_bins * amp_bins, 0);
    h.high.assign(h.phase_bins, {});
    h.low.assign(h.phase_bins, {});

    const double mean = crossing_threshold(w.samples);
    h.crossing_level = mean;

    const double scale = static_cast<double>(amp_bins) / (h.amp_max - h.amp_min);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double v = w.samples[i];
        const std::size_t phase = (i + phase_offset) % h.phase_bins;
        auto a = static_cast<long>(std::floor((v - h.amp_min) * scale));
        a = std::clamp(a, 0L, static_cast<long>(amp_bins) - 1);
        ++h.bins[phase * amp_bins + static_cast<std::size_t>(a)];
        if (v >= mean)
            h.high[phase].add(v);
        else
            h.low[phase].add(v);

        if (i + 1 < w.size()) {
            const double n = w.samples[i + 1];
            if ((v >= mean) != (n >= mean)) {
                const double frac = (mean - v) / (n - v);
                const double pos = (static_cast<double>(i + phase_offset) + frac) / static_cast<double>(ui);
                h.crossing_phases.push_back(pos - std::floor(pos));
            }
        }
    }
    h.total_count = w.size();
    return h;
}

EyeReport eye_metrics(const EyeHistogram& h)
{
    if (h.total_count == 0 || h.ui_samples == 0)
        throw DataError("empty eye histogram");
    const std::size_t ui = h.ui_samples;
    std::vector<LevelMoments> high(ui), low(ui);
    for (std::size_t p = 0; p < h.phase_bins; ++p) {
        high[p % ui].merge(h.high[p]);
        low[p % ui].merge(h.low[p]);
    }
    bool any_high = false, any_low = false;
    for (std::size_t p = 0; p < ui; ++p) {
        any_high = any_high || high[p].count > 0;
        any_low = any_low || low[p].count > 0;
    }
    if (!any_high || !any_low)
        throw DataError("eye needs samples on both sides of the crossing level");

    EyeReport r;
    r.crossing_level = h.crossing_level;
    std::vector<double> height(ui, -std::numeric_limits<double>::infinity());
    for (std::size_t p = 0; p < ui; ++p) {
        if (high[p].count == 0 || low[p].count == 0)
            continue;
        height[p] = (high[p].mean() - 3.0 * high[p].stddev()) - (low[p].mean() + 3.0 * low[p].stddev());
    }
    r.eye_height = *std::max_element(height.begin(), height.end());
    if (!std::isfinite(r.eye_height))
        r.eye_height = -(h.amp_max - h.amp_min);

    std::size_t open = 0;
    for (double v : height)
        open += v > 0 ? 1 : 0;
    if (open == ui) {
        r.eye_width = 1.0;
    } else {
        std::size_t best = 0, run = 0;
        for (std::size_t k = 0; k < 2 * ui; ++k) {
            run = height[k % ui] > 0 ? run + 1 : 0;
            best = std::max(best, run);
        }
        r.eye_width = static_cast<double>(std::min(best, ui)) / static_cast<double>(ui);
    }

    const auto& ph = h.crossing_phases;
    if (!ph.empty()) {
        double s = 0.0, c = 0.0;
        for (double p : ph) {
            s += std::sin(2.0 * std::numbers::pi * p);
            c += std::cos(2.0 * std::numbers::pi * p);
        }
        const double centre = std::atan2(s, c) / (2.0 * std::numbers::pi);
        double acc = 0.0, acc_sq = 0.0;
        for (double p : ph) {
            double d = p - centre;
            d -= std::round(d);
            acc += d;
            acc_sq += d * d;
        }
        const double n = static_cast<double>(ph.size());
        const double m = acc / n;
        const double var = acc_sq / n - m * m;
        r.rms_jitter = var > 0 ? std::sqrt(var) : 0.0;
    }
    return r;
}

BerResult ber(const BitStream& tx, const BitStream& rx, std::size_t max_lag, std::size_t min_overlap)
{
    BerResult best;
    bool found = false;
    for (std::size_t lag = 0; lag <= max_lag && lag < rx.size(); ++lag) {
        const std::size_t overlap = std::min(tx.size(), rx.size() - lag);
        if (overlap < min_overlap || overlap == 0)
            continue;
        std::size_t errors = 0;
        for (std::size_t i = 0; i < overlap; ++i)
            errors += tx.bits[i] != rx.bits[i + lag];
        const double rate = static_cast<double>(errors) / static_cast<double>(overlap);
        if (!found || rate < best.rate) {
            best = {rate, lag, errors, overlap};
            found = true;
        }
    }
    if (!found)
        throw DataError("bit streams overlap by fewer than " + std::to_string(min_overlap) + " bits");
    return best;
}

std::size_t estimate_latency(const std::vector<double>& reference, const std::vector<double>& signal,
                             std::size_t max_lag)
{
    if (reference.empty() || signal.empty())
        throw DataError("latency estimate needs non-empty sequences");
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v)
            s += x;
        return s / static_cast<double>(v.size());
    };
    const double mr = mean(reference);
    const double ms = mean(signal);
    std::size_t best_lag = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t lag = 0; lag <= max_lag && lag < signal.size(); ++lag) {
        const std::size_t n = std::min(reference.size(), signal.size() - lag);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            acc += (reference[i] - mr) * (signal[i + lag] - ms);
        acc /= static_cast<double>(n);
        if (acc > best) {
            best = acc;
            best_lag = lag;
        }
    }
    return best_lag;
}

std::vector<std::uint8_t> eye_image(const EyeHistogram& h)
{
    const std::uint64_t peak = h.bins.empty() ? 0 : *std::max_element(h.bins.begin(), h.bins.end());
    std::vector<std::uint8_t> px(h.phase_bins * h.amp_bins, 0);
    const double denom = std::log1p(static_cast<double>(peak));
    for (std::size_t row = 0; row < h.amp_bins; ++row) {
        const std::size_t amp = h.amp_bins - 1 - row;
        for (std::size_t col = 0; col < h.phase_bins; ++col) {
            const auto n = h.at(col, amp);
            if (n == 0)
                continue;
            const double level = 1.0 + 254.0 * std::log1p(static_cast<double>(n)) / denom;
            px[row * h.phase_bins + col] = static_cast<std::uint8_t>(std::lround(level));
        }
    }
    return px;
}

void render_eye(const EyeHistogram& h, const std::string& path)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open '" + path + "' for writing");
    const auto px = eye_image(h);
    f << "P5\n" << h.phase_bins << ' ' << h.amp_bins << "\n255\n";
    f.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!f)
        throw IoError("write to '" + path + "' failed");
}

void write_eye_csv(const std::string& path, const EyeHistogram& h)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open '" + path + "' for writing");
    char buf[96];
    std::snprintf(buf, sizeof buf, "# amp_min=%.17g amp_max=%.17g ui_samples=%zu\n", h.amp_min, h.amp_max,
                  h.ui_samples);
    f << buf;
    for (std::size_t amp = h.amp_bins; amp-- > 0;) {
        for (std::size_t p = 0; p < h.phase_bins; ++p) {
            if (p)
                f << ',';
            f << h.at(p, amp);
        }
        f << '\n';
    }
}

void write_eye_reports_csv(std::ostream& out, const std::vector<NamedEyeReport>& rows)
{
    out << "pipeline,eye_height,eye_width,rms_jitter,crossing_level,ber,ber_lag,bit_errors,bits_compared\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g,%.10g,%.10g,%zu,%zu,%zu\n", r.pipeline.c_str(),
                      r.eye.eye_height, r.eye.eye_width, r.eye.rms_jitter, r.eye.crossing_level, r.ber.rate,
                      r.ber.lag, r.ber.errors, r.ber.compared);
        out << buf;
    }
}

void write_eye_reports_csv(const std::string& path, const std::vector<NamedEyeReport>& rows)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open '" + path + "' for writing");
    write_eye_reports_csv(f, rows);
}

}  // namespace lstmeq
