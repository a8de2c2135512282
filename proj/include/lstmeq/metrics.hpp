#pragma once

#include "lstmeq/signal.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace lstmeq {

/// Running moments of the samples on one side of the decision threshold.
struct LevelMoments {
    std::uint64_t count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double v)
    {
        ++count;
        sum += v;
        sum_sq += v * v;
    }
    void merge(const LevelMoments& o)
    {
        count += o.count;
        sum += o.sum;
        sum_sq += o.sum_sq;
    }
    double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
    double stddev() const;
};

/// Eye diagram folded over `span_ui` unit intervals.
///
/// Besides the phase x amplitude occupancy grid it keeps, per phase column,
/// the exact moments of the samples above and below the crossing level, and
/// the phase (in UI) of every crossing, so measurements do not depend on the
/// amplitude binning.
struct EyeHistogram {
    std::size_t ui_samples = 0;  // samples per unit interval
    std::size_t span_ui = 2;
    std::size_t phase_bins = 0;  // ui_samples * span_ui
    std::size_t amp_bins = 0;
    double amp_min = 0.0;
    double amp_max = 0.0;
    std::uint64_t total_count = 0;
    std::vector<std::uint64_t> bins;  // phase-major: bins[phase * amp_bins + amp]
    double crossing_level = 0.0;      // midpoint of the high and low cluster medians
    std::vector<LevelMoments> high;   // per phase column
    std::vector<LevelMoments> low;
    std::vector<double> crossing_phases;  // in [0, 1) UI

    std::uint64_t at(std::size_t phase, std::size_t amp) const { return bins[phase * amp_bins + amp]; }
};

struct EyeReport {
    double eye_height = 0.0;      // volts
    double eye_width = 0.0;       // UI fraction
    double rms_jitter = 0.0;      // UI fraction
    double crossing_level = 0.0;  // volts
};

/// Folds every sample into the eye. The amplitude axis spans the data range
/// padded by 5% on each side.
EyeHistogram accumulate_eye(const Waveform& w, const LinkConfig& cfg, std::size_t phase_offset = 0,
                            std::size_t span_ui = 2, std::size_t amp_bins = 128);

/// Height: best (mu_high - 3 sigma_high) - (mu_low + 3 sigma_low) over phase
/// columns folded to one UI. Width: longest circular run of columns with
/// positive height. Jitter: circular standard deviation of crossing phases.
EyeReport eye_metrics(const EyeHistogram& h);

struct BerResult {
    double rate = 0.0;
    std::size_t lag = 0;
    std::size_t errors = 0;
    std::size_t compared = 0;
};

/// Compares tx[i] with rx[i + lag] and returns the lag in [0, max_lag] with
/// the fewest mismatches (smallest lag on ties).
BerResult ber(const BitStream& tx, const BitStream& rx, std::size_t max_lag,
              std::size_t min_overlap = 100);

/// Lag in [0, max_lag] maximising the covariance of reference[i] and signal[i + lag].
std::size_t estimate_latency(const std::vector<double>& reference, const std::vector<double>& signal,
                             std::size_t max_lag);

/// Binary PGM (P5): width = phase bins, height = amplitude bins with the top
/// row at amp_max. Occupied bins are 1 + 254 * log(1 + n) / log(1 + n_max).
void render_eye(const EyeHistogram& h, const std::string& path);
std::vector<std::uint8_t> eye_image(const EyeHistogram& h);

void write_eye_csv(const std::string& path, const EyeHistogram& h);

struct NamedEyeReport {
    std::string pipeline;
    EyeReport eye;
    BerResult ber;
};

void write_eye_reports_csv(std::ostream& out, const std::vector<NamedEyeReport>& rows);
void write_eye_reports_csv(const std::string& path, const std::vector<NamedEyeReport>& rows);

}  // namespace lstmeq
