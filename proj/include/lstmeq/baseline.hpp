#pragma once

#include "lstmeq/channel.hpp"
#include "lstmeq/signal.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace lstmeq {

/// Feed-forward equalizer cursors. Tap order on the delay line is
/// precursors (farthest first), main, postcursors.
struct FfeTaps {
    std::vector<double> precursors;
    double main = 1.0;
    std::vector<double> postcursors;

    std::vector<double> taps() const;
    void validate() const;
};

/// Decision-feedback taps, one per trailing bit, and the slicer threshold.
///
/// The feedback symbol of a decided bit is +1/2 for a one and -1/2 for a zero,
/// so a tap equal to the postcursor times (high - low) removes that
/// postcursor's pattern dependence for any level pair.
struct DfeTaps {
    std::vector<double> taps;
    double threshold = 0.5;
};

/// FIR with taps `samples_per_cursor` apart. The output is delayed by
/// |precursors| * samples_per_cursor samples relative to the main cursor.
Waveform ffe_apply(const FfeTaps& t, const Waveform& rx, int samples_per_cursor);

struct DfeResult {
    BitStream bits;
    Waveform corrected;  // one value per decision
};

/// Hard-decision DFE over one sample per bit. Decisions before the start of
/// the stream count as zeros.
DfeResult dfe_equalize(const DfeTaps& t, const Waveform& y, const LinkConfig& cfg);

/// Sample index of the main cursor: the middle of the run of samples that
/// share the largest magnitude.
std::size_t main_cursor_index(const std::vector<double>& pulse);

struct FfeFit {
    FfeTaps taps;
    double residual = 0.0;  // sum of squared errors at the cursor positions
    std::size_t main_index = 0;
};

/// Zero-forcing least-squares fit: the equalized pulse sampled every
/// `samples_per_cursor` samples should be 1 at the main cursor and 0 at every
/// other cursor position where it can be nonzero.
FfeFit fit_ffe_taps(const ImpulseResponse& pulse, int n_pre, int n_post, int samples_per_cursor,
                    std::optional<std::size_t> main_index = std::nullopt);

/// Reads the post-cursor tail at whole bit intervals after the main cursor.
/// The threshold is the mid level scaled by the pulse's bit-spaced sum.
DfeTaps fit_dfe_taps(const ImpulseResponse& equalized_pulse, int n_taps, const LinkConfig& cfg,
                     std::optional<std::size_t> main_index = std::nullopt);

/// Channel response to one isolated unit-amplitude bit, starting at the bit's
/// first sample. Channel taps must be at the simulator sample period.
ImpulseResponse pulse_response(const ImpulseResponse& channel, const LinkConfig& cfg,
                               std::size_t tail_bits = 24);

/// A complete FFE + DFE configuration plus where its decisions land.
struct Baseline {
    FfeTaps ffe;
    DfeTaps dfe;
    int samples_per_cursor = 8;
    std::size_t decision_offset = 0;  // sample of bit 0's decision in the FFE output
    double ffe_residual = 0.0;
};

/// Fits FFE then DFE to the channel's pulse response.
Baseline fit_baseline(const ImpulseResponse& channel, const LinkConfig& cfg, int n_pre, int n_post,
                      int n_dfe);

struct BaselineOutput {
    BitStream bits;
    Waveform waveform;  // FFE output with the held DFE correction, full sample rate
    Waveform decisions; // corrected value at each decision
};

BaselineOutput run_baseline(const Baseline& b, const Waveform& rx, const LinkConfig& cfg);

}  // namespace lstmeq
