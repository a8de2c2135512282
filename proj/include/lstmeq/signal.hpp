#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace lstmeq {

/// Ordered logical bits, each 0 or 1.
struct BitStream {
    std::vector<std::uint8_t> bits;

    std::size_t size() const noexcept { return bits.size(); }
    std::uint8_t operator[](std::size_t i) const { return bits[i]; }
};

/// Uniformly sampled analog signal, amplitudes in volts.
struct Waveform {
    std::vector<double> samples;
    double sample_period = 1.0;  // seconds

    std::size_t size() const noexcept { return samples.size(); }
    double operator[](std::size_t i) const { return samples[i]; }
};

/// Physical-layer parameters shared by every stage of the link.
///
/// The equalizer clock ("tick") runs every `delay_resolution` seconds, which
/// must be an integer number of simulator samples that divides a bit.
struct LinkConfig {
    double bit_rate = 50e9;
    int samples_per_bit = 8;
    double high_level = 1.0;
    double low_level = 0.0;
    int rise_samples = 2;
    int fall_samples = 2;
    int delay_depth = 15;
    double delay_resolution = 2.5e-12;
    int sampling_phase = 0;  // sample offset of the first equalizer tick

    double sample_period() const { return 1.0 / (bit_rate * samples_per_bit); }
    double unit_interval() const { return 1.0 / bit_rate; }
    double mid_level() const { return 0.5 * (high_level + low_level); }
    double level(std::uint8_t bit) const { return bit ? high_level : low_level; }

    /// Simulator samples per equalizer tick.
    int tick_stride() const;
    int ticks_per_bit() const { return samples_per_bit / tick_stride(); }

    /// Throws ConfigError when any invariant is violated.
    void validate() const;
};

enum class BitPattern { bernoulli, prbs7, prbs15 };

struct BitSource {
    BitPattern pattern = BitPattern::bernoulli;
    double p = 0.5;  // probability of a one, bernoulli only
};

BitStream generate_bits(std::uint64_t seed, std::size_t count, BitSource kind);

/// NRZ with trapezoidal edges. A transition ramps linearly over the first
/// rise/fall samples of the new bit and reaches the new level on its last
/// ramp sample.
Waveform modulate_nrz(const BitStream& bits, const LinkConfig& cfg);

/// Keeps w[phase_offset + k * period] for every k.
Waveform sample_and_hold(const Waveform& w, std::size_t phase_offset, std::size_t period);

/// Hard decision: 1 iff value >= threshold.
inline std::uint8_t slice(double value, double threshold) { return value >= threshold ? 1 : 0; }

/// Serial-in parallel-out register chain, zero-filled at construction.
class DelayLine {
public:
    explicit DelayLine(std::size_t depth);

    /// Shifts `sample` in and returns the registers, newest first.
    std::span<const double> push(double sample);

    std::span<const double> registers() const { return registers_; }
    std::size_t depth() const noexcept { return registers_.size(); }
    void reset();

private:
    std::vector<double> registers_;
};

// CSV convention: a `# sample_period=<s>` header, then one value per line.
void write_waveform_csv(std::ostream& out, const Waveform& w);
void write_waveform_csv(const std::string& path, const Waveform& w);
Waveform read_waveform_csv(std::istream& in);
Waveform read_waveform_csv(const std::string& path);

void write_bits_csv(std::ostream& out, const BitStream& bits, double bit_period);
void write_bits_csv(const std::string& path, const BitStream& bits, double bit_period);
BitStream read_bits_csv(std::istream& in);
BitStream read_bits_csv(const std::string& path);

}  // namespace lstmeq
