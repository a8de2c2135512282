#pragma once

#include "lstmeq/signal.hpp"

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace lstmeq {

/// Discrete-time channel impulse response.
struct ImpulseResponse {
    std::vector<double> taps;
    double tap_period = 1.0;  // seconds

    double energy() const;
    void validate() const;
};

/// Two-port S-parameters on a strictly ascending frequency grid.
struct SParameterSet {
    std::vector<double> frequencies;  // Hz
    std::vector<std::complex<double>> s11;
    std::vector<std::complex<double>> s21;
    std::vector<std::complex<double>> s12;
    std::vector<std::complex<double>> s22;
    double reference_impedance = 50.0;

    void validate() const;
};

/// Causal zero-padded convolution, output length equals input length.
std::vector<double> fir_filter(std::span<const double> x, std::span<const double> taps);

/// Convolves w with h. Periods must agree to 1e-9 relative.
Waveform apply_channel(const Waveform& w, const ImpulseResponse& h);

Waveform add_awgn(const Waveform& w, double sigma, std::uint64_t seed);

/// Exponential loss plus a single delayed reflection:
/// taps[j] = (1-d) d^j + g (1-d) d^(j-D) for j >= D.
ImpulseResponse synth_lossy_channel(double decay, int echo_delay_taps, double echo_gain,
                                    int length, double tap_period);

/// Re-grids h onto `new_period` by piecewise-linear interpolation of the
/// continuous response; the result's tap sum equals the input's (DC gain kept).
ImpulseResponse resample_impulse(const ImpulseResponse& h, double new_period);

/// Touchstone v1 two-port (.s2p) reader. Throws ParseError with a line number.
SParameterSet parse_touchstone(std::istream& in);
SParameterSet parse_touchstone_file(const std::string& path);

enum class SpectrumWindow { none, hann };

/// Inverse-DFT of S21 onto a real impulse with tap_period = 1 / (2 f_max).
/// Taps are cut at the shortest prefix holding `energy_fraction` of the energy;
/// pass 1.0 to keep all n_fft taps.
ImpulseResponse s21_to_impulse(const SParameterSet& sp, std::size_t n_fft, SpectrumWindow window,
                               double energy_fraction = 0.999);

/// S21 interpolated onto bins k = 0..n_fft/2 of the uniform grid used by s21_to_impulse.
std::vector<std::complex<double>> s21_on_grid(const SParameterSet& sp, std::size_t n_fft);

void write_impulse_csv(const std::string& path, const ImpulseResponse& h);
ImpulseResponse read_impulse_csv(const std::string& path);

}  // namespace lstmeq
