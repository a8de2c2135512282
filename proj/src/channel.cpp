#include "lstmeq/channel.hpp"

#include "lstmeq/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>

namespace lstmeq {

double ImpulseResponse::energy() const
{
    return std::inner_product(taps.begin(), taps.end(), taps.begin(), 0.0);
}

void ImpulseResponse::validate() const
{
    if (taps.empty())
        throw ConfigError("impulse response needs at least one tap");
    if (!(tap_period > 0))
        throw ConfigError("impulse response tap_period must be positive");
    for (double t : taps)
        if (!std::isfinite(t))
            throw ConfigError("impulse response taps must be finite");
    if (!(energy() > 0))
        throw ConfigError("impulse response has zero energy");
}

void SParameterSet::validate() const
{
    const auto n = frequencies.size();
    if (n < 2)
        throw ConfigError("S-parameter set needs at least two frequency points");
    if (s21.size() != n || s11.size() != n)
        throw ConfigError("S-parameter arrays do not match the frequency grid");
    for (std::size_t i = 1; i < n; ++i)
        if (!(frequencies[i] > frequencies[i - 1]))
            throw ConfigError("S-parameter frequencies must be strictly ascending");
}

std::vector<double> fir_filter(std::span<const double> x, std::span<const double> taps)
{
    std::vector<double> y(x.size(), 0.0);
    for (std::size_t k = 0; k < x.size(); ++k) {
        const std::size_t jmax = std::min(k + 1, taps.size());
        double acc = 0.0;
        for (std::size_t j = 0; j < jmax; ++j)
            acc += taps[j] * x[k - j];
        y[k] = acc;
    }
    return y;
}

Waveform apply_channel(const Waveform& w, const ImpulseResponse& h)
{
    h.validate();
    if (std::abs(h.tap_period - w.sample_period) > 1e-9 * w.sample_period)
        throw ConfigError("impulse tap period differs from the waveform sample period; resample first");
    return Waveform{fir_filter(w.samples, h.taps), w.sample_period};
}

Waveform add_awgn(const Waveform& w, double sigma, std::uint64_t seed)
{
    if (!(sigma >= 0) || !std::isfinite(sigma))
        throw ConfigError("noise sigma must be >= 0");
    Waveform out = w;
    if (sigma == 0.0)
        return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& s : out.samples)
        s += noise(rng);
    return out;
}

ImpulseResponse synth_lossy_channel(double decay, int echo_delay_taps, double echo_gain,
                                    int length, double tap_period)
{
    if (!(decay > 0 && decay < 1))
        throw ConfigError("decay must lie in (0, 1)");
    if (!(std::abs(echo_gain) < 1))
        throw ConfigError("|echo_gain| must be < 1");
    if (length < 1)
        throw ConfigError("channel length must be >= 1");
    if (echo_delay_taps < 0)
        throw ConfigError("echo delay must be >= 0");
    if (!(tap_period > 0))
        throw ConfigError("tap_period must be positive");

    ImpulseResponse h;
    h.tap_period = tap_period;
    h.taps.resize(static_cast<std::size_t>(length));
    for (int j = 0; j < length; ++j) {
        double v = (1 - decay) * std::pow(decay, j);
        if (j >= echo_delay_taps)
            v += echo_gain * (1 - decay) * std::pow(decay, j - echo_delay_taps);
        h.taps[static_cast<std::size_t>(j)] = v;
    }
    return h;
}

ImpulseResponse resample_impulse(const ImpulseResponse& h, double new_period)
{
    h.validate();
    if (!(new_period > 0))
        throw ConfigError("resample period must be positive");
    const double ratio = new_period / h.tap_period;  // old taps per new tap
    if (std::abs(ratio - 1.0) < 1e-12)
        return ImpulseResponse{h.taps, new_period};

    // Continuous response: linear between knots j * T, falling to zero at L * T.
    const double span = static_cast<double>(h.taps.size());
    const auto count = static_cast<std::size_t>(std::ceil(span / ratio));
    ImpulseResponse out;
    out.tap_period = new_period;
    out.taps.resize(std::max<std::size_t>(count, 1));
    for (std::size_t m = 0; m < out.taps.size(); ++m) {
        const double x = static_cast<double>(m) * ratio;
        const auto i = static_cast<std::size_t>(std::floor(x));
        const double frac = x - static_cast<double>(i);
        const double a = i < h.taps.size() ? h.taps[i] : 0.0;
        const double b = i + 1 < h.taps.size() ? h.taps[i + 1] : 0.0;
        out.taps[m] = a + (b - a) * frac;
    }
    const double src = std::accumulate(h.taps.begin(), h.taps.end(), 0.0);
    const double dst = std::accumulate(out.taps.begin(), out.taps.end(), 0.0);
    if (dst != 0.0 && src != 0.0) {
        const double scale = src / dst;
        for (auto& t : out.taps)
            t *= scale;
    } else {
        for (auto& t : out.taps)
            t *= ratio;
    }
    return out;
}

std::vector<std::complex<double>> s21_on_grid(const SParameterSet& sp, std::size_t n_fft)
{
    sp.validate();
    if (n_fft < 2 || (n_fft & (n_fft - 1)) != 0 || n_fft < 2 * sp.frequencies.size())
        throw ConfigError("n_fft must be a power of two >= 2 * number of frequency points");

    const std::size_t half = n_fft / 2;
    const double f_max = sp.frequencies.back();
    const double f_lo = sp.frequencies.front();
    const std::complex<double> dc(std::abs(sp.s21.front()), 0.0);

    std::vector<std::complex<double>> grid(half + 1);
    std::size_t seg = 0;
    for (std::size_t k = 0; k <= half; ++k) {
        const double f = f_max * static_cast<double>(k) / static_cast<double>(half);
        if (f <= f_lo) {
            const double t = f_lo > 0 ? f / f_lo : 1.0;
            grid[k] = dc + (sp.s21.front() - dc) * t;
            continue;
        }
        while (seg + 2 < sp.frequencies.size() && f > sp.frequencies[seg + 1])
            ++seg;
        const double f0 = sp.frequencies[seg];
        const double f1 = sp.frequencies[seg + 1];
        const double t = std::clamp((f - f0) / (f1 - f0), 0.0, 1.0);
        grid[k] = sp.s21[seg] + (sp.s21[seg + 1] - sp.s21[seg]) * t;
    }
    return grid;
}

namespace {

struct FftwPlanDeleter {
    void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};

}  // namespace

ImpulseResponse s21_to_impulse(const SParameterSet& sp, std::size_t n_fft, SpectrumWindow window,
                               double energy_fraction)
{
    if (!(energy_fraction > 0 && energy_fraction <= 1))
        throw ConfigError("energy_fraction must lie in (0, 1]");
    auto grid = s21_on_grid(sp, n_fft);
    const std::size_t half = n_fft / 2;

    if (window == SpectrumWindow::hann) {
        for (std::size_t k = 0; k <= half; ++k)
            grid[k] *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(k) /
                                             static_cast<double>(half)));
    }
    // A real sequence has purely real DC and Nyquist bins.
    grid[0] = grid[0].real();
    grid[half] = grid[half].real();

    std::vector<fftw_complex> spec(half + 1);
    for (std::size_t k = 0; k <= half; ++k) {
        spec[k][0] = grid[k].real();
        spec[k][1] = grid[k].imag();
    }
    std::vector<double> time(n_fft);
    std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan(fftw_plan_dft_c2r_1d(
        static_cast<int>(n_fft), spec.data(), time.data(), FFTW_ESTIMATE));
    if (!plan)
        throw ConfigError("FFT planning failed");
    fftw_execute(plan.get());
    const double norm = 1.0 / static_cast<double>(n_fft);
    for (auto& v : time)
        v *= norm;

    ImpulseResponse h;
    h.tap_period = 1.0 / (2.0 * sp.frequencies.back());
    const double total = std::inner_product(time.begin(), time.end(), time.begin(), 0.0);
    std::size_t keep = time.size();
    if (energy_fraction < 1.0 && total > 0) {
        double acc = 0.0;
        for (std::size_t i = 0; i < time.size(); ++i) {
            acc += time[i] * time[i];
            if (acc >= energy_fraction * total) {
                keep = i + 1;
                break;
            }
        }
    }
    h.taps.assign(time.begin(), time.begin() + static_cast<std::ptrdiff_t>(keep));
    return h;
}

void write_impulse_csv(const std::string& path, const ImpulseResponse& h)
{
    write_waveform_csv(path, Waveform{h.taps, h.tap_period});
}

ImpulseResponse read_impulse_csv(const std::string& path)
{
    auto w = read_waveform_csv(path);
    ImpulseResponse h{std::move(w.samples), w.sample_period};
    h.validate();
    return h;
}

}  // namespace lstmeq
