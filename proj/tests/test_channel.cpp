#include "support/oracles.hpp"

#include "lstmeq/channel.hpp"
#include "lstmeq/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

using namespace lstmeq;

namespace {

SParameterSet parse(const std::string& text)
{
    std::istringstream is(text);
    return parse_touchstone(is);
}

SParameterSet flat_s21(std::complex<double> value, std::size_t points, double f_max)
{
    SParameterSet sp;
    for (std::size_t k = 1; k <= points; ++k) {
        sp.frequencies.push_back(f_max * static_cast<double>(k) / static_cast<double>(points));
        sp.s21.push_back(value);
        sp.s11.push_back(0.0);
        sp.s12.push_back(0.0);
        sp.s22.push_back(0.0);
    }
    return sp;
}

}  // namespace

TEST(ApplyChannel, Examples)
{
    const Waveform w{{1, 0, 0}, 1.0};
    EXPECT_EQ(apply_channel(w, {{1.0}, 1.0}).samples, w.samples);
    EXPECT_EQ(apply_channel(w, {{0.5, 0.5}, 1.0}).samples, (std::vector<double>{0.5, 0.5, 0}));
    const Waveform imp{{1, 0, 0, 0, 0}, 1.0};
    EXPECT_EQ(apply_channel(imp, {{0.3, -0.2, 0.1}, 1.0}).samples, (std::vector<double>{0.3, -0.2, 0.1, 0, 0}));
    EXPECT_THROW(apply_channel(w, {{1.0}, 2.0}), ConfigError);
}

TEST(Awgn, SigmaZeroAndStatistics)
{
    const Waveform z{std::vector<double>(100000, 0.0), 1.0};
    EXPECT_EQ(add_awgn(z, 0.0, 9).samples, z.samples);
    const auto n = add_awgn(z, 0.1, 9);
    const double mean = std::accumulate(n.samples.begin(), n.samples.end(), 0.0) / 1e5;
    double var = 0;
    for (double v : n.samples)
        var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / (1e5 - 1));
    EXPECT_GE(sd, 0.097);
    EXPECT_LE(sd, 0.103);
    EXPECT_EQ(add_awgn(z, 0.1, 9).samples, n.samples);
    EXPECT_NE(add_awgn(z, 0.1, 10).samples, n.samples);
    EXPECT_THROW(add_awgn(z, -1.0, 1), ConfigError);
}

TEST(SynthChannel, ClosedForm)
{
    const auto a = synth_lossy_channel(0.5, 0, 0.0, 3, 1.0);
    EXPECT_EQ(a.taps, (std::vector<double>{0.5, 0.25, 0.125}));
    const auto b = synth_lossy_channel(0.5, 2, 0.2, 3, 1.0);
    ASSERT_EQ(b.taps.size(), 3u);
    EXPECT_DOUBLE_EQ(b.taps[0], 0.5);
    EXPECT_DOUBLE_EQ(b.taps[1], 0.25);
    EXPECT_DOUBLE_EQ(b.taps[2], 0.125 + 0.1);
    const auto c = synth_lossy_channel(1e-9, 0, 0.0, 4, 1.0);
    EXPECT_NEAR(c.taps[0], 1.0, 1e-8);
    EXPECT_NEAR(c.taps[1], 0.0, 1e-8);
    EXPECT_THROW(synth_lossy_channel(1.0, 0, 0, 3, 1), ConfigError);
    EXPECT_THROW(synth_lossy_channel(0.5, 0, 1.0, 3, 1), ConfigError);
    EXPECT_THROW(synth_lossy_channel(0.5, 0, 0, 0, 1), ConfigError);
}

TEST(ResampleImpulse, KeepsDcGainAndShape)
{
    const ImpulseResponse ui{{0.5, 0.25, 0.125}, 8.0};
    const auto fine = resample_impulse(ui, 1.0);
    EXPECT_EQ(fine.taps.size(), 24u);
    EXPECT_NEAR(std::accumulate(fine.taps.begin(), fine.taps.end(), 0.0), 0.875, 1e-12);
    // Linear between knots: the midpoint of the first segment is the knot average.
    EXPECT_NEAR(fine.taps[4] / fine.taps[0], 0.75, 1e-12);
    EXPECT_EQ(resample_impulse(ui, 8.0).taps, ui.taps);
}

TEST(Touchstone, Examples)
{
    const auto a = parse("# GHz S MA R 50\n1 1 0 1 0 1 0 1 0\n");
    ASSERT_EQ(a.frequencies.size(), 1u);
    EXPECT_EQ(a.frequencies[0], 1e9);
    for (const auto* v : {&a.s11, &a.s21, &a.s12, &a.s22})
        EXPECT_EQ((*v)[0], std::complex<double>(1, 0));
    const auto b = parse("# Hz S RI R 50\n2 0 0 0.5 -0.5 0 0 0 0\n");
    EXPECT_EQ(b.frequencies[0], 2.0);
    EXPECT_EQ(b.s21[0], std::complex<double>(0.5, -0.5));
    const auto c = parse("# GHz S DB R 50\n1 0 0 -6.0206 0 0 0 0 0\n");
    EXPECT_NEAR(std::abs(c.s21[0]), 0.5, 1e-5);
}

TEST(Touchstone, CommentsUnitsWrapsAndImpedance)
{
    const auto sp = parse("! header comment\n# MHz S MA R 75 ! trailing\n"
                          "100 1 0 0.5 90\n  0.5 90 1 0\n"
                          "200 1 0 0.25 -90 0.25 -90 1 0 ! row comment\n");
    ASSERT_EQ(sp.frequencies.size(), 2u);
    EXPECT_EQ(sp.frequencies[1], 200e6);
    EXPECT_EQ(sp.reference_impedance, 75.0);
    EXPECT_NEAR(sp.s21[0].imag(), 0.5, 1e-15);
    EXPECT_NEAR(sp.s21[1].imag(), -0.25, 1e-15);
    const auto defaults = parse("1 1 0 1 0 1 0 1 0\n");
    EXPECT_EQ(defaults.frequencies[0], 1e9);
    EXPECT_EQ(defaults.reference_impedance, 50.0);
}

TEST(Touchstone, ErrorsCarryLineNumbers)
{
    auto line_of = [](const std::string& text) -> std::size_t {
        try {
            parse(text);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    EXPECT_EQ(line_of("# GHz S MA R 50\n1 1 0 x 0 1 0 1 0\n"), 2u);
    EXPECT_EQ(line_of("# GHz S MA R 50\n2 1 0 1 0 1 0 1 0\n1 1 0 1 0 1 0 1 0\n"), 3u);
    EXPECT_EQ(line_of("! c\n# GHz Y MA R 50\n"), 2u);
    EXPECT_EQ(line_of("# GHz S XX R 50\n"), 1u);
    EXPECT_THROW(parse("# GHz S MA R 50\n1 1 0 1 0\n"), ParseError);
    EXPECT_THROW(parse("! nothing\n"), ParseError);
}

TEST(Touchstone, FormatEquivalence)
{
    SParameterSet sp;
    sp.frequencies = {1e8, 5e9, 2.5e10};
    sp.s11 = {std::polar(0.1, 0.3), std::polar(0.2, -1.0), std::polar(0.05, 2.9)};
    sp.s21 = {std::polar(0.99, -0.1), std::polar(0.6, -2.0), std::polar(0.1, 3.0)};
    sp.s12 = sp.s21;
    sp.s22 = sp.s11;
    std::vector<SParameterSet> all;
    for (auto f : {oracle::SFormat::ma, oracle::SFormat::ri, oracle::SFormat::db})
        all.push_back(parse(oracle::touchstone_text(sp, f)));
    for (std::size_t k = 0; k < 3; ++k)
        for (const auto& p : all)
            EXPECT_LE(std::abs(p.s21[k] - sp.s21[k]), 1e-9 * std::abs(sp.s21[k]));
}

TEST(Touchstone, MissingFileNamesPath)
{
    try {
        parse_touchstone_file("/nonexistent/channel.s2p");
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/channel.s2p"), std::string::npos);
    }
}

TEST(S21ToImpulse, FlatSpectra)
{
    for (double g : {1.0, 0.5}) {
        const auto sp = flat_s21(g, 64, 50e9);
        const auto h = s21_to_impulse(sp, 256, SpectrumWindow::none, 1.0);
        ASSERT_EQ(h.taps.size(), 256u);
        EXPECT_NEAR(h.taps[0], g, 1e-12);
        for (std::size_t i = 1; i < h.taps.size(); ++i)
            EXPECT_LT(std::abs(h.taps[i]), 1e-6) << i;
        EXPECT_DOUBLE_EQ(h.tap_period, 1.0 / (2 * 50e9));
        const auto cut = s21_to_impulse(sp, 256, SpectrumWindow::none);
        EXPECT_EQ(cut.taps.size(), 1u);
    }
}

TEST(S21ToImpulse, OnePoleMatchesExponential)
{
    // H(f) = 1 / (1 + j f / fc) sampled on the transform grid; its impulse is
    // (1/tau) exp(-t/tau) with tau = 1/(2 pi fc), sampled at T and scaled by T.
    const double f_max = 1000e9, fc = 1e9;
    const std::size_t n_fft = 1 << 16, half = n_fft / 2;
    SParameterSet sp;
    for (std::size_t k = 1; k <= half; ++k) {
        const double f = f_max * static_cast<double>(k) / static_cast<double>(half);
        sp.frequencies.push_back(f);
        sp.s21.push_back(1.0 / std::complex<double>(1.0, f / fc));
        sp.s11.push_back(0.0);
        sp.s12.push_back(0.0);
        sp.s22.push_back(0.0);
    }
    const auto h = s21_to_impulse(sp, n_fft, SpectrumWindow::none, 1.0);
    const double T = h.tap_period, tau = 1.0 / (2 * std::numbers::pi * fc);
    double err = 0, ref = 0;
    const std::size_t span = static_cast<std::size_t>(5 * tau / T);
    for (std::size_t i = 1; i < span; ++i) {
        const double expect = T / tau * std::exp(-static_cast<double>(i) * T / tau);
        err += (h.taps[i] - expect) * (h.taps[i] - expect);
        ref += expect * expect;
    }
    EXPECT_LT(std::sqrt(err / ref), 0.01) << std::sqrt(err / ref);
}

TEST(S21ToImpulse, RoundTripAgainstNaiveDft)
{
    SParameterSet sp;
    sp.frequencies = {1e9, 10e9, 20e9, 40e9};
    sp.s21 = {std::polar(0.95, -0.3), std::polar(0.7, -2.0), std::polar(0.4, -3.5), std::polar(0.1, -6.0)};
    sp.s11 = sp.s12 = sp.s22 = std::vector<std::complex<double>>(4, 0.0);
    const std::size_t n_fft = 128;
    const auto h = s21_to_impulse(sp, n_fft, SpectrumWindow::none, 1.0);
    auto grid = s21_on_grid(sp, n_fft);
    grid[0] = grid[0].real();
    grid[n_fft / 2] = grid[n_fft / 2].real();
    const auto spec = oracle::dft(h.taps);
    double err = 0;
    for (std::size_t k = 0; k <= n_fft / 2; ++k)
        err += std::norm(spec[k] - grid[k]);
    EXPECT_LT(std::sqrt(err / (n_fft / 2 + 1)), 1e-6);
    EXPECT_NEAR(grid[0].real(), 0.95, 1e-15);  // magnitude-held DC with zero phase
}

TEST(S21ToImpulse, Errors)
{
    const auto sp = flat_s21(1.0, 64, 50e9);
    EXPECT_THROW(s21_to_impulse(sp, 100, SpectrumWindow::none), ConfigError);
    EXPECT_THROW(s21_to_impulse(sp, 64, SpectrumWindow::none), ConfigError);
    auto one = flat_s21(1.0, 1, 50e9);
    EXPECT_THROW(s21_to_impulse(one, 64, SpectrumWindow::none), ConfigError);
}

TEST(ImpulseCsv, RoundTrip)
{
    const auto path = (std::filesystem::temp_directory_path() / "lstmeq_impulse_test.csv").string();
    const ImpulseResponse h{{0.25, 0.5, -0.125}, 2.5e-12};
    write_impulse_csv(path, h);
    const auto back = read_impulse_csv(path);
    EXPECT_EQ(back.taps, h.taps);
    EXPECT_EQ(back.tap_period, h.tap_period);
    std::filesystem::remove(path);
    EXPECT_THROW(read_impulse_csv(path), IoError);
}
