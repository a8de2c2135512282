#include "support/property.hpp"

#include "lstmeq/baseline.hpp"
#include "lstmeq/error.hpp"
#include "lstmeq/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lstmeq;

namespace {

// One sample per bit, so pulses and decisions share the UI grid.
LinkConfig ui_link()
{
    LinkConfig c;
    c.samples_per_bit = 2;
    c.rise_samples = 0;
    c.fall_samples = 0;
    c.delay_resolution = c.sample_period();
    return c;
}

}  // namespace

TEST(FfeApply, IdentityAndImpulse)
{
    prop::Gen g(1);
    const Waveform rx{g.vec(50, -1, 1), 1.0};
    EXPECT_EQ(ffe_apply(FfeTaps{{}, 1.0, {}}, rx, 4).samples, rx.samples);

    const FfeTaps t{{-0.2}, 1.5, {0.3, -0.1}};
    EXPECT_EQ(t.taps(), (std::vector<double>{-0.2, 1.5, 0.3, -0.1}));
    Waveform impulse{std::vector<double>(12, 0.0), 1.0};
    impulse.samples[0] = 1.0;
    const auto out = ffe_apply(t, impulse, 3);
    const std::vector<double> expect{-0.2, 0, 0, 1.5, 0, 0, 0.3, 0, 0, -0.1, 0, 0};
    EXPECT_EQ(out.samples, expect);
    EXPECT_THROW(ffe_apply(t, impulse, 0), ConfigError);
    EXPECT_THROW(ffe_apply(FfeTaps{{}, 0.0, {}}, impulse, 1), ConfigError);
}

TEST(DfeEqualize, CancelsOnePostcursor)
{
    const auto cfg = ui_link();
    for (double a : {0.2, 0.45, -0.3}) {
        prop::Gen g(7);
        const auto bits = g.bits(400);
        Waveform y{std::vector<double>(bits.size()), cfg.unit_interval()};
        for (std::size_t k = 0; k < bits.size(); ++k)
            y.samples[k] = bits[k] + (k ? a * bits[k - 1] : 0.0);
        const auto d = fit_dfe_taps(ImpulseResponse{{1.0, a}, cfg.unit_interval()}, 1, cfg);
        ASSERT_EQ(d.taps.size(), 1u);
        EXPECT_DOUBLE_EQ(d.taps[0], a);
        EXPECT_DOUBLE_EQ(d.threshold, 0.5 * (1 + a));
        const auto r = dfe_equalize(d, y, cfg);
        EXPECT_EQ(r.bits.bits, bits.bits) << "a=" << a;
        for (std::size_t k = 0; k < bits.size(); ++k)
            EXPECT_NEAR(r.corrected[k], bits[k] + a / 2, 1e-12);
    }
}

TEST(DfeEqualize, NoTapsIsPlainSlicer)
{
    const auto cfg = ui_link();
    const Waveform y{{0.1, 0.6, 0.5, 0.49}, cfg.unit_interval()};
    const auto r = dfe_equalize(DfeTaps{{}, 0.5}, y, cfg);
    EXPECT_EQ(r.bits.bits, (std::vector<std::uint8_t>{0, 1, 1, 0}));
    EXPECT_EQ(r.corrected.samples, y.samples);
}

TEST(FitDfeTaps, ReadsBitSpacedTail)
{
    const auto cfg = ui_link();
    const auto d = fit_dfe_taps(ImpulseResponse{{1.0, 0.3, 0.1}, cfg.unit_interval()}, 2, cfg);
    EXPECT_EQ(d.taps, (std::vector<double>{0.3, 0.1}));
    EXPECT_DOUBLE_EQ(d.threshold, 0.5 * 1.4);

    // Oversampled pulse: taps come from whole bit intervals after the cursor.
    LinkConfig c4;
    c4.samples_per_bit = 4;
    c4.high_level = 1.0;
    c4.low_level = -1.0;
    c4.delay_resolution = c4.sample_period();
    const ImpulseResponse p{{0.1, 0.5, 1.0, 0.6, 0.4, 0.3, 0.25, 0.2, 0.1, 0.05, 0, 0}, c4.sample_period()};
    const auto d4 = fit_dfe_taps(p, 2, c4);
    EXPECT_EQ(d4.taps, (std::vector<double>{0.25 * 2, 0.0}));
    EXPECT_DOUBLE_EQ(d4.threshold, 0.0);

    EXPECT_THROW(fit_dfe_taps(ImpulseResponse{{1.0, 0.3}, cfg.unit_interval()}, 3, cfg), FitError);
    EXPECT_THROW(fit_dfe_taps(ImpulseResponse{{1.0, 0.3}, 0.7 * cfg.unit_interval()}, 1, cfg), FitError);
    EXPECT_THROW(fit_dfe_taps(ImpulseResponse{{1.0, 0.3}, cfg.unit_interval()}, -1, cfg), ConfigError);
}

TEST(MainCursor, LargestMagnitudeRunCentre)
{
    EXPECT_EQ(main_cursor_index({0, 1, 1, 1, 0}), 2u);
    EXPECT_EQ(main_cursor_index({0, -3, 1}), 1u);
    EXPECT_EQ(main_cursor_index({0.2, 0.9, 0.9, 0.1}), 1u);
    EXPECT_THROW(main_cursor_index({}), FitError);
}

TEST(FitFfe, DelayedImpulseGivesIdentity)
{
    const ImpulseResponse pulse{{0, 0, 0, 2.0, 0, 0, 0, 0, 0, 0, 0, 0}, 1.0};
    const auto fit = fit_ffe_taps(pulse, 1, 2, 3);
    EXPECT_EQ(fit.main_index, 3u);
    EXPECT_NEAR(fit.taps.main, 0.5, 1e-12);
    for (double v : fit.taps.precursors)
        EXPECT_NEAR(v, 0.0, 1e-12);
    for (double v : fit.taps.postcursors)
        EXPECT_NEAR(v, 0.0, 1e-12);
    EXPECT_NEAR(fit.residual, 0.0, 1e-20);
}

TEST(FitFfe, ResidualShrinksWithMoreTaps)
{
    // Bit-spaced pulse with one postcursor: the inverse is a geometric series.
    std::vector<double> p(40, 0.0);
    p[5] = 1.0;
    p[6] = 0.5;
    const ImpulseResponse pulse{p, 1.0};
    double previous = std::numeric_limits<double>::infinity();
    for (int post = 0; post <= 6; ++post) {
        const auto fit = fit_ffe_taps(pulse, 0, post, 1);
        EXPECT_LE(fit.residual, previous + 1e-15) << post;
        previous = fit.residual;
    }
    const auto fit = fit_ffe_taps(pulse, 0, 6, 1);
    const auto eq = ffe_apply(fit.taps, Waveform{p, 1.0}, 1);
    EXPECT_NEAR(eq[5], 1.0, 0.02);
    for (std::size_t k = 6; k < 12; ++k)
        EXPECT_NEAR(eq[k], 0.0, 0.02) << k;
    EXPECT_LT(previous, 1e-3);
}

TEST(FitFfe, Errors)
{
    const ImpulseResponse pulse{{0, 1.0, 0.2}, 1.0};
    EXPECT_THROW(fit_ffe_taps(pulse, -1, 1, 1), ConfigError);
    EXPECT_THROW(fit_ffe_taps(pulse, 1, 1, 0), ConfigError);
    EXPECT_THROW(fit_ffe_taps(pulse, 1, 1, 1, 9), FitError);
    EXPECT_THROW(fit_ffe_taps(ImpulseResponse{{0, 0, 0}, 1.0}, 1, 1, 1), ConfigError);
}

TEST(PulseResponse, IdentityChannelIsOneBit)
{
    LinkConfig cfg;
    cfg.high_level = 0.8;
    cfg.low_level = -0.8;
    cfg.rise_samples = 0;
    cfg.fall_samples = 0;
    const auto p = pulse_response(ImpulseResponse{{1.0}, cfg.sample_period()}, cfg, 4);
    ASSERT_GE(p.taps.size(), 16u);
    for (std::size_t i = 0; i < p.taps.size(); ++i)
        EXPECT_EQ(p.taps[i], i < 8 ? 1.0 : 0.0) << i;
    EXPECT_DOUBLE_EQ(p.tap_period, cfg.sample_period());
}

TEST(FitBaseline, IdentityChannelRecoversBits)
{
    LinkConfig cfg;
    const ImpulseResponse channel{{1.0}, cfg.sample_period()};
    const auto b = fit_baseline(channel, cfg, 2, 4, 6);
    EXPECT_NEAR(b.ffe.main, 1.0, 1e-9);
    for (double v : b.dfe.taps)
        EXPECT_NEAR(v, 0.0, 1e-9);
    EXPECT_NEAR(b.dfe.threshold, cfg.mid_level(), 1e-9);
    const auto tx = generate_bits(3, 300, {});
    const auto out = run_baseline(b, modulate_nrz(tx, cfg), cfg);
    const auto r = ber(tx, out.bits, 4);
    EXPECT_EQ(r.errors, 0u);
    EXPECT_EQ(out.waveform.size(), tx.size() * 8);
}

TEST(FitBaseline, LossyChannelNoiseFree)
{
    LinkConfig cfg;
    const auto channel = resample_impulse(synth_lossy_channel(0.6, 0, 0.0, 16, cfg.unit_interval()), cfg.sample_period());
    const auto b = fit_baseline(channel, cfg, 2, 4, 6);
    const auto tx = generate_bits(5, 2000, {});
    const auto rx = apply_channel(modulate_nrz(tx, cfg), channel);
    const auto out = run_baseline(b, rx, cfg);
    const auto r = ber(tx, out.bits, 4);
    EXPECT_EQ(r.errors, 0u);
    // The same pipeline is a pure function of its inputs.
    EXPECT_EQ(run_baseline(b, rx, cfg).waveform.samples, out.waveform.samples);
}
