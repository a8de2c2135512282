#include "support/oracles.hpp"
#include "support/property.hpp"

#include "lstmeq/error.hpp"
#include "lstmeq/lstm.hpp"
#include "lstmeq/model_io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lstmeq;

TEST(CellStep, ZeroParameters)
{
    const auto p = GateParams::zeros(3, 2);
    const auto s = cell_step(p, std::vector<double>{0.3, -1, 2}, CellState::zeros(2));
    EXPECT_EQ(s.h, (std::vector<double>{0, 0}));
    EXPECT_EQ(s.c, (std::vector<double>{0, 0}));
}

TEST(CellStep, HandEvaluated)
{
    const auto p = GateParams::zeros(1, 1);
    const CellState prev{{0.0}, {1.0}};
    const auto s = cell_step(p, std::vector<double>{0.7}, prev);
    EXPECT_DOUBLE_EQ(s.c[0], 0.5);
    EXPECT_NEAR(s.h[0], 0.2310586, 1e-7);
    EXPECT_EQ(prev.c[0], 1.0);  // input state untouched
}

TEST(CellStep, SaturatedForgetGateHoldsCell)
{
    auto p = GateParams::zeros(1, 1);
    p.b[forget][0] = 20;
    p.b[input][0] = 20;
    p.b[output][0] = 20;
    const auto s = cell_step(p, std::vector<double>{0.4}, CellState{{0.1}, {0.8}});
    EXPECT_NEAR(s.c[0], 0.8, 1e-8);
}

TEST(CellStep, ShapeErrors)
{
    const auto p = GateParams::zeros(3, 2);
    EXPECT_THROW(cell_step(p, std::vector<double>{1, 2}, CellState::zeros(2)), ShapeError);
    EXPECT_THROW(cell_step(p, std::vector<double>{1, 2, 3}, CellState::zeros(3)), ShapeError);
}

TEST(StackForward, ZeroModelOutputsHalf)
{
    const auto m = LstmStack::zeros(4, {3});
    const auto out = stack_forward(m, std::vector<double>{1, 2, 3, 4}, m.zero_states());
    EXPECT_EQ(out.y, 0.5);
}

TEST(StackForward, RateZeroMaskIsIdentityAndDeterministic)
{
    prop::Gen g(5);
    auto m = g.model(3, {4, 2});
    const std::vector<double> x{0.1, -0.2, 0.3};
    const auto infer = stack_forward(m, x, m.zero_states());
    const std::vector<DropoutMask> masks{make_dropout_mask(0.0, 4, 1)};
    const auto train = stack_forward(m, x, m.zero_states(), masks);
    EXPECT_EQ(infer.y, train.y);
    EXPECT_EQ(stack_forward(m, x, m.zero_states()).y, infer.y);
    // Manual composition of the two layers.
    const auto s0 = cell_step(m.layers[0], x, CellState::zeros(4));
    const auto s1 = cell_step(m.layers[1], s0.h, CellState::zeros(2));
    EXPECT_DOUBLE_EQ(infer.y, sigmoid(m.fc_b + m.fc_w[0] * s1.h[0] + m.fc_w[1] * s1.h[1]));
    EXPECT_THROW(stack_forward(m, x, {CellState::zeros(4)}), ShapeError);
}

TEST(StackForward, MaskDropsAndScales)
{
    prop::Gen g(6);
    auto m = g.model(2, {3, 1});
    DropoutMask mask{{1, 0, 1}, 2.0};
    const std::vector<double> x{0.5, -0.5};
    const auto s0 = cell_step(m.layers[0], x, CellState::zeros(3));
    const std::vector<double> fed{s0.h[0] * 2.0, 0.0, s0.h[2] * 2.0};
    const auto s1 = cell_step(m.layers[1], fed, CellState::zeros(1));
    const auto out = stack_forward(m, x, m.zero_states(), std::vector<DropoutMask>{mask});
    EXPECT_DOUBLE_EQ(out.y, sigmoid(m.fc_b + m.fc_w[0] * s1.h[0]));
}

TEST(Dropout, Masks)
{
    const auto none = make_dropout_mask(0.0, 100, 3);
    EXPECT_EQ(none.scale, 1.0);
    for (auto k : none.keep)
        EXPECT_EQ(k, 1);
    const auto half = make_dropout_mask(0.5, 100000, 3);
    EXPECT_EQ(half.scale, 2.0);
    double dropped = 0;
    for (auto k : half.keep)
        dropped += k == 0;
    EXPECT_GE(dropped / 1e5, 0.495);
    EXPECT_LE(dropped / 1e5, 0.505);
    EXPECT_EQ(make_dropout_mask(0.5, 100, 3).keep, make_dropout_mask(0.5, 100, 3).keep);
    EXPECT_THROW(make_dropout_mask(1.0, 3, 1), ConfigError);
}

TEST(PostFilter, Examples)
{
    const Waveform w{{1, 1, 1}, 1.0};
    EXPECT_EQ(fir_postfilter(w, std::vector<double>{1.0}).samples, w.samples);
    EXPECT_EQ(fir_postfilter(w, std::vector<double>{0.5, 0.5}).samples, (std::vector<double>{0.5, 1, 1}));
    const Waveform c{std::vector<double>(20, 0.7), 1.0};
    const auto out = fir_postfilter(c, std::vector<double>{0.25, 0.25, 0.25, 0.25});
    for (std::size_t i = 3; i < out.size(); ++i)
        EXPECT_NEAR(out[i], 0.7, 1e-15);
    EXPECT_THROW(fir_postfilter(w, std::vector<double>{}), ConfigError);
}

TEST(PostFilter, DefaultIsHalfBitMovingAverage)
{
    LinkConfig cfg;
    const auto taps = default_post_fir(cfg);
    EXPECT_EQ(taps, std::vector<double>(4, 0.25));
    cfg.samples_per_bit = 2;
    cfg.delay_resolution = cfg.sample_period() * 2;
    EXPECT_EQ(default_post_fir(cfg), std::vector<double>{1.0});
}

TEST(EqualizeStream, ZeroModelIsConstantHalf)
{
    LinkConfig cfg;
    cfg.delay_depth = 5;
    auto m = LstmStack::zeros(5, {3});
    m.post_fir = {1.0};
    Waveform rx{std::vector<double>(64, 0.3), cfg.sample_period()};
    const auto eq = equalize_stream(m, rx, cfg);
    for (double v : eq.analog.samples)
        EXPECT_EQ(v, 0.5);
    ASSERT_EQ(eq.bits.size(), 8u);
    for (auto b : eq.bits.bits)
        EXPECT_EQ(b, 1);
}

TEST(EqualizeStream, WidthMismatchIsShapeError)
{
    LinkConfig cfg;
    cfg.delay_depth = 6;
    const auto m = LstmStack::zeros(5, {3});
    EXPECT_THROW(equalize_stream(m, Waveform{std::vector<double>(16, 0.0), cfg.sample_period()}, cfg), ShapeError);
}

TEST(EqualizeStream, MatchesUnrolledOracle)
{
    prop::Gen g(17);
    LinkConfig cfg;
    cfg.delay_depth = 7;
    auto m = g.model(7, {6, 3});
    Waveform rx{g.vec(2000, -0.5, 1.5), cfg.sample_period()};
    const auto eq = equalize_stream(m, rx, cfg);
    const auto ref = oracle::unrolled_equalizer(m, rx.samples, 7);
    ASSERT_EQ(eq.analog.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i)
        ASSERT_NEAR(eq.analog[i], ref[i], 1e-12) << i;
}

TEST(EqualizeStream, CoarseTicksAndBitCenters)
{
    LinkConfig cfg;
    cfg.delay_resolution = 2 * cfg.sample_period();  // 4 ticks per bit
    cfg.sampling_phase = 1;
    EXPECT_EQ(bit_center_ticks(cfg, 3), (std::vector<std::size_t>{1, 5, 9}));
    prop::Gen g(2);
    auto m = g.model(static_cast<std::size_t>(cfg.delay_depth), {4});
    Waveform rx{g.vec(80, 0, 1), cfg.sample_period()};
    const auto eq = equalize_stream(m, rx, cfg);
    const auto ticks = sample_and_hold(rx, 1, 2);
    EXPECT_EQ(eq.analog.size(), ticks.size());
    const auto ref = oracle::unrolled_equalizer(m, ticks.samples, 15);
    for (std::size_t i = 0; i < ref.size(); ++i)
        ASSERT_NEAR(eq.analog[i], ref[i], 1e-12) << i;
    EXPECT_DOUBLE_EQ(eq.analog.sample_period, 2 * cfg.sample_period());
}

TEST(StreamingEqualizer, StepMatchesBatch)
{
    prop::Gen g(8);
    LinkConfig cfg;
    cfg.delay_depth = 4;
    auto m = g.model(4, {3});
    Waveform rx{g.vec(100, 0, 1), cfg.sample_period()};
    const auto batch = equalize_stream(m, rx, cfg);
    StreamingEqualizer eq(m, 4);
    for (std::size_t i = 0; i < rx.size(); ++i)
        ASSERT_EQ(eq.step(rx[i]), batch.analog[i]);
    eq.reset();
    EXPECT_EQ(eq.step(rx[0]), batch.analog[0]);
}

TEST(ModelRom, RoundTripIsBitIdentical)
{
    prop::Gen g(9);
    auto m = g.model(5, {4, 3}, 3.0);
    m.dropout_rate = 0.2;
    m.fc_b = 1.0 / 3.0;
    const auto path = (std::filesystem::temp_directory_path() / "lstmeq_rom_test.txt").string();
    save_model(path, m);
    const auto back = load_model(path);
    EXPECT_TRUE(back == m);
    LinkConfig cfg;
    cfg.delay_depth = 5;
    Waveform rx{g.vec(300, 0, 1), cfg.sample_period()};
    EXPECT_EQ(equalize_stream(back, rx, cfg).analog.samples, equalize_stream(m, rx, cfg).analog.samples);
    std::filesystem::remove(path);
}

TEST(ModelRom, TruncatedFileFails)
{
    prop::Gen g(10);
    const auto m = g.model(3, {2});
    std::stringstream ss;
    save_model(ss, m);
    const auto text = ss.str();
    for (std::size_t cut : {text.size() / 4, text.size() / 2, text.size() - 5}) {
        std::istringstream is(text.substr(0, cut));
        EXPECT_THROW(load_model(is), ParseError) << "cut at " << cut;
    }
}

TEST(ModelRom, VersionMismatch)
{
    std::stringstream ss;
    save_model(ss, LstmStack::zeros(2, {2}));
    auto text = ss.str();
    text.replace(text.find("version 1"), 9, "version 7");
    std::istringstream is(text);
    EXPECT_THROW(load_model(is), UnsupportedVersionError);
}

TEST(ModelRom, BadMagicAndTrailingGarbage)
{
    std::istringstream bad("not-a-rom\n");
    EXPECT_THROW(load_model(bad), ParseError);
    std::stringstream ss;
    save_model(ss, LstmStack::zeros(2, {2}));
    std::istringstream extra(ss.str() + "junk\n");
    EXPECT_THROW(load_model(extra), ParseError);
    EXPECT_THROW(load_model(std::string("/nonexistent/model.rom")), IoError);
}
