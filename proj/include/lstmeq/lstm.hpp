#pragma once

#include "lstmeq/signal.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lstmeq {

/// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

/// Gate order used everywhere, including the parameter file.
enum Gate : std::size_t { forget = 0, input = 1, candidate = 2, output = 3 };
inline constexpr std::size_t kGateCount = 4;

/// One LSTM layer: input weights, recurrent weights and biases per gate.
struct GateParams {
    std::array<Matrix, kGateCount> w;               // hidden x input
    std::array<Matrix, kGateCount> wr;              // hidden x hidden
    std::array<std::vector<double>, kGateCount> b;  // hidden

    static GateParams zeros(std::size_t input_width, std::size_t hidden);

    std::size_t input_width() const { return w[0].cols; }
    std::size_t hidden() const { return w[0].rows; }
    void validate() const;

    bool operator==(const GateParams&) const = default;
};

struct CellState {
    std::vector<double> h;
    std::vector<double> c;

    static CellState zeros(std::size_t hidden) { return {std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0)}; }
};

/// Stacked LSTM equalizer: layers, sigmoid decoder and FIR post-filter.
struct LstmStack {
    std::vector<GateParams> layers;
    double dropout_rate = 0.0;
    std::vector<double> fc_w;
    double fc_b = 0.0;
    std::vector<double> post_fir{1.0};

    static LstmStack zeros(std::size_t input_width, const std::vector<std::size_t>& hidden,
                           double dropout_rate = 0.0);

    std::size_t input_width() const { return layers.front().input_width(); }
    void validate() const;
    std::vector<CellState> zero_states() const;

    bool operator==(const LstmStack&) const = default;
};

/// Keep flags for one layer boundary plus the inverted-dropout scale.
struct DropoutMask {
    std::vector<std::uint8_t> keep;
    double scale = 1.0;
};

double sigmoid(double x);

/// One time step of one layer. The input state is left untouched.
CellState cell_step(const GateParams& p, std::span<const double> x, const CellState& state);

struct StackOutput {
    double y = 0.0;  // decoder output before the post-filter
    std::vector<CellState> states;
};

/// Runs every layer for one time step. An empty `masks` span is inference
/// mode; training mode takes one mask per boundary between layers.
StackOutput stack_forward(const LstmStack& m, std::span<const double> x,
                          const std::vector<CellState>& states,
                          std::span<const DropoutMask> masks = {});

DropoutMask make_dropout_mask(double rate, std::size_t width, std::uint64_t seed);

/// Causal FIR on the equalizer clock; same semantics as apply_channel.
Waveform fir_postfilter(const Waveform& y, std::span<const double> taps);

/// Moving average over half a unit interval of equalizer ticks.
std::vector<double> default_post_fir(const LinkConfig& cfg);

/// Tick index at (or just before) each bit center, for `bit_count` bits.
std::vector<std::size_t> bit_center_ticks(const LinkConfig& cfg, std::size_t bit_count);

/// Sample-by-sample equalizer carrying its delay line and cell states.
/// One instance per stream; the model must outlive it.
class StreamingEqualizer {
public:
    StreamingEqualizer(const LstmStack& model, std::size_t delay_depth);

    /// Consumes one equalizer tick and returns the post-filtered output.
    double step(double sample);

    /// Decoder output of the most recent step, before the post-filter.
    double last_decoder_output() const { return last_y_; }
    void reset();

private:
    const LstmStack* model_;
    DelayLine delay_;
    std::vector<std::vector<double>> h_, c_;
    std::vector<double> gates_;
    std::vector<double> fir_history_;
    std::size_t fir_pos_ = 0;
    double last_y_ = 0.0;
};

struct EqualizedStream {
    Waveform analog;  // one sample per equalizer tick
    BitStream bits;   // sliced at bit-center ticks
};

/// Full streaming pass: sample-and-hold onto the tick grid, then one
/// equalizer step per tick from zero state.
EqualizedStream equalize_stream(const LstmStack& m, const Waveform& rx, const LinkConfig& cfg);

/// Same as equalize_stream for input already on the tick grid.
EqualizedStream equalize_ticks(const LstmStack& m, const Waveform& ticks, const LinkConfig& cfg);

namespace detail {

/// Gate pre-activations to activations; writes f, i, cs, o into `gates`
/// (4 * hidden) and the new h/c.
void cell_kernel(const GateParams& p, std::span<const double> x, std::span<const double> h_prev,
                 std::span<const double> c_prev, std::span<double> gates, std::span<double> h_out,
                 std::span<double> c_out);

}  // namespace detail

}  // namespace lstmeq
