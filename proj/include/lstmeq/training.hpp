#pragma once

#include "lstmeq/lstm.hpp"
#include "lstmeq/signal.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace lstmeq {

/// Training windows over a tick stream. Window j is `length` consecutive
/// delay-line vectors (oldest first) ending at the tick whose target bit is
/// stored in targets[j]. Windows share the vector storage.
struct Dataset {
    std::size_t width = 0;   // delay depth n
    std::size_t length = 0;  // time steps per window
    std::vector<double> vectors;      // tick vectors, `width` values each, newest sample first
    std::vector<std::size_t> starts;  // first tick vector of each window
    std::vector<double> targets;

    std::size_t size() const noexcept { return targets.size(); }
    bool empty() const noexcept { return targets.empty(); }

    /// length * width values, step-major.
    std::span<const double> window(std::size_t j) const
    {
        return {vectors.data() + starts[j] * width, length * width};
    }

    /// Concatenates another dataset of the same geometry.
    void append(const Dataset& other);
};

/// Pairs every n-tick window of `rx_ticks` with the transmitted level of the
/// bit under tick (window end - latency_offset). Windows whose target tick
/// falls outside the transmitted bits are skipped.
Dataset build_dataset(const BitStream& tx, const Waveform& rx_ticks, const LinkConfig& cfg,
                      std::size_t latency_offset);

/// Mean squared error over equal-length vectors.
double mse_loss(std::span<const double> pred, std::span<const double> target);

/// fan_out x fan_in matrix, uniform on +-sqrt(6 / (fan_in + fan_out)).
Matrix xavier_init(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed);

/// Xavier-initialised stack with zero biases.
LstmStack init_model(std::size_t input_width, const std::vector<std::size_t>& hidden,
                     double dropout_rate, std::vector<double> post_fir, std::uint64_t seed);

/// Parameter gradients, shaped like an LstmStack (post-filter excluded).
struct Gradients {
    std::vector<GateParams> layers;
    std::vector<double> fc_w;
    double fc_b = 0.0;

    static Gradients zeros_like(const LstmStack& m);
    void add(const Gradients& other);
    void scale(double s);
    bool all_finite() const;
};

/// Mutable views over every trainable coefficient, in a fixed order.
std::vector<std::span<double>> parameter_blocks(LstmStack& m);
std::vector<std::span<double>> parameter_blocks(Gradients& g);
std::vector<std::span<const double>> parameter_blocks(const Gradients& g);
std::size_t parameter_count(const LstmStack& m);

/// Decoder output after unrolling `window` (length steps of input_width
/// values) from zero state.
double forward_window(const LstmStack& m, std::span<const double> window, std::size_t length,
                      std::span<const DropoutMask> masks = {});

struct BackwardResult {
    double loss = 0.0;
    double prediction = 0.0;
    Gradients grads;
};

/// Exact gradient of (forward_window - target)^2 by backpropagation through time.
BackwardResult backward(const LstmStack& m, std::span<const double> window, std::size_t length,
                        double target, std::span<const DropoutMask> masks = {});

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t validation_interval = 100;
    std::size_t patience = 5;
    std::size_t max_epochs = 50;
    std::size_t max_steps = 0;  // 0: no step limit
    std::size_t batch_size = 32;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;  // minibatch shuffling
    std::uint64_t dropout_seed = 0;
    double convergence_delta = 1e-5;
    std::size_t threads = 0;  // 0: hardware concurrency

    void validate() const;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
};

/// One bias-corrected Adam update of `params`; step_index starts at 1.
void adam_step(LstmStack& params, AdamState& state, const Gradients& g, std::size_t step_index,
               const TrainConfig& cfg);

enum class StopReason { max_epochs, max_steps, converged };

const char* to_string(StopReason r);

struct ValidationPoint {
    std::size_t step = 0;
    double loss = 0.0;
};

struct TrainReport {
    std::vector<double> train_loss;  // one entry per optimizer step
    std::vector<ValidationPoint> validation;
    StopReason reason = StopReason::max_epochs;
    std::size_t best_step = 0;
    double best_validation_loss = 0.0;
    LstmStack parameters;  // best-validation parameters
};

/// Mean loss over every window, inference mode.
double evaluate_loss(const LstmStack& m, const Dataset& data, std::size_t threads = 0);

/// Minibatch Adam with validation every `validation_interval` steps and
/// patience-based early stopping. Throws TrainingError on a non-finite loss.
TrainReport train(const LstmStack& m0, const Dataset& train_set, const Dataset& valid_set,
                  const TrainConfig& cfg);

/// CSV with columns step,train_loss,valid_loss (valid_loss empty between validations).
void write_report_csv(std::ostream& out, const TrainReport& report);
void write_report_csv(const std::string& path, const TrainReport& report);

}  // namespace lstmeq
