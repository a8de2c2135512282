#pragma once

#include "lstmeq/baseline.hpp"
#include "lstmeq/channel.hpp"
#include "lstmeq/lstm.hpp"
#include "lstmeq/metrics.hpp"
#include "lstmeq/signal.hpp"
#include "lstmeq/training.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lstmeq {

/// Where the channel impulse response comes from. Exactly one source is set.
struct ChannelSpec {
    enum class Source { synthetic, impulse_csv, touchstone };
    Source source = Source::synthetic;

    // synthetic: taps one bit interval apart, re-gridded to the sample period
    double decay = 0.6;
    int echo_delay_bits = 0;
    double echo_gain = 0.0;
    int length_bits = 16;

    std::string path;  // impulse_csv or touchstone
    std::size_t n_fft = 4096;
    SpectrumWindow window = SpectrumWindow::hann;
    double energy_fraction = 0.999;
};

struct SignalSpec {
    std::size_t bits = 10000;  // evaluation bits
    BitSource source;
};

struct ModelSpec {
    std::vector<std::size_t> hidden{20};
    double dropout = 0.0;
    std::size_t latency_bits = 1;
    std::vector<double> post_fir;  // empty: moving-average default
};

struct TrainingSpec {
    TrainConfig train;
    std::size_t train_bits = 4000;
    std::size_t valid_bits = 1000;
};

struct BaselineSpec {
    bool fit = true;
    int n_pre = 2;
    int n_post = 4;
    int n_dfe = 6;
    // explicit taps (fit == false)
    FfeTaps ffe;
    DfeTaps dfe;
    std::optional<std::size_t> decision_offset;
};

/// Named seeds; every random draw in an experiment comes from one of these.
struct Seeds {
    std::uint64_t bits = 1;
    std::uint64_t noise = 2;
    std::uint64_t init = 3;
    std::uint64_t dropout = 4;
    std::uint64_t shuffle = 5;

    /// Replaces every seed with a stream derived from `base`.
    static Seeds from_base(std::uint64_t base);
};

struct ExperimentConfig {
    LinkConfig link;
    SignalSpec signal;
    ChannelSpec channel;
    double noise_sigma = 0.0;
    ModelSpec model;
    TrainingSpec training;
    BaselineSpec baseline;
    Seeds seeds;
    std::string output_dir = "out";

    /// Throws ConfigError; also checks that referenced files exist.
    void validate() const;
};

/// Parses the JSON config (comments allowed). Relative paths are resolved
/// against `base_dir`. Unknown keys are rejected. Each override is
/// "section.key=value" and replaces one scalar before validation.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& base_dir = ".",
                                         const std::vector<std::string>& overrides = {});
ExperimentConfig load_experiment_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Canonical JSON of the fully resolved config, as recorded in manifests.
std::string canonical_config(const ExperimentConfig& cfg);

/// 64-bit FNV-1a, lower-case hex.
std::string fnv1a_hex(const std::string& bytes);

/// Channel taps at the simulator sample period.
ImpulseResponse build_channel(const ChannelSpec& spec, const LinkConfig& link);

struct LinkRealization {
    BitStream tx;
    Waveform tx_wave;
    Waveform rx;  // after channel and noise
};

LinkRealization simulate_link(const LinkConfig& link, const ImpulseResponse& channel, std::size_t bits,
                              BitSource source, std::uint64_t bit_seed, double noise_sigma,
                              std::uint64_t noise_seed);

/// Ticks between a bit's transmission and the window whose output targets it.
std::size_t latency_ticks(const LinkConfig& link, std::size_t latency_bits);

Dataset make_dataset(const LinkConfig& link, const LinkRealization& r, std::size_t latency_bits);

/// Stream ids for derive_seed, so train, validation and test data never share draws.
enum class DataSplit : std::uint64_t { test = 0, train = 1, valid = 2 };

LinkRealization realization(const ExperimentConfig& cfg, const ImpulseResponse& channel, DataSplit split,
                            std::size_t bits);

/// Trains a fresh model (or continues from `start`) on the config's train/valid splits.
TrainReport train_equalizer(const ExperimentConfig& cfg, const ImpulseResponse& channel,
                            const LstmStack* start = nullptr);

Baseline make_baseline(const ExperimentConfig& cfg, const ImpulseResponse& channel);

struct PipelineResult {
    std::string name;
    Waveform waveform;  // equalizer output (or raw rx)
    BitStream bits;
    EyeHistogram eye;
    EyeReport report;
    BerResult ber;
};

/// Leading bits ignored by every pipeline's BER and eye, to skip start-up transients.
inline constexpr std::size_t kWarmupBits = 8;

/// Raw rx sliced at the mid level, at the sampling phase within the bit that
/// gives the lowest BER.
PipelineResult run_unequalized(const LinkConfig& link, const LinkRealization& r);
PipelineResult run_lstm(const LstmStack& m, const LinkConfig& link, const LinkRealization& r,
                        std::size_t max_lag);
PipelineResult run_ffe_dfe(const Baseline& b, const LinkConfig& link, const LinkRealization& r);

}  // namespace lstmeq
