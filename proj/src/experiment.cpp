#include "lstmeq/experiment.hpp"

#include "lstmeq/error.hpp"
#include "lstmeq/seed.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace lstmeq {

namespace fs = std::filesystem;
using nlohmann::json;

Seeds Seeds::from_base(std::uint64_t base)
{
    return Seeds{derive_seed(base, 1), derive_seed(base, 2), derive_seed(base, 3), derive_seed(base, 4),
                 derive_seed(base, 5)};
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!obj.is_object())
        throw ConfigError("'" + where + "' must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError("unknown key '" + where + "." + key + "'");
    }
}

template <class T>
void read(const json& obj, const char* key, const std::string& where, T& dst)
{
    auto it = obj.find(key);
    if (it == obj.end())
        return;
    try {
        dst = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError("'" + where + "." + key + "' has the wrong type");
    }
}

// Non-negative integers arrive as JSON unsigned; reject negatives with a clear message.
void read_size(const json& obj, const char* key, const std::string& where, std::size_t& dst)
{
    auto it = obj.find(key);
    if (it == obj.end())
        return;
    if (!it->is_number_unsigned())
        throw ConfigError("'" + where + "." + key + "' must be a non-negative integer");
    dst = it->get<std::size_t>();
}

void read_u64(const json& obj, const char* key, const std::string& where, std::uint64_t& dst)
{
    auto it = obj.find(key);
    if (it == obj.end())
        return;
    if (!it->is_number_unsigned())
        throw ConfigError("'" + where + "." + key + "' must be a non-negative integer");
    dst = it->get<std::uint64_t>();
}

std::string resolve(const std::string& base_dir, const std::string& p)
{
    fs::path path(p);
    if (path.is_relative())
        path = fs::path(base_dir) / path;
    return path.lexically_normal().string();
}

void parse_link(const json& j, LinkConfig& l)
{
    check_keys(j, "link",
               {"bit_rate", "samples_per_bit", "high_level", "low_level", "rise_samples", "fall_samples",
                "delay_depth", "delay_resolution", "sampling_phase"});
    read(j, "bit_rate", "link", l.bit_rate);
    read(j, "samples_per_bit", "link", l.samples_per_bit);
    read(j, "high_level", "link", l.high_level);
    read(j, "low_level", "link", l.low_level);
    read(j, "rise_samples", "link", l.rise_samples);
    read(j, "fall_samples", "link", l.fall_samples);
    read(j, "delay_depth", "link", l.delay_depth);
    read(j, "delay_resolution", "link", l.delay_resolution);
    read(j, "sampling_phase", "link", l.sampling_phase);
}

void parse_signal(const json& j, SignalSpec& s)
{
    check_keys(j, "signal", {"bits", "pattern", "p"});
    read_size(j, "bits", "signal", s.bits);
    std::string pattern = "bernoulli";
    read(j, "pattern", "signal", pattern);
    if (pattern == "bernoulli")
        s.source.pattern = BitPattern::bernoulli;
    else if (pattern == "prbs7")
        s.source.pattern = BitPattern::prbs7;
    else if (pattern == "prbs15")
        s.source.pattern = BitPattern::prbs15;
    else
        throw ConfigError("signal.pattern must be bernoulli, prbs7 or prbs15 (got '" + pattern + "')");
    read(j, "p", "signal", s.source.p);
}

void parse_channel(const json& j, ChannelSpec& c, const std::string& base_dir)
{
    check_keys(j, "channel", {"synthetic", "impulse_csv", "touchstone", "n_fft", "window", "energy_fraction"});
    const int sources = static_cast<int>(j.contains("synthetic")) + static_cast<int>(j.contains("impulse_csv")) +
                        static_cast<int>(j.contains("touchstone"));
    if (sources != 1)
        throw ConfigError("channel needs exactly one of 'synthetic', 'impulse_csv', 'touchstone'");
    if (j.contains("synthetic")) {
        c.source = ChannelSpec::Source::synthetic;
        const auto& s = j.at("synthetic");
        check_keys(s, "channel.synthetic", {"decay", "echo_delay_bits", "echo_gain", "length_bits"});
        read(s, "decay", "channel.synthetic", c.decay);
        read(s, "echo_delay_bits", "channel.synthetic", c.echo_delay_bits);
        read(s, "echo_gain", "channel.synthetic", c.echo_gain);
        read(s, "length_bits", "channel.synthetic", c.length_bits);
    } else {
        const bool csv = j.contains("impulse_csv");
        c.source = csv ? ChannelSpec::Source::impulse_csv : ChannelSpec::Source::touchstone;
        std::string p;
        read(j, csv ? "impulse_csv" : "touchstone", "channel", p);
        if (p.empty())
            throw ConfigError("channel file path is empty");
        c.path = resolve(base_dir, p);
    }
    read_size(j, "n_fft", "channel", c.n_fft);
    read(j, "energy_fraction", "channel", c.energy_fraction);
    std::string window = c.window == SpectrumWindow::hann ? "hann" : "none";
    read(j, "window", "channel", window);
    if (window == "hann")
        c.window = SpectrumWindow::hann;
    else if (window == "none")
        c.window = SpectrumWindow::none;
    else
        throw ConfigError("channel.window must be 'hann' or 'none'");
}

void parse_model(const json& j, ModelSpec& m)
{
    check_keys(j, "model", {"hidden", "dropout", "latency_bits", "post_fir"});
    if (j.contains("hidden")) {
        const auto& h = j.at("hidden");
        if (!h.is_array() || h.empty())
            throw ConfigError("model.hidden must be a non-empty array of layer widths");
        m.hidden.clear();
        for (const auto& v : h) {
            if (!v.is_number_unsigned() || v.get<std::size_t>() == 0)
                throw ConfigError("model.hidden entries must be positive integers");
            m.hidden.push_back(v.get<std::size_t>());
        }
    }
    read(j, "dropout", "model", m.dropout);
    read_size(j, "latency_bits", "model", m.latency_bits);
    read(j, "post_fir", "model", m.post_fir);
}

void parse_training(const json& j, TrainingSpec& t)
{
    check_keys(j, "training",
               {"learning_rate", "validation_interval", "patience", "max_epochs", "max_steps", "batch_size",
                "beta1", "beta2", "epsilon", "convergence_delta", "threads", "train_bits", "valid_bits"});
    auto& c = t.train;
    read(j, "learning_rate", "training", c.learning_rate);
    read_size(j, "validation_interval", "training", c.validation_interval);
    read_size(j, "patience", "training", c.patience);
    read_size(j, "max_epochs", "training", c.max_epochs);
    read_size(j, "max_steps", "training", c.max_steps);
    read_size(j, "batch_size", "training", c.batch_size);
    read(j, "beta1", "training", c.beta1);
    read(j, "beta2", "training", c.beta2);
    read(j, "epsilon", "training", c.epsilon);
    read(j, "convergence_delta", "training", c.convergence_delta);
    read_size(j, "threads", "training", c.threads);
    read_size(j, "train_bits", "training", t.train_bits);
    read_size(j, "valid_bits", "training", t.valid_bits);
}

void parse_baseline(const json& j, BaselineSpec& b)
{
    check_keys(j, "baseline", {"fit", "ffe", "dfe", "decision_offset"});
    const bool explicit_taps = j.contains("ffe") || j.contains("dfe");
    if (explicit_taps && j.contains("fit"))
        throw ConfigError("baseline takes either 'fit' or explicit 'ffe'/'dfe' taps, not both");
    if (!explicit_taps) {
        b.fit = true;
        if (j.contains("fit")) {
            const auto& f = j.at("fit");
            check_keys(f, "baseline.fit", {"precursors", "postcursors", "dfe_taps"});
            read(f, "precursors", "baseline.fit", b.n_pre);
            read(f, "postcursors", "baseline.fit", b.n_post);
            read(f, "dfe_taps", "baseline.fit", b.n_dfe);
        }
        if (j.contains("decision_offset"))
            throw ConfigError("baseline.decision_offset only applies to explicit taps");
        return;
    }
    b.fit = false;
    if (!j.contains("ffe"))
        throw ConfigError("explicit baseline needs an 'ffe' section");
    const auto& f = j.at("ffe");
    check_keys(f, "baseline.ffe", {"precursors", "main", "postcursors"});
    read(f, "precursors", "baseline.ffe", b.ffe.precursors);
    read(f, "main", "baseline.ffe", b.ffe.main);
    read(f, "postcursors", "baseline.ffe", b.ffe.postcursors);
    if (j.contains("dfe")) {
        const auto& d = j.at("dfe");
        check_keys(d, "baseline.dfe", {"taps", "threshold"});
        read(d, "taps", "baseline.dfe", b.dfe.taps);
        read(d, "threshold", "baseline.dfe", b.dfe.threshold);
    }
    if (j.contains("decision_offset")) {
        std::size_t off = 0;
        read_size(j, "decision_offset", "baseline", off);
        b.decision_offset = off;
    }
}

void parse_seeds(const json& j, Seeds& s)
{
    check_keys(j, "seeds", {"bits", "noise", "init", "dropout", "shuffle"});
    read_u64(j, "bits", "seeds", s.bits);
    read_u64(j, "noise", "seeds", s.noise);
    read_u64(j, "init", "seeds", s.init);
    read_u64(j, "dropout", "seeds", s.dropout);
    read_u64(j, "shuffle", "seeds", s.shuffle);
}

// "a.b.c=value"; value is read as JSON when it parses, else as a string.
void apply_override(json& root, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "' is not of the form key.path=value");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded())
        value = text;
    if (value.is_object() || value.is_array())
        throw ConfigError("override '" + path + "' must be a scalar");
    json* node = &root;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty())
            throw ConfigError("override path '" + path + "' has an empty component");
        if (!node->is_object())
            throw ConfigError("override path '" + path + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        if (node->is_null())
            *node = json::object();
        start = dot + 1;
    }
}

}  // namespace

void ExperimentConfig::validate() const
{
    link.validate();
    if (signal.bits < 1)
        throw ConfigError("signal.bits must be >= 1");
    if (signal.source.pattern == BitPattern::bernoulli && !(signal.source.p >= 0.0 && signal.source.p <= 1.0))
        throw ConfigError("signal.p must lie in [0, 1]");
    if (!(noise_sigma >= 0.0))
        throw ConfigError("noise_sigma must be >= 0");
    if (channel.source == ChannelSpec::Source::synthetic) {
        if (!(channel.decay >= 0.0 && channel.decay < 1.0))
            throw ConfigError("channel.synthetic.decay must lie in [0, 1)");
        if (channel.decay == 0.0 && channel.echo_gain != 0.0)
            throw ConfigError("channel.synthetic.decay = 0 (identity channel) cannot carry an echo");
        if (!(std::abs(channel.echo_gain) < 1.0))
            throw ConfigError("channel.synthetic.echo_gain must satisfy |echo_gain| < 1");
        if (channel.length_bits < 1 || channel.echo_delay_bits < 0)
            throw ConfigError("channel.synthetic lengths must be non-negative (length >= 1)");
    } else {
        std::error_code ec;
        if (!fs::is_regular_file(channel.path, ec))
            throw ConfigError("channel file '" + channel.path + "' does not exist");
    }
    if (!(channel.energy_fraction > 0.0 && channel.energy_fraction <= 1.0))
        throw ConfigError("channel.energy_fraction must lie in (0, 1]");
    if (!(model.dropout >= 0.0 && model.dropout < 1.0))
        throw ConfigError("model.dropout must lie in [0, 1)");
    for (double v : model.post_fir)
        if (!std::isfinite(v))
            throw ConfigError("model.post_fir taps must be finite");
    training.train.validate();
    if (training.train_bits < 1 || training.valid_bits < 1)
        throw ConfigError("training.train_bits and training.valid_bits must be >= 1");
    if (baseline.fit) {
        if (baseline.n_pre < 0 || baseline.n_post < 0 || baseline.n_dfe < 0)
            throw ConfigError("baseline.fit counts must be >= 0");
    } else {
        baseline.ffe.validate();
    }
    if (output_dir.empty())
        throw ConfigError("output_dir must not be empty");
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& base_dir,
                                         const std::vector<std::string>& overrides)
{
    json j;
    try {
        j = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    for (const auto& o : overrides)
        apply_override(j, o);
    check_keys(j, "config",
               {"link", "signal", "channel", "noise_sigma", "model", "training", "baseline", "seeds", "output_dir"});
    ExperimentConfig cfg;
    if (j.contains("link"))
        parse_link(j.at("link"), cfg.link);
    if (j.contains("signal"))
        parse_signal(j.at("signal"), cfg.signal);
    if (!j.contains("channel"))
        throw ConfigError("config needs a 'channel' section");
    parse_channel(j.at("channel"), cfg.channel, base_dir);
    read(j, "noise_sigma", "config", cfg.noise_sigma);
    if (j.contains("model"))
        parse_model(j.at("model"), cfg.model);
    if (j.contains("training"))
        parse_training(j.at("training"), cfg.training);
    if (j.contains("baseline"))
        parse_baseline(j.at("baseline"), cfg.baseline);
    if (j.contains("seeds"))
        parse_seeds(j.at("seeds"), cfg.seeds);
    read(j, "output_dir", "config", cfg.output_dir);
    cfg.output_dir = resolve(base_dir, cfg.output_dir);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path, const std::vector<std::string>& overrides)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    const auto dir = fs::absolute(fs::path(path)).parent_path().string();
    return parse_experiment_config(ss.str(), dir, overrides);
}

std::string canonical_config(const ExperimentConfig& c)
{
    json j;
    const auto& l = c.link;
    j["link"] = {{"bit_rate", l.bit_rate},
                 {"samples_per_bit", l.samples_per_bit},
                 {"high_level", l.high_level},
                 {"low_level", l.low_level},
                 {"rise_samples", l.rise_samples},
                 {"fall_samples", l.fall_samples},
                 {"delay_depth", l.delay_depth},
                 {"delay_resolution", l.delay_resolution},
                 {"sampling_phase", l.sampling_phase}};
    const char* pattern = c.signal.source.pattern == BitPattern::bernoulli ? "bernoulli"
                          : c.signal.source.pattern == BitPattern::prbs7   ? "prbs7"
                                                                           : "prbs15";
    j["signal"] = {{"bits", c.signal.bits}, {"pattern", pattern}, {"p", c.signal.source.p}};
    json ch = {{"n_fft", c.channel.n_fft},
               {"window", c.channel.window == SpectrumWindow::hann ? "hann" : "none"},
               {"energy_fraction", c.channel.energy_fraction}};
    switch (c.channel.source) {
    case ChannelSpec::Source::synthetic:
        ch["synthetic"] = {{"decay", c.channel.decay},
                           {"echo_delay_bits", c.channel.echo_delay_bits},
                           {"echo_gain", c.channel.echo_gain},
                           {"length_bits", c.channel.length_bits}};
        break;
    case ChannelSpec::Source::impulse_csv:
        ch["impulse_csv"] = c.channel.path;
        break;
    case ChannelSpec::Source::touchstone:
        ch["touchstone"] = c.channel.path;
        break;
    }
    j["channel"] = ch;
    j["noise_sigma"] = c.noise_sigma;
    j["model"] = {{"hidden", c.model.hidden},
                  {"dropout", c.model.dropout},
                  {"latency_bits", c.model.latency_bits},
                  {"post_fir", c.model.post_fir}};
    const auto& t = c.training.train;
    j["training"] = {{"learning_rate", t.learning_rate},
                     {"validation_interval", t.validation_interval},
                     {"patience", t.patience},
                     {"max_epochs", t.max_epochs},
                     {"max_steps", t.max_steps},
                     {"batch_size", t.batch_size},
                     {"beta1", t.beta1},
                     {"beta2", t.beta2},
                     {"epsilon", t.epsilon},
                     {"convergence_delta", t.convergence_delta},
                     {"threads", t.threads},
                     {"train_bits", c.training.train_bits},
                     {"valid_bits", c.training.valid_bits}};
    if (c.baseline.fit) {
        j["baseline"] = {
            {"fit", {{"precursors", c.baseline.n_pre}, {"postcursors", c.baseline.n_post}, {"dfe_taps", c.baseline.n_dfe}}}};
    } else {
        json b = {{"ffe",
                   {{"precursors", c.baseline.ffe.precursors},
                    {"main", c.baseline.ffe.main},
                    {"postcursors", c.baseline.ffe.postcursors}}},
                  {"dfe", {{"taps", c.baseline.dfe.taps}, {"threshold", c.baseline.dfe.threshold}}}};
        if (c.baseline.decision_offset)
            b["decision_offset"] = *c.baseline.decision_offset;
        j["baseline"] = b;
    }
    j["seeds"] = {{"bits", c.seeds.bits},
                  {"noise", c.seeds.noise},
                  {"init", c.seeds.init},
                  {"dropout", c.seeds.dropout},
                  {"shuffle", c.seeds.shuffle}};
    j["output_dir"] = c.output_dir;
    return j.dump(2) + "\n";
}

std::string fnv1a_hex(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Pipelines

ImpulseResponse build_channel(const ChannelSpec& spec, const LinkConfig& link)
{
    link.validate();
    const double ts = link.sample_period();
    switch (spec.source) {
    case ChannelSpec::Source::synthetic: {
        // A lossless, echo-free channel is exactly the identity at any sample rate.
        if (spec.decay == 0.0 && spec.echo_gain == 0.0)
            return ImpulseResponse{{1.0}, ts};
        const auto ui = synth_lossy_channel(spec.decay, spec.echo_delay_bits, spec.echo_gain, spec.length_bits,
                                            link.unit_interval());
        return resample_impulse(ui, ts);
    }
    case ChannelSpec::Source::impulse_csv:
        return resample_impulse(read_impulse_csv(spec.path), ts);
    case ChannelSpec::Source::touchstone: {
        const auto sp = parse_touchstone_file(spec.path);
        return resample_impulse(s21_to_impulse(sp, spec.n_fft, spec.window, spec.energy_fraction), ts);
    }
    }
    throw ConfigError("unknown channel source");
}

LinkRealization simulate_link(const LinkConfig& link, const ImpulseResponse& channel, std::size_t bits,
                              BitSource source, std::uint64_t bit_seed, double noise_sigma,
                              std::uint64_t noise_seed)
{
    LinkRealization r;
    r.tx = generate_bits(bit_seed, bits, source);
    r.tx_wave = modulate_nrz(r.tx, link);
    r.rx = add_awgn(apply_channel(r.tx_wave, channel), noise_sigma, noise_seed);
    return r;
}

std::size_t latency_ticks(const LinkConfig& link, std::size_t latency_bits)
{
    return latency_bits * static_cast<std::size_t>(link.ticks_per_bit());
}

Dataset make_dataset(const LinkConfig& link, const LinkRealization& r, std::size_t latency_bits)
{
    const auto ticks = sample_and_hold(r.rx, static_cast<std::size_t>(link.sampling_phase),
                                       static_cast<std::size_t>(link.tick_stride()));
    return build_dataset(r.tx, ticks, link, latency_ticks(link, latency_bits));
}

LinkRealization realization(const ExperimentConfig& cfg, const ImpulseResponse& channel, DataSplit split,
                            std::size_t bits)
{
    const auto stream = static_cast<std::uint64_t>(split);
    return simulate_link(cfg.link, channel, bits, cfg.signal.source, derive_seed(cfg.seeds.bits, stream),
                         cfg.noise_sigma, derive_seed(cfg.seeds.noise, stream));
}

TrainReport train_equalizer(const ExperimentConfig& cfg, const ImpulseResponse& channel, const LstmStack* start)
{
    const auto train_r = realization(cfg, channel, DataSplit::train, cfg.training.train_bits);
    const auto valid_r = realization(cfg, channel, DataSplit::valid, cfg.training.valid_bits);
    const auto train_set = make_dataset(cfg.link, train_r, cfg.model.latency_bits);
    const auto valid_set = make_dataset(cfg.link, valid_r, cfg.model.latency_bits);
    LstmStack m0;
    if (start) {
        m0 = *start;
        if (m0.input_width() != static_cast<std::size_t>(cfg.link.delay_depth))
            throw ConfigError("starting model width does not match link.delay_depth");
    } else {
        auto fir = cfg.model.post_fir.empty() ? default_post_fir(cfg.link) : cfg.model.post_fir;
        m0 = init_model(static_cast<std::size_t>(cfg.link.delay_depth), cfg.model.hidden, cfg.model.dropout,
                        std::move(fir), cfg.seeds.init);
    }
    TrainConfig tc = cfg.training.train;
    tc.seed = cfg.seeds.shuffle;
    tc.dropout_seed = cfg.seeds.dropout;
    return train(m0, train_set, valid_set, tc);
}

Baseline make_baseline(const ExperimentConfig& cfg, const ImpulseResponse& channel)
{
    if (cfg.baseline.fit)
        return fit_baseline(channel, cfg.link, cfg.baseline.n_pre, cfg.baseline.n_post, cfg.baseline.n_dfe);
    Baseline b;
    b.ffe = cfg.baseline.ffe;
    b.dfe = cfg.baseline.dfe;
    b.samples_per_cursor = cfg.link.samples_per_bit;
    b.decision_offset = cfg.baseline.decision_offset.value_or(
        cfg.baseline.ffe.precursors.size() * static_cast<std::size_t>(cfg.link.samples_per_bit) +
        static_cast<std::size_t>(cfg.link.samples_per_bit / 2));
    return b;
}

namespace {

BitStream drop_front(const BitStream& b, std::size_t n)
{
    BitStream out;
    if (n < b.size())
        out.bits.assign(b.bits.begin() + static_cast<std::ptrdiff_t>(n), b.bits.end());
    return out;
}

EyeHistogram eye_after_warmup(const Waveform& w, const LinkConfig& link)
{
    const auto per_ui = static_cast<std::size_t>(std::llround(link.unit_interval() / w.sample_period));
    const std::size_t skip = std::min(kWarmupBits * per_ui, w.size() > per_ui ? w.size() - per_ui : 0);
    Waveform tail{std::vector<double>(w.samples.begin() + static_cast<std::ptrdiff_t>(skip), w.samples.end()),
                  w.sample_period};
    return accumulate_eye(tail, link, skip);
}

void finish(PipelineResult& p, const LinkConfig& link, const BitStream& tx, std::size_t max_lag)
{
    p.ber = ber(drop_front(tx, kWarmupBits), drop_front(p.bits, kWarmupBits), max_lag);
    p.eye = eye_after_warmup(p.waveform, link);
    p.report = eye_metrics(p.eye);
}

}  // namespace

PipelineResult run_unequalized(const LinkConfig& link, const LinkRealization& r)
{
    link.validate();
    const auto spb = static_cast<std::size_t>(link.samples_per_bit);
    const std::size_t max_lag = 4;
    PipelineResult best;
    bool have = false;
    for (std::size_t phase = 0; phase < spb; ++phase) {
        BitStream bits;
        for (std::size_t s = phase; s < r.rx.size(); s += spb)
            bits.bits.push_back(slice(r.rx.samples[s], link.mid_level()));
        const auto b = ber(drop_front(r.tx, kWarmupBits), drop_front(bits, kWarmupBits), max_lag);
        if (!have || b.rate < best.ber.rate) {
            best.bits = std::move(bits);
            best.ber = b;
            have = true;
        }
    }
    best.name = "none";
    best.waveform = r.rx;
    best.eye = eye_after_warmup(best.waveform, link);
    best.report = eye_metrics(best.eye);
    return best;
}

PipelineResult run_lstm(const LstmStack& m, const LinkConfig& link, const LinkRealization& r, std::size_t max_lag)
{
    auto eq = equalize_stream(m, r.rx, link);
    PipelineResult p;
    p.name = "lstm";
    p.waveform = std::move(eq.analog);
    p.bits = std::move(eq.bits);
    finish(p, link, r.tx, max_lag);
    return p;
}

PipelineResult run_ffe_dfe(const Baseline& b, const LinkConfig& link, const LinkRealization& r)
{
    auto out = run_baseline(b, r.rx, link);
    PipelineResult p;
    p.name = "ffe-dfe";
    p.waveform = std::move(out.waveform);
    p.bits = std::move(out.bits);
    const std::size_t max_lag = b.decision_offset / static_cast<std::size_t>(link.samples_per_bit) + 2;
    finish(p, link, r.tx, max_lag);
    return p;
}

}  // namespace lstmeq
