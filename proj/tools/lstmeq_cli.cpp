// lstmeq: simulate a serial link, fit the FFE/DFE baseline, train and evaluate
// the LSTM equalizer, and render eye diagrams.

#include "lstmeq/error.hpp"
#include "lstmeq/experiment.hpp"
#include "lstmeq/model_io.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace lstmeq;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> overrides;
};

struct Context {
    ExperimentConfig cfg;
    fs::path out;
    std::vector<std::string> outputs;

    std::string file(const std::string& name)
    {
        outputs.push_back(name);
        return (out / name).string();
    }
};

Context load(const Common& c)
{
    if (c.config.empty())
        throw ConfigError("--config is required");
    Context ctx;
    ctx.cfg = load_experiment_config(c.config, c.overrides);
    if (c.seed)
        ctx.cfg.seeds = Seeds::from_base(*c.seed);
    if (!c.out.empty())
        ctx.cfg.output_dir = fs::absolute(c.out).lexically_normal().string();
    ctx.out = ctx.cfg.output_dir;
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec)
        throw IoError("cannot create output directory '" + ctx.out.string() + "': " + ec.message());
    return ctx;
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f || !(f << text))
        throw IoError("cannot write '" + path + "'");
}

// The resolved config is saved next to the outputs so the manifest alone
// suffices to replay the run.
void write_manifest(Context& ctx, const std::string& command, json extra = json::object())
{
    const auto config_text = canonical_config(ctx.cfg);
    write_text(ctx.file("config.json"), config_text);
    const auto& s = ctx.cfg.seeds;
    json m;
    m["command"] = command;
    m["config"] = "config.json";
    m["config_hash"] = fnv1a_hex(config_text);
    m["seeds"] = {{"bits", s.bits}, {"noise", s.noise}, {"init", s.init}, {"dropout", s.dropout}, {"shuffle", s.shuffle}};
    m["outputs"] = ctx.outputs;
    for (auto& [k, v] : extra.items())
        m[k] = v;
    write_text((ctx.out / "manifest.json").string(), m.dump(2) + "\n");
}

void write_pipeline(Context& ctx, const PipelineResult& p)
{
    render_eye(p.eye, ctx.file("eye_" + p.name + ".pgm"));
    write_eye_csv(ctx.file("eye_" + p.name + ".csv"), p.eye);
}

void print_rows(const std::vector<NamedEyeReport>& rows)
{
    for (const auto& r : rows)
        std::printf("%-8s eye_height=%.4g eye_width=%.4g rms_jitter=%.4g ber=%.3g (%zu/%zu, lag %zu)\n",
                    r.pipeline.c_str(), r.eye.eye_height, r.eye.eye_width, r.eye.rms_jitter, r.ber.rate,
                    r.ber.errors, r.ber.compared, r.ber.lag);
}

NamedEyeReport row(const PipelineResult& p) { return {p.name, p.report, p.ber}; }

json baseline_json(const Baseline& b)
{
    return {{"ffe", {{"precursors", b.ffe.precursors}, {"main", b.ffe.main}, {"postcursors", b.ffe.postcursors}}},
            {"dfe", {{"taps", b.dfe.taps}, {"threshold", b.dfe.threshold}}},
            {"decision_offset", b.decision_offset}};
}

int cmd_simulate(const Common& c)
{
    auto ctx = load(c);
    const auto channel = build_channel(ctx.cfg.channel, ctx.cfg.link);
    const auto r = realization(ctx.cfg, channel, DataSplit::test, ctx.cfg.signal.bits);
    write_bits_csv(ctx.file("tx_bits.csv"), r.tx, ctx.cfg.link.unit_interval());
    write_waveform_csv(ctx.file("tx_waveform.csv"), r.tx_wave);
    write_waveform_csv(ctx.file("rx_waveform.csv"), r.rx);
    write_impulse_csv(ctx.file("channel_impulse.csv"), channel);
    const auto none = run_unequalized(ctx.cfg.link, r);
    write_pipeline(ctx, none);
    write_eye_reports_csv(ctx.file("eye_report.csv"), {row(none)});
    write_manifest(ctx, "simulate");
    print_rows({row(none)});
    return kExitOk;
}

int cmd_fit_baseline(const Common& c)
{
    auto ctx = load(c);
    const auto channel = build_channel(ctx.cfg.channel, ctx.cfg.link);
    const auto b = make_baseline(ctx.cfg, channel);
    write_text(ctx.file("baseline.json"), baseline_json(b).dump(2) + "\n");
    write_manifest(ctx, "fit-baseline", {{"ffe_residual", b.ffe_residual}});
    std::printf("ffe main=%.6g residual=%.3g, %zu dfe taps, threshold=%.6g\n", b.ffe.main, b.ffe_residual,
                b.dfe.taps.size(), b.dfe.threshold);
    return kExitOk;
}

int cmd_train(const Common& c, const std::string& resume)
{
    auto ctx = load(c);
    const auto channel = build_channel(ctx.cfg.channel, ctx.cfg.link);
    std::optional<LstmStack> start;
    if (!resume.empty())
        start = load_model(resume);
    const auto report = train_equalizer(ctx.cfg, channel, start ? &*start : nullptr);
    save_model(ctx.file("model.rom"), report.parameters);
    write_report_csv(ctx.file("train_report.csv"), report);
    write_manifest(ctx, "train",
                   {{"stop_reason", to_string(report.reason)},
                    {"steps", report.train_loss.size()},
                    {"best_step", report.best_step},
                    {"best_validation_loss", report.best_validation_loss}});
    std::printf("stopped (%s) after %zu steps, best validation loss %.6g at step %zu\n", to_string(report.reason),
                report.train_loss.size(), report.best_validation_loss, report.best_step);
    return kExitOk;
}

std::size_t lstm_lag(const ExperimentConfig& cfg) { return cfg.model.latency_bits + 2; }

int cmd_evaluate(const Common& c, const std::string& model_path)
{
    auto ctx = load(c);
    const auto model = load_model(model_path);
    const auto channel = build_channel(ctx.cfg.channel, ctx.cfg.link);
    const auto r = realization(ctx.cfg, channel, DataSplit::test, ctx.cfg.signal.bits);
    const auto lstm = run_lstm(model, ctx.cfg.link, r, lstm_lag(ctx.cfg));
    write_waveform_csv(ctx.file("lstm_waveform.csv"), lstm.waveform);
    write_bits_csv(ctx.file("lstm_bits.csv"), lstm.bits, ctx.cfg.link.unit_interval());
    write_pipeline(ctx, lstm);
    write_eye_reports_csv(ctx.file("eye_report.csv"), {row(lstm)});
    write_manifest(ctx, "evaluate", {{"model", fs::absolute(model_path).lexically_normal().string()}});
    print_rows({row(lstm)});
    return kExitOk;
}

void write_overlay(const std::string& path, const LinkRealization& r, const PipelineResult& ffe,
                   const PipelineResult& lstm, int stride)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open '" + path + "' for writing");
    f << "time_s,tx,rx,ffe_dfe,lstm\n";
    char buf[160];
    for (std::size_t s = 0; s < r.rx.size(); ++s) {
        const std::size_t t = s / static_cast<std::size_t>(stride);
        const double l = t < lstm.waveform.size() ? lstm.waveform.samples[t] : 0.0;
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", static_cast<double>(s) * r.rx.sample_period,
                      r.tx_wave.samples[s], r.rx.samples[s], ffe.waveform.samples[s], l);
        f << buf;
    }
}

int cmd_compare(const Common& c, const std::string& model_path)
{
    auto ctx = load(c);
    const auto model = load_model(model_path);
    const auto channel = build_channel(ctx.cfg.channel, ctx.cfg.link);
    const auto baseline = make_baseline(ctx.cfg, channel);
    const auto r = realization(ctx.cfg, channel, DataSplit::test, ctx.cfg.signal.bits);
    const auto none = run_unequalized(ctx.cfg.link, r);
    const auto ffe = run_ffe_dfe(baseline, ctx.cfg.link, r);
    const auto lstm = run_lstm(model, ctx.cfg.link, r, lstm_lag(ctx.cfg));
    for (const auto* p : {&none, &ffe, &lstm})
        write_pipeline(ctx, *p);
    const std::vector<NamedEyeReport> rows{row(none), row(ffe), row(lstm)};
    write_eye_reports_csv(ctx.file("compare_report.csv"), rows);
    write_overlay(ctx.file("overlay.csv"), r, ffe, lstm, ctx.cfg.link.tick_stride());
    write_text(ctx.file("baseline.json"), baseline_json(baseline).dump(2) + "\n");
    write_manifest(ctx, "compare", {{"model", fs::absolute(model_path).lexically_normal().string()}});
    print_rows(rows);
    return kExitOk;
}

int cmd_render_eye(const Common& c, const std::string& input, double bit_rate, std::size_t span_ui,
                   std::size_t amp_bins)
{
    Context ctx;
    if (!c.config.empty()) {
        ctx = load(c);
    } else {
        if (c.seed || !c.overrides.empty())
            throw ConfigError("--seed and --set need --config");
        ctx.cfg.output_dir = fs::absolute(c.out.empty() ? "out" : c.out).lexically_normal().string();
        ctx.out = ctx.cfg.output_dir;
        fs::create_directories(ctx.out);
    }
    const auto w = read_waveform_csv(input);
    LinkConfig link = ctx.cfg.link;
    if (bit_rate > 0)
        link.bit_rate = bit_rate;
    else if (c.config.empty())
        throw ConfigError("render-eye needs --bit-rate or a --config with link.bit_rate");
    const auto eye = accumulate_eye(w, link, 0, span_ui, amp_bins);
    render_eye(eye, ctx.file("eye.pgm"));
    write_eye_csv(ctx.file("eye.csv"), eye);
    const auto rep = eye_metrics(eye);
    json extra = {{"input", fs::absolute(input).lexically_normal().string()},
                  {"eye_height", rep.eye_height},
                  {"eye_width", rep.eye_width},
                  {"rms_jitter", rep.rms_jitter},
                  {"crossing_level", rep.crossing_level}};
    if (c.config.empty()) {
        json m = extra;
        m["command"] = "render-eye";
        m["bit_rate"] = link.bit_rate;
        m["outputs"] = ctx.outputs;
        write_text((ctx.out / "manifest.json").string(), m.dump(2) + "\n");
    } else {
        write_manifest(ctx, "render-eye", extra);
    }
    std::printf("eye_height=%.4g eye_width=%.4g rms_jitter=%.4g\n", rep.eye_height, rep.eye_width, rep.rms_jitter);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"LSTM serial-link equalizer toolkit"};
    app.require_subcommand(1);
    Common common;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", common.config, "experiment config (JSON)");
        if (config_required)
            opt->required();
        sub->add_option("--seed", common.seed, "derive every named seed from this base seed");
        sub->add_option("--out", common.out, "output directory (overrides output_dir)");
        sub->add_option("--set", common.overrides, "override a scalar config field, e.g. training.learning_rate=0.01");
    };

    auto* simulate = app.add_subcommand("simulate", "generate tx/rx waveforms and the unequalized eye");
    add_common(simulate, true);
    auto* fit = app.add_subcommand("fit-baseline", "fit FFE/DFE taps to the channel");
    add_common(fit, true);
    std::string resume;
    auto* train_cmd = app.add_subcommand("train", "train the LSTM equalizer");
    add_common(train_cmd, true);
    train_cmd->add_option("--resume", resume, "start from this parameter ROM")->check(CLI::ExistingFile);
    std::string model_path;
    auto* evaluate = app.add_subcommand("evaluate", "run a trained model on fresh test data");
    add_common(evaluate, true);
    evaluate->add_option("--model", model_path, "parameter ROM")->required()->check(CLI::ExistingFile);
    auto* compare = app.add_subcommand("compare", "none vs FFE-DFE vs LSTM on the same rx");
    add_common(compare, true);
    compare->add_option("--model", model_path, "parameter ROM")->required()->check(CLI::ExistingFile);
    std::string input;
    double bit_rate = 0.0;
    std::size_t span_ui = 2, amp_bins = 128;
    auto* render = app.add_subcommand("render-eye", "eye diagram of a waveform CSV");
    add_common(render, false);
    render->add_option("--input", input, "waveform CSV")->required()->check(CLI::ExistingFile);
    render->add_option("--bit-rate", bit_rate, "bits per second (default: from --config)");
    render->add_option("--span-ui", span_ui, "unit intervals across the image")->check(CLI::PositiveNumber);
    render->add_option("--amp-bins", amp_bins, "amplitude rows")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*simulate)
            return cmd_simulate(common);
        if (*fit)
            return cmd_fit_baseline(common);
        if (*train_cmd)
            return cmd_train(common, resume);
        if (*evaluate)
            return cmd_evaluate(common, model_path);
        if (*compare)
            return cmd_compare(common, model_path);
        if (*render)
            return cmd_render_eye(common, input, bit_rate, span_ui, amp_bins);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
