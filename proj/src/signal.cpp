#include "lstmeq/signal.hpp"

#include "lstmeq/error.hpp"
#include "parse_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace lstmeq {

int LinkConfig::tick_stride() const
{
    const double ratio = delay_resolution / sample_period();
    const double rounded = std::round(ratio);
    if (!(rounded >= 1.0) || std::abs(ratio - rounded) > 1e-6 * rounded)
        throw ConfigError("delay_resolution must be a positive integer multiple of the sample period");
    return static_cast<int>(rounded);
}

void LinkConfig::validate() const
{
    if (!(bit_rate > 0) || !std::isfinite(bit_rate))
        throw ConfigError("bit_rate must be positive");
    if (samples_per_bit < 2)
        throw ConfigError("samples_per_bit must be >= 2");
    if (rise_samples < 0 || fall_samples < 0 || rise_samples + fall_samples > samples_per_bit)
        throw ConfigError("rise_samples + fall_samples must lie in [0, samples_per_bit]");
    if (!(high_level > low_level))
        throw ConfigError("high_level must exceed low_level");
    if (delay_depth < 1)
        throw ConfigError("delay_depth must be >= 1");
    const int stride = tick_stride();
    if (samples_per_bit % stride != 0)
        throw ConfigError("delay_resolution must divide the unit interval into whole ticks");
    if (sampling_phase < 0 || sampling_phase >= stride)
        throw ConfigError("sampling_phase must lie in [0, tick stride)");
}

namespace {

// Fibonacci LFSR for x^n + x^(n-1) + 1; emits the feedback bit.
BitStream prbs(std::uint64_t seed, std::size_t count, unsigned order)
{
    const std::uint32_t mask = (1u << order) - 1;
    std::uint32_t state = static_cast<std::uint32_t>(seed % mask) + 1;
    BitStream out;
    out.bits.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::uint32_t fb = ((state >> (order - 1)) ^ (state >> (order - 2))) & 1u;
        state = ((state << 1) | fb) & mask;
        out.bits.push_back(static_cast<std::uint8_t>(fb));
    }
    return out;
}

}  // namespace

BitStream generate_bits(std::uint64_t seed, std::size_t count, BitSource kind)
{
    if (count < 1)
        throw ConfigError("bit count must be >= 1");
    switch (kind.pattern) {
    case BitPattern::prbs7:
        return prbs(seed, count, 7);
    case BitPattern::prbs15:
        return prbs(seed, count, 15);
    case BitPattern::bernoulli:
        break;
    }
    if (!(kind.p >= 0.0 && kind.p <= 1.0))
        throw ConfigError("bernoulli probability must lie in [0, 1]");
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution draw(kind.p);
    BitStream out;
    out.bits.resize(count);
    for (auto& b : out.bits)
        b = draw(rng) ? 1 : 0;
    return out;
}

Waveform modulate_nrz(const BitStream& bits, const LinkConfig& cfg)
{
    cfg.validate();
    const auto spb = static_cast<std::size_t>(cfg.samples_per_bit);
    Waveform w;
    w.sample_period = cfg.sample_period();
    w.samples.reserve(bits.size() * spb);

    double prev = bits.size() ? cfg.level(bits[0]) : cfg.low_level;
    for (std::size_t k = 0; k < bits.size(); ++k) {
        const double cur = cfg.level(bits[k]);
        const int ramp = cur > prev ? cfg.rise_samples : (cur < prev ? cfg.fall_samples : 0);
        for (std::size_t j = 0; j < spb; ++j) {
            const auto jj = static_cast<int>(j);
            if (jj < ramp - 1)
                w.samples.push_back(prev + (cur - prev) * (jj + 1) / ramp);
            else
                w.samples.push_back(cur);
        }
        prev = cur;
    }
    return w;
}

Waveform sample_and_hold(const Waveform& w, std::size_t phase_offset, std::size_t period)
{
    if (period < 1 || period > w.size() || phase_offset >= period)
        throw ConfigError("sample_and_hold requires 0 <= phase < period <= waveform length");
    Waveform out;
    out.sample_period = w.sample_period * static_cast<double>(period);
    out.samples.reserve(w.size() / period + 1);
    for (std::size_t i = phase_offset; i < w.size(); i += period)
        out.samples.push_back(w.samples[i]);
    return out;
}

DelayLine::DelayLine(std::size_t depth) : registers_(depth, 0.0)
{
    if (depth < 1)
        throw ConfigError("delay line depth must be >= 1");
}

std::span<const double> DelayLine::push(double sample)
{
    std::copy_backward(registers_.begin(), registers_.end() - 1, registers_.end());
    registers_[0] = sample;
    return registers_;
}

void DelayLine::reset()
{
    std::fill(registers_.begin(), registers_.end(), 0.0);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

void write_value(std::ostream& out, double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open '" + path + "' for writing");
    return f;
}

std::ifstream open_in(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open '" + path + "'");
    return f;
}

struct CsvColumn {
    double sample_period = 0.0;
    std::vector<double> values;
};

CsvColumn read_column(std::istream& in)
{
    CsvColumn col;
    bool have_period = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line[0] == '#') {
            const auto eq = line.find("sample_period=");
            if (eq != std::string::npos) {
                auto value = line.substr(eq + 14);
                value.erase(value.find_last_not_of(" \t") + 1);
                if (!detail::parse_double(value, col.sample_period))
                    throw ParseError("malformed sample_period header", lineno);
                have_period = true;
            }
            continue;
        }
        const auto last = line.find_last_not_of(" \t");
        const auto first = line.find_first_not_of(" \t");
        double v = 0;
        if (!detail::parse_double(line.substr(first, last - first + 1), v))
            throw ParseError("non-numeric value '" + line + "'", lineno);
        col.values.push_back(v);
    }
    if (!have_period || !(col.sample_period > 0))
        throw ParseError("missing or invalid '# sample_period=' header", 0);
    return col;
}

}  // namespace

void write_waveform_csv(std::ostream& out, const Waveform& w)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "# sample_period=%.17g\n", w.sample_period);
    out << buf;
    for (double v : w.samples)
        write_value(out, v);
}

void write_waveform_csv(const std::string& path, const Waveform& w)
{
    auto f = open_out(path);
    write_waveform_csv(f, w);
}

Waveform read_waveform_csv(std::istream& in)
{
    auto col = read_column(in);
    return Waveform{std::move(col.values), col.sample_period};
}

Waveform read_waveform_csv(const std::string& path)
{
    auto f = open_in(path);
    return read_waveform_csv(f);
}

void write_bits_csv(std::ostream& out, const BitStream& bits, double bit_period)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "# sample_period=%.17g\n", bit_period);
    out << buf;
    for (auto b : bits.bits)
        out << static_cast<int>(b) << '\n';
}

void write_bits_csv(const std::string& path, const BitStream& bits, double bit_period)
{
    auto f = open_out(path);
    write_bits_csv(f, bits, bit_period);
}

BitStream read_bits_csv(std::istream& in)
{
    auto col = read_column(in);
    BitStream out;
    out.bits.reserve(col.values.size());
    for (std::size_t i = 0; i < col.values.size(); ++i) {
        const double v = col.values[i];
        if (v != 0.0 && v != 1.0)
            throw ParseError("bit value must be 0 or 1", 0);
        out.bits.push_back(v == 1.0 ? 1 : 0);
    }
    return out;
}

BitStream read_bits_csv(const std::string& path)
{
    auto f = open_in(path);
    return read_bits_csv(f);
}

}  // namespace lstmeq
