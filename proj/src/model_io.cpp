#include "lstmeq/model_io.hpp"

#include "parse_util.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace lstmeq {

namespace {

constexpr std::array<const char*, kGateCount> kGateNames{"f", "i", "cs", "o"};
constexpr const char* kMagic = "lstmeq-parameter-rom";

void put(std::ostream& out, double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

void put_values(std::ostream& out, const double* v, std::size_t n)
{
    for (std::size_t k = 0; k < n; ++k) {
        if (k)
            out << ' ';
        put(out, v[k]);
    }
    out << '\n';
}

void put_matrix(std::ostream& out, const char* tag, std::size_t gate, const Matrix& m)
{
    out << tag << ' ' << kGateNames[gate] << ' ' << m.rows << ' ' << m.cols << '\n';
    for (std::size_t r = 0; r < m.rows; ++r)
        put_values(out, m.data.data() + r * m.cols, m.cols);
}

/// Whitespace tokenizer that remembers the line of each token.
class Tokens {
public:
    explicit Tokens(std::istream& in) : in_(in) {}

    std::string next(const char* what)
    {
        while (!(line_stream_ >> token_)) {
            std::string line;
            if (!std::getline(in_, line))
                throw ParseError(std::string("unexpected end of file, expected ") + what, line_);
            ++line_;
            line_stream_.clear();
            line_stream_.str(line);
        }
        return token_;
    }

    void expect(const std::string& keyword)
    {
        const auto tok = next(keyword.c_str());
        if (tok != keyword)
            throw ParseError("expected '" + keyword + "', found '" + tok + "'", line_);
    }

    double number(const char* what)
    {
        const auto tok = next(what);
        double v = 0;
        if (!detail::parse_double(tok, v))
            throw ParseError(std::string("bad ") + what + " '" + tok + "'", line_);
        return v;
    }

    std::size_t count(const char* what)
    {
        const auto tok = next(what);
        try {
            std::size_t used = 0;
            const long long v = std::stoll(tok, &used);
            if (used == tok.size() && v >= 0)
                return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
        throw ParseError(std::string("bad ") + what + " '" + tok + "'", line_);
    }

    /// True when nothing but whitespace remains.
    bool at_end()
    {
        std::string tok;
        if (line_stream_ >> tok)
            return false;
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            std::istringstream ls(line);
            if (ls >> tok)
                return false;
        }
        return true;
    }

    std::size_t line() const { return line_; }

private:
    std::istream& in_;
    std::istringstream line_stream_;
    std::string token_;
    std::size_t line_ = 0;
};

void read_matrix(Tokens& t, const char* tag, std::size_t gate, Matrix& m)
{
    t.expect(tag);
    t.expect(kGateNames[gate]);
    const auto rows = t.count("row count");
    const auto cols = t.count("column count");
    if (rows != m.rows || cols != m.cols)
        throw ParseError(std::string(tag) + " " + kGateNames[gate] + " shape disagrees with header", t.line());
    for (auto& v : m.data)
        v = t.number("matrix entry");
}

void read_vector(Tokens& t, std::vector<double>& v, const char* what)
{
    const auto len = t.count("vector length");
    if (len != v.size())
        throw ParseError(std::string(what) + " length disagrees with header", t.line());
    for (auto& x : v)
        x = t.number(what);
}

}  // namespace

void save_model(std::ostream& out, const LstmStack& m)
{
    m.validate();
    out << kMagic << '\n';
    out << "version " << kModelFormatVersion << '\n';
    out << "layers " << m.layers.size() << '\n';
    out << "input_width " << m.input_width() << '\n';
    out << "hidden";
    for (const auto& l : m.layers)
        out << ' ' << l.hidden();
    out << '\n';
    out << "dropout_rate ";
    put(out, m.dropout_rate);
    out << '\n';
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto& p = m.layers[l];
        out << "layer " << l << '\n';
        for (std::size_t g = 0; g < kGateCount; ++g)
            put_matrix(out, "w", g, p.w[g]);
        for (std::size_t g = 0; g < kGateCount; ++g)
            put_matrix(out, "wr", g, p.wr[g]);
        for (std::size_t g = 0; g < kGateCount; ++g) {
            out << "b " << kGateNames[g] << ' ' << p.b[g].size() << '\n';
            put_values(out, p.b[g].data(), p.b[g].size());
        }
    }
    out << "fc_w " << m.fc_w.size() << '\n';
    put_values(out, m.fc_w.data(), m.fc_w.size());
    out << "fc_b ";
    put(out, m.fc_b);
    out << '\n';
    out << "post_fir " << m.post_fir.size() << '\n';
    put_values(out, m.post_fir.data(), m.post_fir.size());
    out << "end\n";
}

void save_model(const std::string& path, const LstmStack& m)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open '" + path + "' for writing");
    save_model(f, m);
    if (!f)
        throw IoError("write to '" + path + "' failed");
}

LstmStack load_model(std::istream& in)
{
    Tokens t(in);
    t.expect(kMagic);
    t.expect("version");
    const auto version = t.count("version");
    if (version != static_cast<std::size_t>(kModelFormatVersion))
        throw UnsupportedVersionError("unsupported parameter ROM version " + std::to_string(version) +
                                          " (this build reads version " +
                                          std::to_string(kModelFormatVersion) + ")",
                                      t.line());
    t.expect("layers");
    const auto n_layers = t.count("layer count");
    if (n_layers < 1)
        throw ParseError("layer count must be >= 1", t.line());
    t.expect("input_width");
    const auto input_width = t.count("input width");
    t.expect("hidden");
    std::vector<std::size_t> hidden(n_layers);
    for (auto& h : hidden) {
        h = t.count("hidden width");
        if (h < 1)
            throw ParseError("hidden width must be >= 1", t.line());
    }
    if (input_width < 1)
        throw ParseError("input width must be >= 1", t.line());
    t.expect("dropout_rate");
    const double rate = t.number("dropout rate");
    if (!(rate >= 0 && rate < 1))
        throw ParseError("dropout rate must lie in [0, 1)", t.line());

    LstmStack m = LstmStack::zeros(input_width, hidden, rate);
    for (std::size_t l = 0; l < n_layers; ++l) {
        t.expect("layer");
        if (t.count("layer index") != l)
            throw ParseError("layers out of order", t.line());
        auto& p = m.layers[l];
        for (std::size_t g = 0; g < kGateCount; ++g)
            read_matrix(t, "w", g, p.w[g]);
        for (std::size_t g = 0; g < kGateCount; ++g)
            read_matrix(t, "wr", g, p.wr[g]);
        for (std::size_t g = 0; g < kGateCount; ++g) {
            t.expect("b");
            t.expect(kGateNames[g]);
            read_vector(t, p.b[g], "bias");
        }
    }
    t.expect("fc_w");
    read_vector(t, m.fc_w, "fc_w");
    t.expect("fc_b");
    m.fc_b = t.number("fc_b");
    t.expect("post_fir");
    const auto fir_len = t.count("post_fir length");
    if (fir_len < 1)
        throw ParseError("post_fir needs at least one tap", t.line());
    m.post_fir.assign(fir_len, 0.0);
    for (auto& v : m.post_fir)
        v = t.number("post_fir tap");
    t.expect("end");
    if (!t.at_end())
        throw ParseError("unexpected content after 'end'", t.line());
    m.validate();
    return m;
}

LstmStack load_model(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open model file '" + path + "'");
    return load_model(f);
}

}  // namespace lstmeq
