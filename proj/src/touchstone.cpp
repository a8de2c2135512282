// Touchstone v1 two-port reader.
//
// Supported: option line `# <unit> S <MA|DB|RI> R <ohms>`, `!` comments, data
// rows that may wrap across lines. Per-frequency order is N11 N21 N12 N22.

#include "lstmeq/channel.hpp"

#include "lstmeq/error.hpp"
#include "parse_util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <sstream>

namespace lstmeq {

namespace {

enum class Format { ma, db, ri };

std::string upper(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    return s;
}

struct Options {
    double freq_scale = 1e9;
    Format format = Format::ma;
    double impedance = 50.0;
};

Options parse_option_line(const std::string& text, std::size_t lineno)
{
    Options opt;
    std::istringstream ss(text.substr(1));
    std::string tok;
    while (ss >> tok) {
        const auto t = upper(tok);
        if (t == "HZ")
            opt.freq_scale = 1.0;
        else if (t == "KHZ")
            opt.freq_scale = 1e3;
        else if (t == "MHZ")
            opt.freq_scale = 1e6;
        else if (t == "GHZ")
            opt.freq_scale = 1e9;
        else if (t == "S")
            continue;
        else if (t == "MA")
            opt.format = Format::ma;
        else if (t == "DB")
            opt.format = Format::db;
        else if (t == "RI")
            opt.format = Format::ri;
        else if (t == "R") {
            std::string z;
            if (!(ss >> z))
                throw ParseError("option line: missing reference impedance after R", lineno);
            if (!detail::parse_double(z, opt.impedance) || !(opt.impedance > 0))
                throw ParseError("option line: bad reference impedance '" + z + "'", lineno);
        } else
            throw ParseError("option line: unsupported token '" + tok + "'", lineno);
    }
    return opt;
}

std::complex<double> to_complex(Format fmt, double a, double b)
{
    const double rad = b * std::numbers::pi / 180.0;
    switch (fmt) {
    case Format::ri:
        return {a, b};
    case Format::ma:
        return std::polar(a, rad);
    case Format::db:
        return std::polar(std::pow(10.0, a / 20.0), rad);
    }
    return {};
}

}  // namespace

SParameterSet parse_touchstone(std::istream& in)
{
    Options opt;
    bool have_options = false;
    SParameterSet sp;

    std::vector<double> row;
    std::size_t row_line = 0;
    std::string line;
    std::size_t lineno = 0;

    auto flush_row = [&](std::size_t at) {
        const double f = row[0] * opt.freq_scale;
        if (!sp.frequencies.empty() && !(f > sp.frequencies.back()))
            throw ParseError("frequencies must be strictly ascending", at);
        sp.frequencies.push_back(f);
        sp.s11.push_back(to_complex(opt.format, row[1], row[2]));
        sp.s21.push_back(to_complex(opt.format, row[3], row[4]));
        sp.s12.push_back(to_complex(opt.format, row[5], row[6]));
        sp.s22.push_back(to_complex(opt.format, row[7], row[8]));
        row.clear();
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (const auto bang = line.find('!'); bang != std::string::npos)
            line.erase(bang);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos)
            continue;
        if (line[first] == '#') {
            if (have_options)
                throw ParseError("duplicate option line", lineno);
            opt = parse_option_line(line.substr(first), lineno);
            have_options = true;
            continue;
        }
        std::istringstream ss(line);
        std::string tok;
        while (ss >> tok) {
            double v = 0;
            if (!detail::parse_double(tok, v))
                throw ParseError("non-numeric token '" + tok + "'", lineno);
            if (row.empty())
                row_line = lineno;
            row.push_back(v);
            if (row.size() == 9)
                flush_row(row_line);
        }
    }
    if (!row.empty())
        throw ParseError("incomplete data row (expected 9 values per frequency)", row_line);
    if (sp.frequencies.empty())
        throw ParseError("no data rows", 0);
    sp.reference_impedance = opt.impedance;
    return sp;
}

SParameterSet parse_touchstone_file(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw IoError("cannot open touchstone file '" + path + "'");
    return parse_touchstone(f);
}

}  // namespace lstmeq
