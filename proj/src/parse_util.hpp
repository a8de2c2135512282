#pragma once

#include <cmath>
#include <cstdlib>
#include <string>

namespace lstmeq::detail {

/// Parses the whole token as a finite double. Subnormals are accepted.
inline bool parse_double(const std::string& token, double& out)
{
    if (token.empty())
        return false;
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size() || !std::isfinite(v))
        return false;
    out = v;
    return true;
}

}  // namespace lstmeq::detail
