#pragma once

#include "lstmeq/error.hpp"
#include "lstmeq/lstm.hpp"

#include <iosfwd>
#include <string>

namespace lstmeq {

/// Parameter ROM text format, version 1:
///
///     lstmeq-parameter-rom
///     version 1
///     layers <L>
///     input_width <n>
///     hidden <h_1> ... <h_L>
///     dropout_rate <p>
///     layer <l>                       (repeated for l = 0..L-1)
///       w <gate> <rows> <cols>        gates f, i, cs, o; one matrix row per line
///       wr <gate> <rows> <cols>
///       b <gate> <len>
///     fc_w <len>
///     fc_b <value>
///     post_fir <len>
///     end
///
/// Numbers are written with 17 significant digits so a load reproduces every
/// double exactly.
inline constexpr int kModelFormatVersion = 1;

class UnsupportedVersionError : public ParseError {
public:
    using ParseError::ParseError;
};

void save_model(std::ostream& out, const LstmStack& m);
void save_model(const std::string& path, const LstmStack& m);

LstmStack load_model(std::istream& in);
LstmStack load_model(const std::string& path);

}  // namespace lstmeq
