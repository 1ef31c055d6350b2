#pragma once

#include <string>

namespace frn {

/// Shortest decimal text that parses back to exactly `value` ('.' separator,
/// independent of the global locale). NaN and infinities print as nan/inf/-inf.
std::string format_double(double value);

}  // namespace frn
