#pragma once

#include <string>

namespace cavio {

// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite.
// Locale-independent, so exports are byte-reproducible.
std::string format_double(double v);

}  // namespace cavio
