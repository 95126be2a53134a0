#pragma once

#include <string>

namespace occ {

// Fixed 9-significant-digit rendering used by every CSV writer.
std::string format_number(double value);

}  // namespace occ
