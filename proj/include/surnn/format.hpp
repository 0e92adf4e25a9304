#pragma once

#include <string>

namespace surnn {

// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace surnn
