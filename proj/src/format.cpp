#include "surnn/format.hpp"

#include <charconv>

#include "surnn/error.hpp"

namespace surnn {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw NumericError("cannot format number");
  return std::string(buf, end);
}

}  // namespace surnn
