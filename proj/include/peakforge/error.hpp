#pragma once

#include <stdexcept>
#include <string>

namespace peakforge {

// Bad arguments: dimension mismatches, out-of-domain sites, invalid parameters.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Singular systems, solver breakdowns, ill-posed inputs.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}
}  // namespace detail

}  // namespace peakforge
