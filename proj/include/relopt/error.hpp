#pragma once

#include <stdexcept>
#include <string>

namespace relopt {

/// Malformed input: bad scene files, invalid layouts, out-of-range parameters.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The optimizer produced a non-finite energy or gradient.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw DataError(message);
}

}  // namespace relopt
