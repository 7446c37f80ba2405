#pragma once

#include <stdexcept>
#include <string>

namespace dpa {

// A forward op or optimizer produced a non-finite value.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dpa
