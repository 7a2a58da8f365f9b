#pragma once

#include <stdexcept>
#include <string>

namespace pgc {

// Malformed or out-of-range external input (files, records, specs).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values or failed numeric certificates.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pgc
