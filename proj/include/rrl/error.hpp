#pragma once

#include <stdexcept>
#include <string>

namespace rrl {

// Raised for every recoverable failure: bad input files, shape mismatches,
// incompatible artifacts. The C API traps these at the library boundary.
class Error : public std::runtime_error {
 public:
  explicit Error(std::string msg) : std::runtime_error(std::move(msg)) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace rrl
