#pragma once

#include <stdexcept>
#include <string>

namespace pel {

// Failure categories surfaced across the C API as status codes.
enum class ErrorCode {
  config = 1,        // bad configuration value or file
  shape,             // array length does not match the grid
  resolution,        // grid cannot resolve the requested scale
  cfl,               // explicit wave step too large for the grid
  nan_detected,      // non-finite sample appeared during stepping
  tracking_lost,     // no orthogonality root in the trust bracket
  degenerate,        // modulation denominator too close to zero
  not_ready,         // insufficient history for a centered quantity
  unsupported,       // index k outside the implemented regime
  io,                // file read/write failure
  invalid_argument,  // programmer error at the API boundary
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace pel
