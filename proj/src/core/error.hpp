#pragma once

#include <stdexcept>
#include <string>

namespace scnn {

// Error classes map 1:1 onto the C API status codes and, through them,
// onto the CLI exit-code table.
enum class ErrorCode {
  config = 2,
  data = 3,
  numeric = 4,
  gradcheck = 5,
  shape = 6,
  format = 7,
  state = 8,
  io = 9,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

} // namespace scnn
