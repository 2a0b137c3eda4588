#pragma once

#include <stdexcept>
#include <string>

namespace mieval {

enum class ErrorKind {
  invalid_input,    // malformed data or schema
  config,           // invalid configuration
  numerical,        // singular system, separation, non-finite fit
  convergence,      // iteration cap reached
  infeasible,       // operation cannot be carried out on this data
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace mieval
