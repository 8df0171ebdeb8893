#pragma once

#include <stdexcept>
#include <string>

namespace msntucf {

enum class ErrorKind {
  Config,     // invalid hyperparameters or run configuration
  Data,       // malformed or inconsistent input data
  Shape,      // tensor shape mismatch inside the math core
  Usage,      // API misuse (empty batch, non-scalar backward, ...)
  Numerical,  // divergence, undefined metric
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace msntucf
