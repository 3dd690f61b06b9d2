#pragma once

#include <stdexcept>
#include <string>

namespace mirrorfield {

enum class ErrorKind {
  DegenerateRays,
  DegeneratePlane,
  InsufficientAnnotations,
  NonFiniteQuery,
  NonFiniteGradient,
  ShapeMismatch,
  InvalidArgument,
  Config,
  Data,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// CLI exit code for an error kind: 2 config, 3 data, 4 numeric failure.
int exit_code(ErrorKind kind);

}  // namespace mirrorfield
