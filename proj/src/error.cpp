#include "mirrorfield/error.hpp"

namespace mirrorfield {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateRays: return "DegenerateRays";
    case ErrorKind::DegeneratePlane: return "DegeneratePlane";
    case ErrorKind::InsufficientAnnotations: return "InsufficientAnnotations";
    case ErrorKind::NonFiniteQuery: return "NonFiniteQuery";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Data: return "DataError";
    case ErrorKind::Io: return "IoError";
  }
  return "Error";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
      return 2;
    case ErrorKind::DegenerateRays:
    case ErrorKind::DegeneratePlane:
    case ErrorKind::NonFiniteQuery:
    case ErrorKind::NonFiniteGradient:
      return 4;
    case ErrorKind::InsufficientAnnotations:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::Data:
    case ErrorKind::Io:
      return 3;
  }
  return 1;
}

}  // namespace mirrorfield
