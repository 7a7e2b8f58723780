#include "faithtrace/error.hpp"

namespace faithtrace {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::InvalidClass: return "InvalidClass";
    case ErrorKind::KTooLarge: return "KTooLarge";
    case ErrorKind::EmptyBank: return "EmptyBank";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::CountMismatch: return "CountMismatch";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ZeroNorm: return "ZeroNorm";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::DegenerateDirection: return "DegenerateDirection";
    case ErrorKind::AllDegenerate: return "AllDegenerate";
    case ErrorKind::HttpError: return "HttpError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace faithtrace
