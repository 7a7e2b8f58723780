#pragma once

#include <stdexcept>
#include <string>

namespace faithtrace {

// Every failure the library can raise, by name. The split into validation
// vs runtime drives CLI exit codes (2 vs 1).
enum class ErrorKind {
  // validation / usage
  DimMismatch,
  InvalidClass,
  KTooLarge,
  EmptyBank,
  EmptyInput,
  CountMismatch,
  BadMagic,
  TruncatedFile,
  ParseError,
  InvalidArgument,
  // runtime / numeric
  ZeroNorm,
  NonFinite,
  SingularSystem,
  DegenerateDirection,
  AllDegenerate,
  HttpError,
  IoError,
};

enum class ErrorCategory { Validation, Runtime };

constexpr ErrorCategory category_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimMismatch:
    case ErrorKind::InvalidClass:
    case ErrorKind::KTooLarge:
    case ErrorKind::EmptyBank:
    case ErrorKind::EmptyInput:
    case ErrorKind::CountMismatch:
    case ErrorKind::BadMagic:
    case ErrorKind::TruncatedFile:
    case ErrorKind::ParseError:
    case ErrorKind::InvalidArgument:
      return ErrorCategory::Validation;
    default:
      return ErrorCategory::Runtime;
  }
}

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  ErrorCategory category() const { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

// CLI contract: 0 success, 1 runtime/numeric error, 2 usage/validation error.
constexpr int exit_code_for(ErrorKind kind) {
  return category_of(kind) == ErrorCategory::Validation ? 2 : 1;
}

}  // namespace faithtrace
