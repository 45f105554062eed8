#pragma once

#include <stdexcept>
#include <string>

namespace varsel {

// Every failure the library raises carries one of these codes so callers
// (and the CLI exit-code mapping) can branch without string matching.
enum class Errc {
  ShapeMismatch,
  NonFiniteCell,
  NonFiniteInput,
  SyntaxError,
  DuplicateOutput,
  UnknownColumn,
  NumericError,
  Timeout,
  NonZeroExit,
  MalformedOutput,
  OutputTooLarge,
  EmptySupport,
  RangeError,
  BaseRunFailed,
  TargetShapeMismatch,
  GeneratorFailed,
  BaseNotDsl,
  ExhaustedAttempts,
  EndpointUnavailable,
  AllCandidatesRejected,
  ConfigError,
  IncompleteBundle,
  IoError,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace varsel
