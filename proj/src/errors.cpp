#include "varsel/errors.hpp"

namespace varsel {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteCell: return "NonFiniteCell";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::DuplicateOutput: return "DuplicateOutput";
    case Errc::UnknownColumn: return "UnknownColumn";
    case Errc::NumericError: return "NumericError";
    case Errc::Timeout: return "Timeout";
    case Errc::NonZeroExit: return "NonZeroExit";
    case Errc::MalformedOutput: return "MalformedOutput";
    case Errc::OutputTooLarge: return "OutputTooLarge";
    case Errc::EmptySupport: return "EmptySupport";
    case Errc::RangeError: return "RangeError";
    case Errc::BaseRunFailed: return "BaseRunFailed";
    case Errc::TargetShapeMismatch: return "TargetShapeMismatch";
    case Errc::GeneratorFailed: return "GeneratorFailed";
    case Errc::BaseNotDsl: return "BaseNotDsl";
    case Errc::ExhaustedAttempts: return "ExhaustedAttempts";
    case Errc::EndpointUnavailable: return "EndpointUnavailable";
    case Errc::AllCandidatesRejected: return "AllCandidatesRejected";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IncompleteBundle: return "IncompleteBundle";
    case Errc::IoError: return "IoError";
  }
  return "Error";
}

}  // namespace varsel
