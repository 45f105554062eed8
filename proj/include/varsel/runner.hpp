#pragma once

#include <optional>
#include <string>
#include <vector>

#include "varsel/dataset.hpp"
#include "varsel/errors.hpp"
#include "varsel/program.hpp"

namespace varsel {

// Uniform execution of candidates. Dsl programs evaluate in-process (a pure
// call); external programs run as a child process that receives theta as CSV
// on stdin and must answer with a dataset CSV on stdout, exit code 0.
// Failures: Timeout (wall clock), NonZeroExit (stderr captured),
// MalformedOutput (output breaks dataset rules), OutputTooLarge.

Dataset run(const Program& program, const InputSpace& theta, const RunLimits& limits);

struct RunOutcome {
  bool ok = false;
  std::optional<Dataset> data;
  Errc code = Errc::MalformedOutput;
  std::string message;

  const Dataset& value() const { return *data; }
};

/// run() with errors folded into the outcome instead of thrown.
RunOutcome try_run(const Program& program, const InputSpace& theta,
                   const RunLimits& limits) noexcept;

/// Runs every program, concurrently up to `jobs` (0 = OpenMP default).
/// Results keep the input order, so output is deterministic regardless of
/// completion order, and one failing candidate never disturbs the others.
std::vector<RunOutcome> run_all(const std::vector<Program>& programs,
                                const InputSpace& theta, const RunLimits& limits,
                                int jobs = 0);

}  // namespace varsel
