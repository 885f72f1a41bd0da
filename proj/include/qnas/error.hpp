#pragma once

#include <stdexcept>
#include <string>

namespace qnas {

// Process exit codes, shared between the library's error taxonomy and the CLI.
enum class ExitCode : int {
  Ok = 0,
  Internal = 1,
  Usage = 2,       // malformed input, bad flags, unreadable files
  Infeasible = 3,  // no candidate satisfies the latency constraint
  Coverage = 4,    // oracle (predictor / LUT) cannot cover a query
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

// ---- usage / input errors ----

struct MalformedEncoding : Error {
  explicit MalformedEncoding(const std::string& detail)
      : Error(ExitCode::Usage, "malformed encoding: " + detail) {}
};

struct OutOfRangeDigit : Error {
  OutOfRangeDigit(int stage, const std::string& detail)
      : Error(ExitCode::Usage, "encoding digit out of range at stage " + std::to_string(stage) +
                                   ": " + detail),
        stage(stage) {}
  int stage;
};

struct BadFormat : Error {
  explicit BadFormat(const std::string& detail) : Error(ExitCode::Usage, detail) {}
};

struct UnsupportedVersion : Error {
  UnsupportedVersion(const std::string& what_file, int got)
      : Error(ExitCode::Usage, what_file + ": unsupported format version " + std::to_string(got)) {}
};

struct IoError : Error {
  explicit IoError(const std::string& detail) : Error(ExitCode::Usage, detail) {}
};

// ---- oracle coverage errors ----

struct InsufficientSamples : Error {
  InsufficientSamples(const std::string& kind, const std::string& detail)
      : Error(ExitCode::Coverage, "no latency samples for kernel kind '" + kind + "' (" + detail + ")"),
        kind(kind) {}
  std::string kind;
};

struct MissingEntry : Error {
  explicit MissingEntry(const std::string& key)
      : Error(ExitCode::Coverage, "accuracy table has no entry for " + key) {}
};

// ---- search errors ----

struct InfeasibleConstraint : Error {
  explicit InfeasibleConstraint(const std::string& detail)
      : Error(ExitCode::Infeasible, "latency constraint infeasible: " + detail) {}
};

}  // namespace qnas
