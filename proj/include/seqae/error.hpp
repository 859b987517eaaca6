#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace seqae {

enum class ErrorKind {
  InvalidInput,
  EmptySequence,
  InsufficientData,
  VocabularyMismatch,
  TrainingDiverged,
  InvalidConfig,
  ConvergenceFailure,
  UndefinedMetric,
  InvalidTable,
  Truncation,
  Io,
  Format,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::EmptySequence: return "empty-sequence";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::VocabularyMismatch: return "vocabulary-mismatch";
    case ErrorKind::TrainingDiverged: return "training-diverged";
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::ConvergenceFailure: return "convergence-failure";
    case ErrorKind::UndefinedMetric: return "undefined-metric";
    case ErrorKind::InvalidTable: return "invalid-table";
    case ErrorKind::Truncation: return "truncation";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
  }
  return "unknown";
}

/// Process exit status used by the CLI for each error category.
constexpr int exit_code(ErrorKind kind) { return 10 + static_cast<int>(kind); }

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool cond, ErrorKind kind, const std::string& message) {
  if (!cond) throw Error(kind, message);
}

}  // namespace seqae
