#pragma once

#include <stdexcept>
#include <string>

namespace glrt {

enum class ErrorKind {
  NonFinite,
  Overflow,
  ShapeMismatch,
  EmptyData,
  EmptySamples,
  BadRank,
  NotSymmetric,
  IndexMismatch,
  SingularHessian,
  SpanDeficient,
  NonConvergence,
  Infeasible,
  BadConfidence,
  CaseMismatch,
  BadIndex,
  BadBudget,
  TooFewValues,
  BadConfig,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyData: return "EmptyData";
    case ErrorKind::EmptySamples: return "EmptySamples";
    case ErrorKind::BadRank: return "BadRank";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::IndexMismatch: return "IndexMismatch";
    case ErrorKind::SingularHessian: return "SingularHessian";
    case ErrorKind::SpanDeficient: return "SpanDeficient";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::BadConfidence: return "BadConfidence";
    case ErrorKind::CaseMismatch: return "CaseMismatch";
    case ErrorKind::BadIndex: return "BadIndex";
    case ErrorKind::BadBudget: return "BadBudget";
    case ErrorKind::TooFewValues: return "TooFewValues";
    case ErrorKind::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

/// Library-wide exception; `kind()` identifies the failure class so callers
/// can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace glrt
