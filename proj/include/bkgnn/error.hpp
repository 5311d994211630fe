#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bkgnn {

enum class Errc {
  InvalidNode,
  SelfLoopRejected,
  InvalidWeight,
  EmptyInput,
  InvalidParam,
  InvalidSeverity,
  GraphSaturated,
  MissingClusters,
  InvalidClusters,
  ShapeError,
  InvalidLabel,
  SplitInfeasible,
  MissingGraph,
  TrainingDiverged,
  ParseError,
  IoError,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidNode: return "InvalidNode";
    case Errc::SelfLoopRejected: return "SelfLoopRejected";
    case Errc::InvalidWeight: return "InvalidWeight";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::InvalidParam: return "InvalidParam";
    case Errc::InvalidSeverity: return "InvalidSeverity";
    case Errc::GraphSaturated: return "GraphSaturated";
    case Errc::MissingClusters: return "MissingClusters";
    case Errc::InvalidClusters: return "InvalidClusters";
    case Errc::ShapeError: return "ShapeError";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::SplitInfeasible: return "SplitInfeasible";
    case Errc::MissingGraph: return "MissingGraph";
    case Errc::TrainingDiverged: return "TrainingDiverged";
    case Errc::ParseError: return "ParseError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to a stable exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace bkgnn
