#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lht {

enum class ErrorCode {
  // hierarchy
  OrphanClass,
  ChildlessParent,
  NonDecreasingSizes,
  IndexOutOfRange,
  InvalidLevel,
  // diffcore
  ShapeMismatch,
  NumericalError,
  NotOnSimplex,
  NotOneHot,
  // model / losses
  ModeMismatch,
  InvalidChain,
  NegativeLambda,
  HierarchyMismatch,
  // training
  StepOutOfRange,
  InvalidConfig,
  // data / io
  InvalidScales,
  ParseError,
  InconsistentChain,
  DimensionMismatch,
  IoError,
  // verify
  NotConverged,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lht
