#include "lht/error.hpp"

namespace lht {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OrphanClass: return "OrphanClass";
    case ErrorCode::ChildlessParent: return "ChildlessParent";
    case ErrorCode::NonDecreasingSizes: return "NonDecreasingSizes";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidLevel: return "InvalidLevel";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NumericalError: return "NumericalError";
    case ErrorCode::NotOnSimplex: return "NotOnSimplex";
    case ErrorCode::NotOneHot: return "NotOneHot";
    case ErrorCode::ModeMismatch: return "ModeMismatch";
    case ErrorCode::InvalidChain: return "InvalidChain";
    case ErrorCode::NegativeLambda: return "NegativeLambda";
    case ErrorCode::HierarchyMismatch: return "HierarchyMismatch";
    case ErrorCode::StepOutOfRange: return "StepOutOfRange";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidScales: return "InvalidScales";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InconsistentChain: return "InconsistentChain";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NotConverged: return "NotConverged";
  }
  return "Unknown";
}

}  // namespace lht
