#include "handreg/common/error.hpp"

namespace handreg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidCamera: return "InvalidCamera";
    case ErrorCode::PointBehindCamera: return "PointBehindCamera";
    case ErrorCode::OutsideFov: return "OutsideFov";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::OutsideImage: return "OutsideImage";
    case ErrorCode::DegenerateBox: return "DegenerateBox";
    case ErrorCode::NearParallelRays: return "NearParallelRays";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateBone: return "DegenerateBone";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonScalarLoss: return "NonScalarLoss";
    case ErrorCode::DoubleBackward: return "DoubleBackward";
    case ErrorCode::AllMasked: return "AllMasked";
    case ErrorCode::EmptyRender: return "EmptyRender";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoConvergence:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::NearParallelRays:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::NonScalarLoss:
    case ErrorCode::DoubleBackward:
      return 3;
    default:
      return 2;
  }
}

}  // namespace handreg
