#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace handreg {

enum class ErrorCode {
  InvalidArgument,
  // geometry
  InvalidCamera,
  PointBehindCamera,
  OutsideFov,
  NoConvergence,
  OutsideImage,
  DegenerateBox,
  NearParallelRays,
  // metadata
  EmptyDataset,
  // hand model
  BudgetTooSmall,
  DimensionMismatch,
  DegenerateBone,
  // autodiff
  ShapeMismatch,
  NonScalarLoss,
  DoubleBackward,
  // losses
  AllMasked,
  // synth
  EmptyRender,
  // harness / io
  EmptyInput,
  InvalidConfig,
  Io,
  Format,
  NonFiniteLoss,
};

std::string_view to_string(ErrorCode code);

/// Exit-code class of an error: 2 for data/IO problems, 3 for numeric failures.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define HANDREG_THROW_IF(cond, code, msg)   \
  do {                                      \
    if (cond) {                             \
      throw ::handreg::Error((code), (msg)); \
    }                                       \
  } while (0)

}  // namespace handreg
