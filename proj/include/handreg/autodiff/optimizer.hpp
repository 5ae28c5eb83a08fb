#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "handreg/autodiff/tensor.hpp"

namespace handreg::ad {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update of a flat parameter buffer. The state is
/// sized on first use; later calls with a different size throw ShapeMismatch.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamHyper& hyper);

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamHyper hyper);

  /// Applies one update from the accumulated gradients, then zeroes them.
  void step();
  void zero_grad();

  const AdamHyper& hyper() const { return hyper_; }
  AdamHyper& hyper() { return hyper_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> states_;
  AdamHyper hyper_;
};

}  // namespace handreg::ad
