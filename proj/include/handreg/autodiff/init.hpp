#pragma once

#include <cmath>

#include "handreg/autodiff/tensor.hpp"
#include "handreg/common/random.hpp"

namespace handreg::ad {

/// Uniform in +-sqrt(6 / fan_in), suited to layers followed by relu.
inline Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::parameter(std::move(shape), std::move(v));
}

inline Tensor zeros_parameter(Shape shape) {
  const std::size_t n = numel(shape);
  return Tensor::parameter(std::move(shape), std::vector<double>(n, 0.0));
}

}  // namespace handreg::ad
