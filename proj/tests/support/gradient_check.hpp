#pragma once

#include <functional>
#include <vector>

#include "handreg/autodiff/tensor.hpp"
#include "support/finite_difference.hpp"

namespace handreg::testing {

using GraphFunction = std::function<ad::Tensor(ad::Graph&, const ad::Tensor&)>;

/// Relative error between the engine's gradient of the scalar f(x) and
/// central differences of the forward value.
inline double graph_gradient_error(const GraphFunction& f, const ad::Shape& shape,
                                   std::vector<double> x, double h = 1e-5) {
  std::vector<double> analytic;
  {
    ad::Graph g;
    const ad::Tensor in = g.input(shape, x, true);
    const ad::Tensor loss = f(g, in);
    g.backward(loss);
    analytic.assign(in.grad().begin(), in.grad().end());
  }
  const auto numeric = central_difference(
      [&] {
        ad::Graph g;
        return f(g, g.input(shape, x)).item();
      },
      x, h);
  return relative_error(analytic, numeric);
}

/// Random fixed weights so that sum(w * y) exercises every output entry.
inline ad::Tensor weighted_sum(ad::Graph& g, const ad::Tensor& y, std::uint64_t seed) {
  std::vector<double> w(y.numel());
  std::uint64_t s = seed * 2654435761u + 1;
  for (auto& v : w) {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    v = static_cast<double>(s >> 11) * 0x1.0p-53 - 0.5;
  }
  return g.sum(g.mul(y, g.input(y.shape(), std::move(w))));
}

}  // namespace handreg::testing
