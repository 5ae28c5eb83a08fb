#include "handreg/autodiff/optimizer.hpp"

#include <cmath>

#include "handreg/common/error.hpp"

namespace handreg::ad {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamHyper& hyper) {
  HANDREG_THROW_IF(params.size() != grads.size(), ErrorCode::ShapeMismatch,
                   "adam: " + std::to_string(params.size()) + " params vs " +
                       std::to_string(grads.size()) + " grads");
  if (state.m.empty() && state.step == 0) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  HANDREG_THROW_IF(state.m.size() != params.size(), ErrorCode::ShapeMismatch,
                   "adam: state sized for " + std::to_string(state.m.size()) + " params");
  ++state.step;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= hyper.learning_rate * mhat / (std::sqrt(vhat) + hyper.epsilon);
  }
}

Adam::Adam(std::vector<Tensor> params, AdamHyper hyper)
    : params_(std::move(params)), states_(params_.size()), hyper_(hyper) {}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    adam_step(params_[i].value(), params_[i].grad(), states_[i], hyper_);
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace handreg::ad
