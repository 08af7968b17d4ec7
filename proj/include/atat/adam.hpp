#pragma once

#include <cmath>
#include <vector>

#include "atat/graph.hpp"

namespace atat {

// Bias-corrected Adam over a ParameterStore; moment slots follow registry
// order. Non-trainable entries (batch-norm running stats) are skipped.
template <class S>
struct AdamState {
  S lr = S(1e-4);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
  long step = 0;
  std::vector<Tensor<S>> m, v;

  explicit AdamState(S lr_ = S(1e-4)) : lr(lr_) {}
};

template <class S>
void adam_step(ParameterStore<S>& params, AdamState<S>& st) {
  require(st.lr > S(0), Errc::InvalidConfig, "adam lr must be positive");
  require(st.beta1 > S(0) && st.beta1 < S(1) && st.beta2 > S(0) && st.beta2 < S(1),
          Errc::InvalidConfig, "adam betas must be in (0,1)");
  if (st.m.empty()) {
    for (size_t i = 0; i < params.size(); ++i) {
      st.m.push_back(Tensor<S>::zeros(params.at(i).value.shape()));
      st.v.push_back(Tensor<S>::zeros(params.at(i).value.shape()));
    }
  }
  require(st.m.size() == params.size(), Errc::ShapeError, "adam slot count mismatch");
  ++st.step;
  const S bc1 = S(1) - std::pow(st.beta1, static_cast<S>(st.step));
  const S bc2 = S(1) - std::pow(st.beta2, static_cast<S>(st.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter<S>& p = params.at(i);
    if (!p.trainable) continue;
    require(st.m[i].same_shape(p.value), Errc::ShapeError, "adam moment shape mismatch");
    auto& m = st.m[i].array();
    auto& v = st.v[i].array();
    const auto& gr = p.grad.array();
    m = st.beta1 * m + (S(1) - st.beta1) * gr;
    v = st.beta2 * v + (S(1) - st.beta2) * gr * gr;
    p.value.array() -= st.lr * (m / bc1) / ((v / bc2).sqrt() + st.eps);
  }
}

}  // namespace atat
