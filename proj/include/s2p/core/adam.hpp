#pragma once

#include "s2p/core/nn.hpp"

namespace s2p {

/// Adam with bias correction. Moment buffers are exposed for checkpointing;
/// they are lazily sized against the parameter list on first step.
template <typename S>
struct AdamT {
  S lr = S(1e-3), beta1 = S(0.9), beta2 = S(0.999), eps = S(1e-8);
  int64_t t = 0;
  std::vector<TensorT<S>> m, v;

  AdamT() = default;
  AdamT(S lr_, S b1, S b2) : lr(lr_), beta1(b1), beta2(b2) {}

  void ensure(const ParamStoreT<S>& ps) {
    if (m.size() == ps.params.size()) return;
    m.clear();
    v.clear();
    for (auto& p : ps.params) {
      m.push_back(TensorT<S>::zeros(p.var->val.shape));
      v.push_back(TensorT<S>::zeros(p.var->val.shape));
    }
  }

  void step(ParamStoreT<S>& ps) {
    ensure(ps);
    ++t;
    S bc1 = S(1) - (S)std::pow((double)beta1, (double)t);
    S bc2 = S(1) - (S)std::pow((double)beta2, (double)t);
    for (size_t i = 0; i < ps.params.size(); ++i) {
      auto& p = ps.params[i].var;
      if (!p->grad.numel()) continue;
      auto g = p->grad.vec();
      m[i].vec() = beta1 * m[i].vec() + (S(1) - beta1) * g;
      v[i].vec().array() = beta2 * v[i].vec().array() + (S(1) - beta2) * g.array().square();
      p->val.vec().array() -=
          lr * (m[i].vec().array() / bc1) / ((v[i].vec().array() / bc2).sqrt() + eps);
    }
  }
};

}  // namespace s2p
