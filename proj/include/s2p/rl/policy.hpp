#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "s2p/core/nn.hpp"
#include "s2p/core/rng.hpp"

namespace s2p {

/// Hard elementwise clamp; gradient passes unchanged inside [lo,hi], zero outside.
template <typename S>
VarT<S> clamp_v(const VarT<S>& x, double lo, double hi) {
  return detail::unary(
      x,
      [lo, hi](S v) { return v < (S)lo ? (S)lo : (v > (S)hi ? (S)hi : v); },
      [lo, hi](S v, S) { return (v >= (S)lo && v <= (S)hi) ? S(1) : S(0); });
}

constexpr double kLogStdMin = -10.0;
constexpr double kLogStdMax = 2.0;
/// Margin keeping emitted actions (and atanh of stored actions) strictly inside (-1,1).
constexpr double kActionMargin = 1e-6;
constexpr double kAtanhMargin = 1e-5;

/// Tanh-squashed diagonal Gaussian policy: a = tanh(mu + sigma * eps).
/// Two relu hidden layers; separate linear heads for mean and log-std.
/// Log-std is hard-clamped to [kLogStdMin, kLogStdMax].
template <typename S>
struct SquashedGaussianPolicyT {
  int ns = 0, na = 0;
  LinearLayerT<S> fc0, fc1, mu_head, ls_head;

  SquashedGaussianPolicyT() = default;
  SquashedGaussianPolicyT(ParamStoreT<S>& ps, const std::string& name, int ns_, int na_,
                          int hidden, Rng& rng)
      : ns(ns_), na(na_) {
    if (ns_ < 1 || na_ < 1 || hidden < 1)
      throw std::invalid_argument("policy: ns, na and hidden width must be positive");
    fc0 = LinearLayerT<S>(ps, name + ".fc0", ns_, hidden, rng, (S)std::sqrt(2.0));
    fc1 = LinearLayerT<S>(ps, name + ".fc1", hidden, hidden, rng, (S)std::sqrt(2.0));
    mu_head = LinearLayerT<S>(ps, name + ".mu", hidden, na_, rng, (S)0.01);
    ls_head = LinearLayerT<S>(ps, name + ".ls", hidden, na_, rng, (S)0.01, (S)-1.0);
  }

  /// (mu [B,na], log_std [B,na]) with log_std clamped to the fixed band.
  std::pair<VarT<S>, VarT<S>> dist_params(const VarT<S>& s) const {
    auto h = relu(fc1(relu(fc0(s))));
    return {mu_head(h), clamp_v(ls_head(h), kLogStdMin, kLogStdMax)};
  }

  struct Draw {
    VarT<S> action;    // [B,na], in (-1,1)
    VarT<S> log_prob;  // [B]
    VarT<S> pre_tanh;  // [B,na]
  };

  /// Reparameterized sample a = tanh(mu + sigma*eps) with its log-density.
  /// log pi(a) = sum_d [ -eps^2/2 - log_std - log(2 pi)/2 - log(1 - tanh(u)^2) ],
  /// with the correction evaluated stably as 2*(log 2 - u - softplus(-2u)).
  Draw sample(const VarT<S>& s, Rng& rng) const {
    auto [mu, ls] = dist_params(s);
    int B = mu->val.dim(0);
    TensorT<S> eps({B, na});
    for (int64_t i = 0; i < eps.numel(); ++i) eps[i] = (S)rng.normal();
    auto epsv = constant(eps);
    auto u = add(mu, mul(exp_v(ls), epsv));
    auto a = tanh_v(u);
    // Per-dim log-density; the -eps^2/2 term is parameter-free under
    // reparameterization (u - mu == sigma*eps identically), so it enters as a
    // constant without changing any gradient.
    TensorT<S> base({B, na});
    for (int64_t i = 0; i < base.numel(); ++i)
      base[i] = (S)(-0.5 * (double)eps[i] * (double)eps[i] - 0.5 * std::log(2.0 * M_PI) -
                    2.0 * std::log(2.0));
    auto per_dim = add(constant(base),
                       sub(add(mul_c(u, (S)2), mul_c(softplus(mul_c(u, (S)-2)), (S)2)), ls));
    return {a, sum_rows(per_dim), u};
  }

  /// Log-density of given (already squashed) actions, as a graph over the
  /// policy parameters. Actions are clamped away from +-1 before atanh.
  VarT<S> log_prob(const VarT<S>& s, const TensorT<S>& actions) const {
    auto [mu, ls] = dist_params(s);
    int B = mu->val.dim(0);
    if (actions.dim(0) != B || actions.dim(1) != na)
      throw std::invalid_argument("policy log_prob: action batch shape mismatch");
    TensorT<S> u(actions.shape), corr(actions.shape);
    for (int64_t i = 0; i < u.numel(); ++i) {
      double av = std::clamp((double)actions[i], -1.0 + kAtanhMargin, 1.0 - kAtanhMargin);
      double uv = std::atanh(av);
      u[i] = (S)uv;
      corr[i] = (S)(2.0 * (std::log(2.0) - uv - std::log1p(std::exp(-2.0 * uv))));
    }
    auto uc = constant(u);
    auto z = mul(sub(uc, mu), exp_v(neg(ls)));
    auto per_dim = sub(mul_c(square(z), (S)-0.5),
                       add(ls, add_c(constant(corr), (S)(0.5 * std::log(2.0 * M_PI)))));
    return sum_rows(per_dim);
  }
};

/// Clamp emitted env actions strictly inside (-1,1).
template <typename S>
inline double squash_env_action(S a) {
  return std::clamp((double)a, -1.0 + kActionMargin, 1.0 - kActionMargin);
}

}  // namespace s2p
