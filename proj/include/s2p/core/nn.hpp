#pragma once

#include <string>
#include <utility>

#include "s2p/core/autograd.hpp"
#include "s2p/core/rng.hpp"

namespace s2p {

// ---- init ----

template <typename S>
void init_normal(TensorT<S>& t, Rng& rng, S stddev) {
  for (auto& x : t.data) x = (S)rng.normal() * stddev;
}

/// Orthogonal init of a [rows,cols] matrix (QR of a Gaussian), scaled by gain.
template <typename S>
void init_orthogonal(TensorT<S>& t, int rows, int cols, Rng& rng, S gain = S(1)) {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  bool wide = rows < cols;
  int n = wide ? cols : rows, m = wide ? rows : cols;
  Mat a(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = (S)rng.normal();
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(n, m);
  auto rdiag = qr.matrixQR().diagonal();
  for (int j = 0; j < m; ++j)
    if (rdiag(j) < S(0)) q.col(j) = -q.col(j);
  auto out = t.mat(rows, cols);
  if (wide)
    out = gain * q.transpose();
  else
    out = gain * q;
}

// ---- parameter registry ----

template <typename S>
struct ParamT {
  std::string name;
  VarT<S> var;
};

/// Owns nothing heavy: names + shared handles to trainable leaves, plus
/// shared handles to persistent (non-trainable) buffers. Modules register at
/// construction; checkpoints and optimizers walk these lists. Everything is
/// held by shared_ptr so modules stay valid when stored inside containers
/// that move them.
template <typename S>
struct ParamStoreT {
  std::vector<ParamT<S>> params;
  std::vector<std::pair<std::string, std::shared_ptr<TensorT<S>>>> buffers;

  VarT<S> add(std::string name, TensorT<S> init) {
    auto v = leaf(std::move(init), true);
    params.push_back({std::move(name), v});
    return v;
  }
  std::shared_ptr<TensorT<S>> add_buffer(std::string name, TensorT<S> init) {
    auto t = std::make_shared<TensorT<S>>(std::move(init));
    buffers.emplace_back(std::move(name), t);
    return t;
  }
  void zero_grad() {
    for (auto& p : params) p.var->zero_grad();
  }
  int64_t count() const {
    int64_t n = 0;
    for (auto& p : params) n += p.var->val.numel();
    return n;
  }
  VarT<S> find(const std::string& name) const {
    for (auto& p : params)
      if (p.name == name) return p.var;
    throw std::out_of_range("param not found: " + name);
  }
};

/// Scoped inference mode: clears needs_grad on every parameter so forward
/// passes skip building backprop closures; restores on destruction.
template <typename S>
struct EvalGuardT {
  ParamStoreT<S>& ps;
  explicit EvalGuardT(ParamStoreT<S>& ps_) : ps(ps_) {
    for (auto& p : ps.params) p.var->needs_grad = false;
  }
  ~EvalGuardT() {
    for (auto& p : ps.params) p.var->needs_grad = true;
  }
};

template <typename S>
S grad_global_norm(const ParamStoreT<S>& ps) {
  double acc = 0;
  for (auto& p : ps.params)
    if (p.var->grad.numel()) acc += (double)p.var->grad.vec().squaredNorm();
  return (S)std::sqrt(acc);
}

template <typename S>
void clip_grad_norm(ParamStoreT<S>& ps, S max_norm) {
  S g = grad_global_norm(ps);
  if (g > max_norm && g > S(0)) {
    S f = max_norm / g;
    for (auto& p : ps.params)
      if (p.var->grad.numel()) p.var->grad.vec() *= f;
  }
}

// ---- layers ----

template <typename S>
struct LinearLayerT {
  VarT<S> w, b;  // w stored [in,out]

  LinearLayerT() = default;
  LinearLayerT(ParamStoreT<S>& ps, const std::string& name, int in, int out, Rng& rng,
               S gain = S(1), S bias_init = S(0)) {
    TensorT<S> wt({in, out});
    init_orthogonal(wt, in, out, rng, gain);
    w = ps.add(name + ".w", std::move(wt));
    b = ps.add(name + ".b", TensorT<S>({out}, bias_init));
  }
  VarT<S> operator()(const VarT<S>& x) const { return linear(x, w, b); }
};

/// Conv layer; optional spectral normalization (one power-iteration step per
/// train step via power_iterate(); u/v are frozen buffers otherwise, so the
/// forward pass stays a deterministic function of the parameters).
template <typename S>
struct Conv2dLayerT {
  VarT<S> w, b;  // w [Co,Ci,kh,kw]
  int stride = 1, pad = 0;
  bool spectral = false;
  std::shared_ptr<TensorT<S>> u, v;  // power-iteration state, [Co] and [Ci*kh*kw]

  Conv2dLayerT() = default;
  Conv2dLayerT(ParamStoreT<S>& ps, const std::string& name, int ci, int co, int k,
               int stride_, int pad_, Rng& rng, bool spectral_ = false, S gain = S(1))
      : stride(stride_), pad(pad_), spectral(spectral_) {
    TensorT<S> wt({co, ci, k, k});
    init_orthogonal(wt, co, ci * k * k, rng, gain);
    w = ps.add(name + ".w", std::move(wt));
    b = ps.add(name + ".b", TensorT<S>({co}));
    if (spectral) {
      TensorT<S> u0({co});
      init_normal(u0, rng, S(1));
      u0.vec().normalize();
      u = ps.add_buffer(name + ".sn_u", std::move(u0));
      v = ps.add_buffer(name + ".sn_v", TensorT<S>({ci * k * k}));
      power_iterate();  // settle v against the initial weight
    }
  }

  void power_iterate() {
    if (!spectral) return;
    int co = w->val.dim(0);
    int cik = (int)(w->val.numel() / co);
    auto wm = w->val.mat(co, cik);
    v->vec().noalias() = wm.transpose() * u->vec();
    S nv = v->vec().norm();
    if (nv > S(0)) v->vec() /= nv;
    u->vec().noalias() = wm * v->vec();
    S nu = u->vec().norm();
    if (nu > S(0)) u->vec() /= nu;
  }

  VarT<S> weight() const {
    if (!spectral) return w;
    int co = w->val.dim(0);
    int cik = (int)(w->val.numel() / co);
    auto w2 = reshape(w, {co, cik});
    auto vc = constant(v->reshaped({cik, 1}));
    auto uc = constant(u->reshaped({1, co}));
    auto sigma = matmul(uc, matmul(w2, vc));  // [1,1]
    auto inv = div(constant(TensorT<S>({1, 1}, S(1))), sigma);
    auto wn = scale(w2, reshape(inv, {1}));
    return reshape(wn, w->val.shape);
  }

  VarT<S> operator()(const VarT<S>& x) const {
    return conv2d(x, weight(), b, stride, pad);
  }
};

/// Small fully connected stack with a fixed activation between layers.
template <typename S>
struct MlpT {
  std::vector<LinearLayerT<S>> layers;
  S lrelu_slope = S(-1);  // <0 => relu

  MlpT() = default;
  MlpT(ParamStoreT<S>& ps, const std::string& name, int in, std::vector<int> hidden,
       int out, Rng& rng, S out_gain = S(1)) {
    int prev = in;
    int idx = 0;
    for (int h : hidden) {
      layers.emplace_back(ps, name + ".fc" + std::to_string(idx++), prev, h, rng,
                          (S)std::sqrt(2.0));
      prev = h;
    }
    layers.emplace_back(ps, name + ".fc" + std::to_string(idx), prev, out, rng, out_gain);
  }
  VarT<S> operator()(VarT<S> x) const {
    for (size_t i = 0; i + 1 < layers.size(); ++i) {
      x = layers[i](x);
      x = lrelu_slope < S(0) ? relu(x) : lrelu(x, lrelu_slope);
    }
    return layers.back()(x);
  }
};

/// Column-wise concat of [B,Di] matrices via the channel-concat kernel.
template <typename S>
VarT<S> concat_cols(const std::vector<VarT<S>>& xs) {
  int B = xs[0]->val.dim(0), tot = 0;
  std::vector<VarT<S>> r;
  for (auto& x : xs) {
    r.push_back(reshape(x, {B, x->val.dim(1), 1, 1}));
    tot += x->val.dim(1);
  }
  return reshape(concat_c(r), {B, tot});
}

}  // namespace s2p
