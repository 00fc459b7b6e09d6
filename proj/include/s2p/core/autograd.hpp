#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>

#include "s2p/core/tensor.hpp"

// Reverse-mode tape over TensorT. Ops build shared_ptr graphs; backward()
// walks nodes in reverse creation order. Shapes follow two conventions:
// [N,C,H,W] for feature maps, [rows,cols] for dense layers.

namespace s2p {

template <typename S>
struct NodeT;

template <typename S>
using VarT = std::shared_ptr<NodeT<S>>;

template <typename S>
struct NodeT {
  TensorT<S> val;
  TensorT<S> grad;
  bool needs_grad = false;
  int64_t id = 0;
  std::vector<VarT<S>> parents;
  std::function<void(NodeT<S>&)> backprop;

  void ensure_grad() {
    if (grad.numel() != val.numel()) grad = TensorT<S>::zeros(val.shape);
  }
  void zero_grad() {
    if (grad.numel()) grad.fill(S(0));
  }
  const Shape& shape() const { return val.shape; }
};

namespace detail {
inline int64_t next_node_id() {
  thread_local int64_t counter = 0;
  return ++counter;
}
}  // namespace detail

template <typename S>
VarT<S> leaf(TensorT<S> value, bool needs_grad = false) {
  auto n = std::make_shared<NodeT<S>>();
  n->val = std::move(value);
  n->needs_grad = needs_grad;
  n->id = detail::next_node_id();
  return n;
}

template <typename S>
VarT<S> constant(TensorT<S> value) {
  return leaf(std::move(value), false);
}

template <typename S, typename F>
VarT<S> make_node(TensorT<S> value, std::vector<VarT<S>> parents, F&& fn) {
  auto n = std::make_shared<NodeT<S>>();
  n->val = std::move(value);
  n->id = detail::next_node_id();
  for (auto& p : parents) n->needs_grad = n->needs_grad || p->needs_grad;
  n->parents = std::move(parents);
  if (n->needs_grad) n->backprop = std::forward<F>(fn);
  return n;
}

/// Backpropagate from a scalar root. Accumulates into leaf .grad fields.
template <typename S>
void backward(const VarT<S>& root) {
  if (root->val.numel() != 1) throw std::logic_error("backward: root must be scalar");
  std::vector<NodeT<S>*> order;
  std::unordered_set<NodeT<S>*> seen;
  std::vector<NodeT<S>*> stack{root.get()};
  while (!stack.empty()) {
    NodeT<S>* n = stack.back();
    stack.pop_back();
    if (!n->needs_grad || !seen.insert(n).second) continue;
    order.push_back(n);
    for (auto& p : n->parents) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(),
            [](const NodeT<S>* a, const NodeT<S>* b) { return a->id > b->id; });
  root->ensure_grad();
  root->grad.data[0] = S(1);
  for (NodeT<S>* n : order)
    if (n->backprop) n->backprop(*n);
}

template <typename S>
VarT<S> detach(const VarT<S>& x) {
  return constant(x->val);
}

// ---- elementwise binary ----

template <typename S>
void check_same_shape(const VarT<S>& a, const VarT<S>& b, const char* op) {
  if (a->val.shape != b->val.shape)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a->val.shape) + " vs " + shape_str(b->val.shape));
}

template <typename S>
VarT<S> add(const VarT<S>& a, const VarT<S>& b) {
  check_same_shape(a, b, "add");
  TensorT<S> out = a->val;
  out.vec() += b->val.vec();
  return make_node<S>(std::move(out), {a, b}, [](NodeT<S>& n) {
    for (auto& p : n.parents)
      if (p->needs_grad) {
        p->ensure_grad();
        p->grad.vec() += n.grad.vec();
      }
  });
}

template <typename S>
VarT<S> sub(const VarT<S>& a, const VarT<S>& b) {
  check_same_shape(a, b, "sub");
  TensorT<S> out = a->val;
  out.vec() -= b->val.vec();
  return make_node<S>(std::move(out), {a, b}, [](NodeT<S>& n) {
    if (n.parents[0]->needs_grad) {
      n.parents[0]->ensure_grad();
      n.parents[0]->grad.vec() += n.grad.vec();
    }
    if (n.parents[1]->needs_grad) {
      n.parents[1]->ensure_grad();
      n.parents[1]->grad.vec() -= n.grad.vec();
    }
  });
}

template <typename S>
VarT<S> mul(const VarT<S>& a, const VarT<S>& b) {
  check_same_shape(a, b, "mul");
  TensorT<S> out = a->val;
  out.vec().array() *= b->val.vec().array();
  return make_node<S>(std::move(out), {a, b}, [](NodeT<S>& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    if (a->needs_grad) {
      a->ensure_grad();
      a->grad.vec().array() += n.grad.vec().array() * b->val.vec().array();
    }
    if (b->needs_grad) {
      b->ensure_grad();
      b->grad.vec().array() += n.grad.vec().array() * a->val.vec().array();
    }
  });
}

template <typename S>
VarT<S> div(const VarT<S>& a, const VarT<S>& b) {
  check_same_shape(a, b, "div");
  TensorT<S> out = a->val;
  out.vec().array() /= b->val.vec().array();
  return make_node<S>(std::move(out), {a, b}, [](NodeT<S>& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    if (a->needs_grad) {
      a->ensure_grad();
      a->grad.vec().array() += n.grad.vec().array() / b->val.vec().array();
    }
    if (b->needs_grad) {
      b->ensure_grad();
      b->grad.vec().array() -=
          n.grad.vec().array() * n.val.vec().array() / b->val.vec().array();
    }
  });
}

// ---- scalar (compile-time constant) variants ----

template <typename S>
VarT<S> add_c(const VarT<S>& a, S c) {
  TensorT<S> out = a->val;
  out.vec().array() += c;
  return make_node<S>(std::move(out), {a}, [](NodeT<S>& n) {
    n.parents[0]->ensure_grad();
    n.parents[0]->grad.vec() += n.grad.vec();
  });
}

template <typename S>
VarT<S> mul_c(const VarT<S>& a, S c) {
  TensorT<S> out = a->val;
  out.vec() *= c;
  return make_node<S>(std::move(out), {a}, [c](NodeT<S>& n) {
    n.parents[0]->ensure_grad();
    n.parents[0]->grad.vec() += c * n.grad.vec();
  });
}

template <typename S>
VarT<S> neg(const VarT<S>& a) {
  return mul_c(a, S(-1));
}

/// y = x * s where s is a single-element variable (broadcast multiply).
template <typename S>
VarT<S> scale(const VarT<S>& x, const VarT<S>& s) {
  if (s->val.numel() != 1) throw std::invalid_argument("scale: s must be scalar");
  TensorT<S> out = x->val;
  out.vec() *= s->val.data[0];
  return make_node<S>(std::move(out), {x, s}, [](NodeT<S>& n) {
    auto& x = n.parents[0];
    auto& s = n.parents[1];
    if (x->needs_grad) {
      x->ensure_grad();
      x->grad.vec() += s->val.data[0] * n.grad.vec();
    }
    if (s->needs_grad) {
      s->ensure_grad();
      s->grad.data[0] += n.grad.vec().dot(x->val.vec());
    }
  });
}

// ---- elementwise unary ----

namespace detail {
template <typename S, typename FwdF, typename BwdF>
VarT<S> unary(const VarT<S>& a, FwdF&& f, BwdF&& dfdx) {
  TensorT<S> out(a->val.shape);
  for (int64_t i = 0; i < a->val.numel(); ++i) out[i] = f(a->val[i]);
  return make_node<S>(std::move(out), {a}, [dfdx](NodeT<S>& n) {
    auto& a = n.parents[0];
    a->ensure_grad();
    for (int64_t i = 0; i < n.val.numel(); ++i)
      a->grad[i] += n.grad[i] * dfdx(a->val[i], n.val[i]);
  });
}
}  // namespace detail

template <typename S>
VarT<S> relu(const VarT<S>& a) {
  return detail::unary(
      a, [](S x) { return x > S(0) ? x : S(0); },
      [](S x, S) { return x > S(0) ? S(1) : S(0); });
}

template <typename S>
VarT<S> lrelu(const VarT<S>& a, S slope = S(0.2)) {
  return detail::unary(
      a, [slope](S x) { return x > S(0) ? x : slope * x; },
      [slope](S x, S) { return x > S(0) ? S(1) : slope; });
}

template <typename S>
VarT<S> tanh_v(const VarT<S>& a) {
  return detail::unary(
      a, [](S x) { return std::tanh(x); }, [](S, S y) { return S(1) - y * y; });
}

template <typename S>
VarT<S> sigmoid(const VarT<S>& a) {
  return detail::unary(
      a, [](S x) { return S(1) / (S(1) + std::exp(-x)); },
      [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
VarT<S> exp_v(const VarT<S>& a) {
  return detail::unary(
      a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
}

template <typename S>
VarT<S> log_v(const VarT<S>& a) {
  return detail::unary(
      a, [](S x) { return std::log(x); }, [](S x, S) { return S(1) / x; });
}

template <typename S>
VarT<S> sqrt_v(const VarT<S>& a) {
  return detail::unary(
      a, [](S x) { return std::sqrt(x); },
      [](S, S y) { return S(0.5) / y; });
}

template <typename S>
VarT<S> square(const VarT<S>& a) {
  return detail::unary(
      a, [](S x) { return x * x; }, [](S x, S) { return S(2) * x; });
}

template <typename S>
VarT<S> abs_v(const VarT<S>& a) {
  return detail::unary(
      a, [](S x) { return std::abs(x); },
      [](S x, S) { return x > S(0) ? S(1) : (x < S(0) ? S(-1) : S(0)); });
}

template <typename S>
VarT<S> softplus(const VarT<S>& a) {
  // log(1+e^x); large-x branch avoids overflow.
  return detail::unary(
      a,
      [](S x) { return x > S(20) ? x : std::log1p(std::exp(x)); },
      [](S x, S) { return S(1) / (S(1) + std::exp(-x)); });
}

template <typename S>
VarT<S> min_zero(const VarT<S>& a) {
  // min(0, x), the hinge building block.
  return detail::unary(
      a, [](S x) { return x < S(0) ? x : S(0); },
      [](S x, S) { return x < S(0) ? S(1) : S(0); });
}

/// Elementwise min with subgradient routed to the smaller input (ties -> a).
template <typename S>
VarT<S> min_v(const VarT<S>& a, const VarT<S>& b) {
  check_same_shape(a, b, "min_v");
  TensorT<S> out(a->val.shape);
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::min(a->val[i], b->val[i]);
  return make_node<S>(std::move(out), {a, b}, [](NodeT<S>& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    if (a->needs_grad) a->ensure_grad();
    if (b->needs_grad) b->ensure_grad();
    for (int64_t i = 0; i < n.val.numel(); ++i) {
      if (a->val[i] <= b->val[i]) {
        if (a->needs_grad) a->grad[i] += n.grad[i];
      } else if (b->needs_grad) {
        b->grad[i] += n.grad[i];
      }
    }
  });
}

// ---- reductions ----

template <typename S>
VarT<S> sum_all(const VarT<S>& a) {
  TensorT<S> out({1});
  out.data[0] = a->val.vec().sum();
  return make_node<S>(std::move(out), {a}, [](NodeT<S>& n) {
    auto& a = n.parents[0];
    a->ensure_grad();
    a->grad.vec().array() += n.grad.data[0];
  });
}

template <typename S>
VarT<S> mean_all(const VarT<S>& a) {
  S inv = S(1) / (S)a->val.numel();
  TensorT<S> out({1});
  out.data[0] = a->val.vec().sum() * inv;
  return make_node<S>(std::move(out), {a}, [inv](NodeT<S>& n) {
    auto& a = n.parents[0];
    a->ensure_grad();
    a->grad.vec().array() += n.grad.data[0] * inv;
  });
}

/// Row sums of a [B,D] tensor -> [B].
template <typename S>
VarT<S> sum_rows(const VarT<S>& a) {
  int B = a->val.dim(0), D = a->val.dim(1);
  TensorT<S> out({B});
  out.vec() = a->val.mat().rowwise().sum();
  return make_node<S>(std::move(out), {a}, [B, D](NodeT<S>& n) {
    auto& a = n.parents[0];
    a->ensure_grad();
    a->grad.mat(B, D).colwise() += n.grad.vec();
  });
}

/// Column means of a [B,D] tensor -> [D].
template <typename S>
VarT<S> mean_cols(const VarT<S>& a) {
  int B = a->val.dim(0), D = a->val.dim(1);
  S inv = S(1) / (S)B;
  TensorT<S> out({D});
  out.vec() = a->val.mat().colwise().sum().transpose() * inv;
  return make_node<S>(std::move(out), {a}, [B, D, inv](NodeT<S>& n) {
    auto& a = n.parents[0];
    a->ensure_grad();
    a->grad.mat(B, D).rowwise() += inv * n.grad.vec().transpose();
  });
}

/// Stable log-sum-exp over each row of [B,K] -> [B].
template <typename S>
VarT<S> logsumexp_rows(const VarT<S>& a) {
  int B = a->val.dim(0), K = a->val.dim(1);
  TensorT<S> out({B});
  auto m = a->val.mat();
  for (int b = 0; b < B; ++b) {
    S mx = m.row(b).maxCoeff();
    S s = (m.row(b).array() - mx).exp().sum();
    out[b] = mx + std::log(s);
  }
  return make_node<S>(std::move(out), {a}, [B, K](NodeT<S>& n) {
    auto& a = n.parents[0];
    a->ensure_grad();
    auto x = a->val.mat(B, K);
    auto gx = a->grad.mat(B, K);
    for (int b = 0; b < B; ++b) {
      // softmax row
      S y = n.val[b];
      for (int k = 0; k < K; ++k) gx(b, k) += n.grad[b] * std::exp(x(b, k) - y);
    }
  });
}

// ---- shape ops ----

template <typename S>
VarT<S> reshape(const VarT<S>& a, Shape sh) {
  TensorT<S> out = a->val.reshaped(std::move(sh));
  return make_node<S>(std::move(out), {a}, [](NodeT<S>& n) {
    auto& a = n.parents[0];
    a->ensure_grad();
    a->grad.vec() += n.grad.vec();
  });
}

/// Concatenate along the channel axis of [N,C,H,W] tensors.
template <typename S>
VarT<S> concat_c(const std::vector<VarT<S>>& xs) {
  int N = xs[0]->val.dim(0), H = xs[0]->val.dim(2), W = xs[0]->val.dim(3);
  int Ctot = 0;
  for (auto& x : xs) Ctot += x->val.dim(1);
  TensorT<S> out({N, Ctot, H, W});
  int64_t plane = (int64_t)H * W;
  for (int n = 0; n < N; ++n) {
    int64_t coff = 0;
    for (auto& x : xs) {
      int C = x->val.dim(1);
      std::copy_n(x->val.ptr() + ((int64_t)n * C) * plane, C * plane,
                  out.ptr() + ((int64_t)n * Ctot + coff) * plane);
      coff += C;
    }
  }
  return make_node<S>(std::move(out), std::vector<VarT<S>>(xs), [N, Ctot, plane](NodeT<S>& n) {
    int64_t coff = 0;
    for (auto& p : n.parents) {
      int C = p->val.dim(1);
      if (p->needs_grad) {
        p->ensure_grad();
        for (int b = 0; b < N; ++b) {
          auto dst = p->grad.ptr() + ((int64_t)b * C) * plane;
          auto src = n.grad.ptr() + ((int64_t)b * Ctot + coff) * plane;
          for (int64_t i = 0; i < C * plane; ++i) dst[i] += src[i];
        }
      }
      coff += C;
    }
  });
}

/// Spatially broadcast [N,C] -> [N,C,H,W].
template <typename S>
VarT<S> broadcast_hw(const VarT<S>& a, int H, int W) {
  int N = a->val.dim(0), C = a->val.dim(1);
  TensorT<S> out({N, C, H, W});
  int64_t plane = (int64_t)H * W;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      std::fill_n(out.ptr() + ((int64_t)n * C + c) * plane, plane, a->val[(int64_t)n * C + c]);
  return make_node<S>(std::move(out), {a}, [N, C, plane](NodeT<S>& n) {
    auto& a = n.parents[0];
    a->ensure_grad();
    for (int b = 0; b < N; ++b)
      for (int c = 0; c < C; ++c) {
        const S* g = n.grad.ptr() + ((int64_t)b * C + c) * plane;
        S acc = S(0);
        for (int64_t i = 0; i < plane; ++i) acc += g[i];
        a->grad[(int64_t)b * C + c] += acc;
      }
  });
}

/// Per-channel spatial mean of [N,C,H,W] -> [N,C].
template <typename S>
VarT<S> mean_hw(const VarT<S>& a) {
  int N = a->val.dim(0), C = a->val.dim(1), H = a->val.dim(2), W = a->val.dim(3);
  int64_t plane = (int64_t)H * W;
  S inv = S(1) / (S)plane;
  TensorT<S> out({N, C});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const S* p = a->val.ptr() + ((int64_t)n * C + c) * plane;
      S acc = S(0);
      for (int64_t i = 0; i < plane; ++i) acc += p[i];
      out[(int64_t)n * C + c] = acc * inv;
    }
  return make_node<S>(std::move(out), {a}, [N, C, plane, inv](NodeT<S>& n) {
    auto& a = n.parents[0];
    a->ensure_grad();
    for (int b = 0; b < N; ++b)
      for (int c = 0; c < C; ++c) {
        S g = n.grad[(int64_t)b * C + c] * inv;
        S* dst = a->grad.ptr() + ((int64_t)b * C + c) * plane;
        for (int64_t i = 0; i < plane; ++i) dst[i] += g;
      }
  });
}

// ---- dense ----

template <typename S>
VarT<S> matmul(const VarT<S>& a, const VarT<S>& b) {
  int m = a->val.dim(0), k = a->val.dim(1), n2 = b->val.dim(1);
  if (b->val.dim(0) != k) throw std::invalid_argument("matmul: inner dims");
  TensorT<S> out({m, n2});
  out.mat().noalias() = a->val.mat() * b->val.mat();
  return make_node<S>(std::move(out), {a, b}, [](NodeT<S>& n) {
    auto& a = n.parents[0];
    auto& b = n.parents[1];
    if (a->needs_grad) {
      a->ensure_grad();
      a->grad.mat().noalias() += n.grad.mat() * b->val.mat().transpose();
    }
    if (b->needs_grad) {
      b->ensure_grad();
      b->grad.mat().noalias() += a->val.mat().transpose() * n.grad.mat();
    }
  });
}

/// x[B,I] * w[I,O] + b[O]
template <typename S>
VarT<S> linear(const VarT<S>& x, const VarT<S>& w, const VarT<S>& b) {
  int B = x->val.dim(0), O = w->val.dim(1);
  TensorT<S> out({B, O});
  out.mat().noalias() = x->val.mat() * w->val.mat();
  out.mat().rowwise() += b->val.vec().transpose();
  return make_node<S>(std::move(out), {x, w, b}, [](NodeT<S>& n) {
    auto& x = n.parents[0];
    auto& w = n.parents[1];
    auto& b = n.parents[2];
    if (x->needs_grad) {
      x->ensure_grad();
      x->grad.mat().noalias() += n.grad.mat() * w->val.mat().transpose();
    }
    if (w->needs_grad) {
      w->ensure_grad();
      w->grad.mat().noalias() += x->val.mat().transpose() * n.grad.mat();
    }
    if (b->needs_grad) {
      b->ensure_grad();
      b->grad.vec() += n.grad.mat().colwise().sum().transpose();
    }
  });
}

// ---- conv / resize ----

namespace detail {

template <typename S>
using ColMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

// Gather conv patches of sample `n` into col [Ci*kh*kw, Ho*Wo].
template <typename S>
void im2col(const TensorT<S>& x, int n, int kh, int kw, int stride, int pad,
            int Ho, int Wo, ColMat<S>& col) {
  int C = x.dim(1), H = x.dim(2), W = x.dim(3);
  col.setZero(C * kh * kw, Ho * Wo);
  const S* base = x.ptr() + (int64_t)n * C * H * W;
  for (int ho = 0; ho < Ho; ++ho)
    for (int wo = 0; wo < Wo; ++wo) {
      S* dst = col.data() + (int64_t)(ho * Wo + wo) * (C * kh * kw);
      for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < kh; ++ky) {
          int iy = ho * stride - pad + ky;
          for (int kx = 0; kx < kw; ++kx) {
            int ix = wo * stride - pad + kx;
            S v = S(0);
            if (iy >= 0 && iy < H && ix >= 0 && ix < W)
              v = base[((int64_t)c * H + iy) * W + ix];
            dst[(c * kh + ky) * kw + kx] = v;
          }
        }
    }
}

// Scatter col-gradient back onto sample `n` of gx.
template <typename S>
void col2im_acc(const ColMat<S>& col, int n, int kh, int kw, int stride, int pad,
                int Ho, int Wo, TensorT<S>& gx) {
  int C = gx.dim(1), H = gx.dim(2), W = gx.dim(3);
  S* base = gx.ptr() + (int64_t)n * C * H * W;
  for (int ho = 0; ho < Ho; ++ho)
    for (int wo = 0; wo < Wo; ++wo) {
      const S* src = col.data() + (int64_t)(ho * Wo + wo) * (C * kh * kw);
      for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < kh; ++ky) {
          int iy = ho * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          for (int kx = 0; kx < kw; ++kx) {
            int ix = wo * stride - pad + kx;
            if (ix < 0 || ix >= W) continue;
            base[((int64_t)c * H + iy) * W + ix] += src[(c * kh + ky) * kw + kx];
          }
        }
    }
}

}  // namespace detail

/// conv2d over [N,Ci,H,W] with weight [Co,Ci,kh,kw], bias [Co].
template <typename S>
VarT<S> conv2d(const VarT<S>& x, const VarT<S>& w, const VarT<S>& b, int stride = 1,
               int pad = 0) {
  int N = x->val.dim(0), Ci = x->val.dim(1), H = x->val.dim(2), W = x->val.dim(3);
  int Co = w->val.dim(0), kh = w->val.dim(2), kw = w->val.dim(3);
  if (w->val.dim(1) != Ci) throw std::invalid_argument("conv2d: channel mismatch");
  int Ho = (H + 2 * pad - kh) / stride + 1;
  int Wo = (W + 2 * pad - kw) / stride + 1;
  TensorT<S> out({N, Co, Ho, Wo});
  detail::ColMat<S> col;
  auto wm = w->val.mat(Co, Ci * kh * kw);
  for (int n = 0; n < N; ++n) {
    detail::im2col(x->val, n, kh, kw, stride, pad, Ho, Wo, col);
    typename TensorT<S>::MatMap om(out.ptr() + (int64_t)n * Co * Ho * Wo, Co, Ho * Wo);
    om.noalias() = wm * col;
    om.colwise() += b->val.vec();
  }
  int params[4] = {kh, kw, stride, pad};
  return make_node<S>(std::move(out), {x, w, b},
                      [p0 = params[0], p1 = params[1], p2 = params[2], p3 = params[3]](NodeT<S>& n) {
    int kh = p0, kw = p1, stride = p2, pad = p3;
    auto& x = n.parents[0];
    auto& w = n.parents[1];
    auto& b = n.parents[2];
    int N = x->val.dim(0), Ci = x->val.dim(1);
    int Co = n.val.dim(1), Ho = n.val.dim(2), Wo = n.val.dim(3);
    auto wm = w->val.mat(Co, Ci * kh * kw);
    detail::ColMat<S> col, colg;
    if (w->needs_grad) w->ensure_grad();
    if (b->needs_grad) b->ensure_grad();
    if (x->needs_grad) x->ensure_grad();
    for (int nn = 0; nn < N; ++nn) {
      typename TensorT<S>::CMatMap gy(n.grad.ptr() + (int64_t)nn * Co * Ho * Wo, Co, Ho * Wo);
      if (w->needs_grad || b->needs_grad) {
        if (w->needs_grad) {
          detail::im2col(x->val, nn, kh, kw, stride, pad, Ho, Wo, col);
          w->grad.mat(Co, Ci * kh * kw).noalias() += gy * col.transpose();
        }
        if (b->needs_grad) b->grad.vec() += gy.rowwise().sum();
      }
      if (x->needs_grad) {
        colg.noalias() = wm.transpose() * gy;
        detail::col2im_acc(colg, nn, kh, kw, stride, pad, Ho, Wo, x->grad);
      }
    }
  });
}

/// Bilinear resize of [N,C,H,W] to Ho x Wo (align_corners = false).
template <typename S>
VarT<S> bilinear(const VarT<S>& x, int Ho, int Wo) {
  int N = x->val.dim(0), C = x->val.dim(1), H = x->val.dim(2), W = x->val.dim(3);
  struct Axis {
    std::vector<int> i0, i1;
    std::vector<S> w1;  // weight of i1; weight of i0 is 1-w1
  };
  auto make_axis = [](int in, int out) {
    Axis ax;
    ax.i0.resize(out);
    ax.i1.resize(out);
    ax.w1.resize(out);
    double scale = (double)in / out;
    for (int o = 0; o < out; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      double fl = std::floor(src);
      int i0 = (int)fl;
      S w = (S)(src - fl);
      int i1 = i0 + 1;
      if (i0 < 0) { i0 = 0; i1 = 0; w = S(0); }
      if (i1 >= in) { i1 = in - 1; if (i0 >= in) i0 = in - 1; }
      ax.i0[o] = i0;
      ax.i1[o] = std::max(i1, i0);
      ax.w1[o] = w;
    }
    return ax;
  };
  Axis ay = make_axis(H, Ho), axx = make_axis(W, Wo);
  TensorT<S> out({N, C, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const S* src = x->val.ptr() + ((int64_t)n * C + c) * H * W;
      S* dst = out.ptr() + ((int64_t)n * C + c) * Ho * Wo;
      for (int yo = 0; yo < Ho; ++yo) {
        int y0 = ay.i0[yo], y1 = ay.i1[yo];
        S wy = ay.w1[yo];
        for (int xo = 0; xo < Wo; ++xo) {
          int x0 = axx.i0[xo], x1 = axx.i1[xo];
          S wx = axx.w1[xo];
          S v00 = src[y0 * W + x0], v01 = src[y0 * W + x1];
          S v10 = src[y1 * W + x0], v11 = src[y1 * W + x1];
          dst[yo * Wo + xo] = (S(1) - wy) * ((S(1) - wx) * v00 + wx * v01) +
                              wy * ((S(1) - wx) * v10 + wx * v11);
        }
      }
    }
  return make_node<S>(std::move(out), {x}, [ay, axx, H, W](NodeT<S>& n) {
    auto& x = n.parents[0];
    x->ensure_grad();
    int N = x->val.dim(0), C = x->val.dim(1);
    int Ho = n.val.dim(2), Wo = n.val.dim(3);
    for (int b = 0; b < N; ++b)
      for (int c = 0; c < C; ++c) {
        S* gx = x->grad.ptr() + ((int64_t)b * C + c) * H * W;
        const S* gy = n.grad.ptr() + ((int64_t)b * C + c) * Ho * Wo;
        for (int yo = 0; yo < Ho; ++yo) {
          int y0 = ay.i0[yo], y1 = ay.i1[yo];
          S wy = ay.w1[yo];
          for (int xo = 0; xo < Wo; ++xo) {
            int x0 = axx.i0[xo], x1 = axx.i1[xo];
            S wx = axx.w1[xo];
            S g = gy[yo * Wo + xo];
            gx[y0 * W + x0] += (S(1) - wy) * (S(1) - wx) * g;
            gx[y0 * W + x1] += (S(1) - wy) * wx * g;
            gx[y1 * W + x0] += wy * (S(1) - wx) * g;
            gx[y1 * W + x1] += wy * wx * g;
          }
        }
      }
  });
}

}  // namespace s2p
