#pragma once

#include "s2p/core/adam.hpp"
#include "s2p/core/nn.hpp"
#include "s2p/gen/encoding.hpp"
#include "s2p/io/manifest.hpp"

namespace s2p {

// Transition generator: frame_t = G(state_t, frame_{t-1}). The encoded state
// runs through a latent mapping MLP; the previous frame is conv-encoded to a
// 4x4 grid; both are fused and upsampled through modulated residual blocks.
// Feature maps are modulated by MAT: gamma/beta estimated from the latent
// code and the (resized) previous frame, applied around a per-sample
// per-channel spatial normalization.

template <typename S>
struct GeneratorConfigT {
  int resolution = 64;
  int L = 10;
  int base_channels = 96;
  int d_w = 256;
  int mat_hidden = 16;
  int img_enc_channels = 32;
  int state_proj_channels = 32;
  bool spectral_norm = true;
  S lambda1 = (S)10, lambda2 = (S)1, lambda3 = (S)1;
  S lr = (S)2e-4;
  int batch = 16;
  int epochs = 30;

  int n_blocks() const {
    int r = resolution, n = 0;
    while (r > 4) { r /= 2; ++n; }
    if (4 * (1 << n) != resolution)
      throw std::invalid_argument("resolution must be 4 * 2^n");
    return n;
  }

  void to_manifest(Manifest& m, const std::string& p) const {
    m.set_int(p + "resolution", resolution);
    m.set_int(p + "L", L);
    m.set_int(p + "base_channels", base_channels);
    m.set_int(p + "d_w", d_w);
    m.set_int(p + "mat_hidden", mat_hidden);
    m.set_int(p + "img_enc_channels", img_enc_channels);
    m.set_int(p + "state_proj_channels", state_proj_channels);
    m.set_int(p + "spectral_norm", spectral_norm ? 1 : 0);
    m.set(p + "lambda1", fmt_g17((double)lambda1));
    m.set(p + "lambda2", fmt_g17((double)lambda2));
    m.set(p + "lambda3", fmt_g17((double)lambda3));
    m.set(p + "lr", fmt_g17((double)lr));
    m.set_int(p + "batch", batch);
    m.set_int(p + "epochs", epochs);
  }
  static GeneratorConfigT from_manifest(const Manifest& m, const std::string& p) {
    GeneratorConfigT c;
    c.resolution = (int)m.get_int(p + "resolution");
    c.L = (int)m.get_int(p + "L");
    c.base_channels = (int)m.get_int(p + "base_channels");
    c.d_w = (int)m.get_int(p + "d_w");
    c.mat_hidden = (int)m.get_int(p + "mat_hidden");
    c.img_enc_channels = (int)m.get_int(p + "img_enc_channels");
    c.state_proj_channels = (int)m.get_int(p + "state_proj_channels");
    c.spectral_norm = m.get_int(p + "spectral_norm") != 0;
    c.lambda1 = (S)m.get_double(p + "lambda1");
    c.lambda2 = (S)m.get_double(p + "lambda2");
    c.lambda3 = (S)m.get_double(p + "lambda3");
    c.lr = (S)m.get_double(p + "lr");
    c.batch = (int)m.get_int(p + "batch");
    c.epochs = (int)m.get_int(p + "epochs");
    return c;
  }
};

/// Normalization-affine core of MAT: y = gamma * (x - mu_c) / sigma_c + beta
/// with mu_c/sigma_c per-sample per-channel spatial statistics.
template <typename S>
VarT<S> mat_affine(const VarT<S>& x, const VarT<S>& gamma, const VarT<S>& beta,
                   S eps = (S)1e-5) {
  int H = x->val.dim(2), W = x->val.dim(3);
  auto mu = mean_hw(x);
  auto xc = sub(x, broadcast_hw(mu, H, W));
  auto var = mean_hw(square(xc));
  auto inv = div(constant(TensorT<S>(var->val.shape, S(1))), sqrt_v(add_c(var, eps)));
  auto norm = mul(xc, broadcast_hw(inv, H, W));
  return add(mul(gamma, norm), beta);
}

/// One MAT operation: estimates gamma/beta from a fused (latent, prev-frame)
/// context map and applies the modulated normalization to x.
template <typename S>
struct MatModuleT {
  Conv2dLayerT<S> ext1, ext2, gamma_conv, beta_conv;

  MatModuleT() = default;
  MatModuleT(ParamStoreT<S>& ps, const std::string& name, int ctx_ch, int hidden,
             int target_ch, bool sn, Rng& rng) {
    ext1 = Conv2dLayerT<S>(ps, name + ".ext1", ctx_ch, hidden, 1, 1, 0, rng, sn,
                           (S)std::sqrt(2.0));
    ext2 = Conv2dLayerT<S>(ps, name + ".ext2", hidden, hidden, 3, 1, 1, rng, sn,
                           (S)std::sqrt(2.0));
    gamma_conv = Conv2dLayerT<S>(ps, name + ".gamma", hidden, target_ch, 3, 1, 1, rng, sn);
    beta_conv = Conv2dLayerT<S>(ps, name + ".beta", hidden, target_ch, 3, 1, 1, rng, sn);
    // identity-leaning start: gamma near 1, beta near 0
    gamma_conv.b->val.fill(S(1));
  }

  VarT<S> operator()(const VarT<S>& x, const VarT<S>& ctx) const {
    auto h = lrelu(ext1(ctx), (S)0.2);
    h = lrelu(ext2(h), (S)0.2);
    return mat_affine(x, gamma_conv(h), beta_conv(h));
  }

  void power_iterate() {
    ext1.power_iterate();
    ext2.power_iterate();
    gamma_conv.power_iterate();
    beta_conv.power_iterate();
  }
};

/// Residual generator block: two MAT+act+conv stages plus a MAT-modulated
/// 1x1 skip, all at resolution r; the caller upsamples afterwards.
template <typename S>
struct MatResBlockT {
  MatModuleT<S> mat1, mat2, mat_skip;
  Conv2dLayerT<S> conv1, conv2, conv_skip;

  MatResBlockT() = default;
  MatResBlockT(ParamStoreT<S>& ps, const std::string& name, int ci, int co, int ctx_ch,
               int hidden, bool sn, Rng& rng) {
    mat1 = MatModuleT<S>(ps, name + ".mat1", ctx_ch, hidden, ci, sn, rng);
    conv1 = Conv2dLayerT<S>(ps, name + ".conv1", ci, co, 3, 1, 1, rng, sn, (S)std::sqrt(2.0));
    mat2 = MatModuleT<S>(ps, name + ".mat2", ctx_ch, hidden, co, sn, rng);
    conv2 = Conv2dLayerT<S>(ps, name + ".conv2", co, co, 3, 1, 1, rng, sn, (S)std::sqrt(2.0));
    mat_skip = MatModuleT<S>(ps, name + ".mat_skip", ctx_ch, hidden, ci, sn, rng);
    conv_skip = Conv2dLayerT<S>(ps, name + ".skip", ci, co, 1, 1, 0, rng, sn);
  }

  VarT<S> operator()(const VarT<S>& x, const VarT<S>& ctx) const {
    auto h = conv1(lrelu(mat1(x, ctx), (S)0.2));
    h = conv2(lrelu(mat2(h, ctx), (S)0.2));
    auto skip = conv_skip(mat_skip(x, ctx));
    return add(h, skip);
  }

  void power_iterate() {
    mat1.power_iterate();
    mat2.power_iterate();
    mat_skip.power_iterate();
    conv1.power_iterate();
    conv2.power_iterate();
    conv_skip.power_iterate();
  }
};

template <typename S>
struct GeneratorT {
  GeneratorConfigT<S> cfg;
  int ns = 0;
  ParamStoreT<S> ps;

  std::vector<LinearLayerT<S>> mapping;  // 8-layer latent MLP
  std::vector<Conv2dLayerT<S>> img_enc;  // prev frame -> 4x4 grid
  LinearLayerT<S> state_proj;            // w -> 4x4 feature grid
  Conv2dLayerT<S> entry;                 // fuse the two 4x4 grids
  std::vector<MatResBlockT<S>> blocks;
  Conv2dLayerT<S> head;                  // to RGB

  GeneratorT() = default;
  GeneratorT(GeneratorConfigT<S> c, int ns_, uint64_t seed) : cfg(c), ns(ns_) {
    Rng rng(seed, 0x9e11);
    bool sn = cfg.spectral_norm;
    int in_dim = encoded_dim(ns, cfg.L);
    int prev = in_dim;
    for (int i = 0; i < 8; ++i) {
      mapping.emplace_back(ps, "map.fc" + std::to_string(i), prev, cfg.d_w, rng,
                           (S)std::sqrt(2.0));
      prev = cfg.d_w;
    }
    int n_down = cfg.n_blocks();
    int ci = 3;
    for (int i = 0; i < n_down; ++i) {
      int co = std::min(cfg.img_enc_channels, 8 << i);
      img_enc.emplace_back(ps, "enc.conv" + std::to_string(i), ci, co, 3, 2, 1, rng, sn,
                           (S)std::sqrt(2.0));
      ci = co;
    }
    state_proj = LinearLayerT<S>(ps, "proj", cfg.d_w, cfg.state_proj_channels * 16, rng);
    entry = Conv2dLayerT<S>(ps, "entry", ci + cfg.state_proj_channels, cfg.base_channels, 3,
                            1, 1, rng, sn, (S)std::sqrt(2.0));
    int ctx_ch = cfg.d_w + 3;
    int bc = cfg.base_channels;
    for (int i = 0; i < n_down; ++i) {
      int co = std::max(bc / 2, 8);
      blocks.emplace_back(ps, "block" + std::to_string(i), bc, co, ctx_ch, cfg.mat_hidden,
                          sn, rng);
      bc = co;
    }
    head = Conv2dLayerT<S>(ps, "head", bc, 3, 3, 1, 1, rng, sn);
  }

  /// Latent code w from a raw state batch [B,ns].
  VarT<S> map_latent(const TensorT<S>& states) const {
    auto e = positional_encode(states, cfg.L);
    // channel-wise normalization at the first layer: x / sqrt(mean(x^2) + eps)
    int B = e.dim(0), D = e.dim(1);
    TensorT<S> inv({B, 1});
    for (int b = 0; b < B; ++b) {
      double acc = 0;
      for (int d = 0; d < D; ++d) {
        double x = (double)e[(int64_t)b * D + d];
        acc += x * x;
      }
      inv[(int64_t)b] = (S)(1.0 / std::sqrt(acc / D + 1e-8));
    }
    TensorT<S> normed = e;
    for (int b = 0; b < B; ++b)
      for (int d = 0; d < D; ++d) normed[(int64_t)b * D + d] *= inv[b];
    VarT<S> h = constant(normed);
    for (size_t i = 0; i < mapping.size(); ++i) h = lrelu(mapping[i](h), (S)0.2);
    return h;
  }

  /// Full forward pass: [B,ns] states (raw), [B,3,R,R] previous frames.
  VarT<S> forward(const TensorT<S>& states, const VarT<S>& prev) const {
    int B = states.dim(0);
    int R = cfg.resolution;
    if (prev->val.dim(2) != R || prev->val.dim(3) != R)
      throw std::invalid_argument("generator: frame resolution mismatch");
    auto w = map_latent(states);

    // encode prev frame down to 4x4
    VarT<S> f = prev;
    for (auto& l : img_enc) f = lrelu(l(f), (S)0.2);

    auto sp = reshape(state_proj(w), {B, cfg.state_proj_channels, 4, 4});
    auto x = lrelu(entry(concat_c<S>({f, sp})), (S)0.2);

    // per-resolution context: broadcast latent + resized prev frame
    int r = 4;
    for (auto& blk : blocks) {
      auto ctx = concat_c<S>({broadcast_hw(w, r, r), bilinear(prev, r, r)});
      x = blk(x, ctx);
      r *= 2;
      x = bilinear(x, r, r);
    }
    return tanh_v(head(x));
  }

  void power_iterate() {
    for (auto& l : img_enc) l.power_iterate();
    entry.power_iterate();
    for (auto& b : blocks) b.power_iterate();
    head.power_iterate();
  }
};

// ---- discriminators ----

/// Patch discriminator conditioned on the state via input broadcast-concat.
template <typename S>
struct DiscriminatorT {
  ParamStoreT<S>* ps = nullptr;
  Conv2dLayerT<S> c1, c2, c3, c4;

  DiscriminatorT() = default;
  DiscriminatorT(ParamStoreT<S>& store, const std::string& name, int ns, Rng& rng) {
    c1 = Conv2dLayerT<S>(store, name + ".c1", 3 + ns, 32, 4, 2, 1, rng, false,
                         (S)std::sqrt(2.0));
    c2 = Conv2dLayerT<S>(store, name + ".c2", 32, 64, 4, 2, 1, rng, false, (S)std::sqrt(2.0));
    c3 = Conv2dLayerT<S>(store, name + ".c3", 64, 128, 4, 2, 1, rng, false,
                         (S)std::sqrt(2.0));
    c4 = Conv2dLayerT<S>(store, name + ".c4", 128, 1, 3, 1, 1, rng, false);
  }

  VarT<S> operator()(const TensorT<S>& states, const VarT<S>& img) const {
    int B = img->val.dim(0), H = img->val.dim(2), W = img->val.dim(3);
    auto s = constant(states);
    auto x = concat_c<S>({img, broadcast_hw(s, H, W)});
    (void)B;
    x = lrelu(c1(x), (S)0.2);
    x = lrelu(c2(x), (S)0.2);
    x = lrelu(c3(x), (S)0.2);
    return c4(x);
  }
};

/// Two identical discriminators at full and half resolution.
template <typename S>
struct MultiDiscriminatorT {
  ParamStoreT<S> ps;
  DiscriminatorT<S> d_full, d_half;
  int ns = 0;

  MultiDiscriminatorT() = default;
  MultiDiscriminatorT(int ns_, uint64_t seed) : ns(ns_) {
    Rng rng(seed, 0xd15c);
    d_full = DiscriminatorT<S>(ps, "d1", ns, rng);
    d_half = DiscriminatorT<S>(ps, "d2", ns, rng);
  }

  std::vector<VarT<S>> operator()(const TensorT<S>& states, const VarT<S>& img) const {
    int H = img->val.dim(2), W = img->val.dim(3);
    return {d_full(states, img), d_half(states, bilinear(img, H / 2, W / 2))};
  }
};

// ---- perceptual feature net (fixed random weights) ----

/// Frozen 4-layer conv pyramid used as the perceptual feature extractor;
/// weights are seeded constants, never trained.
template <typename S>
struct PerceptualNetT {
  std::vector<TensorT<S>> w, b;
  std::vector<int> ch{16, 24, 32, 48};

  explicit PerceptualNetT(uint64_t seed = 777) {
    Rng rng(seed, 0xfea7);
    int ci = 3;
    for (int i = 0; i < 4; ++i) {
      int co = ch[(size_t)i];
      TensorT<S> wt({co, ci, 3, 3});
      init_orthogonal(wt, co, ci * 9, rng, (S)std::sqrt(2.0));
      w.push_back(std::move(wt));
      b.push_back(TensorT<S>({co}));
      ci = co;
    }
  }

  std::vector<VarT<S>> taps(const VarT<S>& img) const {
    std::vector<VarT<S>> out;
    VarT<S> x = img;
    for (size_t i = 0; i < w.size(); ++i) {
      x = lrelu(conv2d(x, constant(w[i]), constant(b[i]), 2, 1), (S)0.2);
      out.push_back(x);
    }
    return out;
  }
};

// ---- losses ----

template <typename S>
VarT<S> loss_l1(const VarT<S>& a, const VarT<S>& b) {
  return mean_all(abs_v(sub(a, b)));
}

template <typename S>
VarT<S> loss_perceptual(const PerceptualNetT<S>& net, const VarT<S>& real,
                        const VarT<S>& fake) {
  auto tr = net.taps(real);
  auto tf = net.taps(fake);
  VarT<S> total;
  for (size_t i = 0; i < tr.size(); ++i) {
    auto term = mean_all(abs_v(sub(tr[i], tf[i])));
    total = total ? add(total, term) : term;
  }
  return total;
}

/// Hinge discriminator loss: -E[min(0,-1+D(real))] - E[min(0,-1-D(fake))].
template <typename S>
VarT<S> loss_adv_d(const VarT<S>& scores_real, const VarT<S>& scores_fake) {
  auto a = neg(mean_all(min_zero(add_c(scores_real, (S)-1))));
  auto b = neg(mean_all(min_zero(neg(add_c(scores_fake, (S)1)))));
  return add(a, b);
}

/// Hinge generator loss: -E[D(fake)].
template <typename S>
VarT<S> loss_adv_g(const VarT<S>& scores_fake) {
  return neg(mean_all(scores_fake));
}

/// lambda1*L1 + lambda2*L_per + lambda3*L_adv; null terms (or zero weights)
/// drop out of the graph entirely.
template <typename S>
VarT<S> loss_total(const VarT<S>& l1, const VarT<S>& l_per, const VarT<S>& l_adv,
                   S lambda1, S lambda2, S lambda3) {
  VarT<S> total = mul_c(l1, lambda1);
  if (l_per && lambda2 > S(0)) total = add(total, mul_c(l_per, lambda2));
  if (l_adv && lambda3 > S(0)) total = add(total, mul_c(l_adv, lambda3));
  return total;
}

}  // namespace s2p
