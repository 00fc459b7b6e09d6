#pragma once

#include "s2p/core/adam.hpp"
#include "s2p/data/sampler.hpp"
#include "s2p/io/checkpoint.hpp"
#include "s2p/io/csv.hpp"
#include "s2p/metrics/metrics.hpp"

namespace s2p {

// Sequential latent-variable representation model: a strided conv encoder
// h = E(I), diagonal-Gaussian posterior q(z_t | h_t, z_{t-1}, a_{t-1}) and
// prior p(z_t | z_{t-1}, a_{t-1}) (standard normal at t=0), and a conv
// decoder with fixed output variance. Trained by the ELBO over windows of
// tau steps; the filtered posterior means provide the latent space that
// image-based offline RL trains in.

template <typename S>
struct ReprConfigT {
  int resolution = 64;
  int z_dim = 32;
  int h_dim = 128;
  int enc_base = 16;     // channels after the first conv; doubles per level
  int mlp_hidden = 128;  // width of the two-layer posterior/prior trunks
  int tau = 8;
  S out_var = (S)0.1;  // fixed decoder output variance
  S min_logvar = (S)-10, max_logvar = (S)2;
  S lr = (S)1e-4;
  int batch = 8;
  int steps = 30000;
  int save_every = 500;

  int n_layers() const {
    int r = resolution, n = 0;
    while (r > 4) {
      r /= 2;
      ++n;
    }
    if (4 * (1 << n) != resolution)
      throw std::invalid_argument("resolution must be 4 * 2^n");
    return n;
  }
  int top_channels() const { return enc_base << (n_layers() - 1); }

  void to_manifest(Manifest& m, const std::string& p) const {
    m.set_int(p + "resolution", resolution);
    m.set_int(p + "z_dim", z_dim);
    m.set_int(p + "h_dim", h_dim);
    m.set_int(p + "enc_base", enc_base);
    m.set_int(p + "mlp_hidden", mlp_hidden);
    m.set_int(p + "tau", tau);
    m.set(p + "out_var", fmt_g17((double)out_var));
    m.set(p + "lr", fmt_g17((double)lr));
    m.set_int(p + "batch", batch);
    m.set_int(p + "steps", steps);
    m.set_int(p + "save_every", save_every);
  }
  static ReprConfigT from_manifest(const Manifest& m, const std::string& p) {
    ReprConfigT c;
    auto geti = [&](const char* k, int d) {
      return (int)std::stoll(m.get_or(p + k, std::to_string(d)));
    };
    c.resolution = geti("resolution", c.resolution);
    c.z_dim = geti("z_dim", c.z_dim);
    c.h_dim = geti("h_dim", c.h_dim);
    c.enc_base = geti("enc_base", c.enc_base);
    c.mlp_hidden = geti("mlp_hidden", c.mlp_hidden);
    c.tau = geti("tau", c.tau);
    c.out_var = (S)std::stod(m.get_or(p + "out_var", fmt_g17((double)c.out_var)));
    c.lr = (S)std::stod(m.get_or(p + "lr", fmt_g17((double)c.lr)));
    c.batch = geti("batch", c.batch);
    c.steps = geti("steps", c.steps);
    c.save_every = geti("save_every", c.save_every);
    if (c.z_dim < 1 || c.h_dim < 1 || c.tau < 2)
      throw std::invalid_argument("repr config: z_dim/h_dim >= 1, tau >= 2");
    if (c.out_var <= (S)0) throw std::invalid_argument("repr config: out_var must be > 0");
    return c;
  }
};

/// KL(q||p) per sample between diagonal Gaussians given (mu, logvar): [B].
/// 0.5 * sum_d [ exp(lq-lp) + (mp-mq)^2 exp(-lp) - 1 + lp - lq ]
template <typename S>
VarT<S> kl_diag_rows(const VarT<S>& qm, const VarT<S>& ql, const VarT<S>& pm,
                     const VarT<S>& pl) {
  auto dl = sub(ql, pl);
  auto term = sub(add(exp_v(dl), mul(square(sub(pm, qm)), exp_v(neg(pl)))),
                  add_c(dl, (S)1));
  return mul_c(sum_rows(term), (S)0.5);
}

/// KL(q||N(0,I)) per sample: 0.5 * sum_d [ exp(lq) + mq^2 - 1 - lq ].
template <typename S>
VarT<S> kl_std_normal_rows(const VarT<S>& qm, const VarT<S>& ql) {
  auto term = sub(add(exp_v(ql), square(qm)), add_c(ql, (S)1));
  return mul_c(sum_rows(term), (S)0.5);
}

/// Per-sample Gaussian NLL of x under N(mean, var*I), summed over all
/// non-batch dims (full constant terms, so oracles match exactly): [B].
template <typename S>
VarT<S> gaussian_recon_nll_rows(const VarT<S>& mean, const VarT<S>& x, S var) {
  int B = x->val.dim(0);
  int64_t D = x->val.numel() / B;
  auto sse = sum_rows(reshape(square(sub(mean, x)), {B, (int)D}));
  double c = 0.5 * (double)D * (std::log((double)var) + std::log(2.0 * M_PI));
  return add_c(mul_c(sse, (S)(0.5 / (double)var)), (S)c);
}

template <typename S>
struct ElboTermsT {
  VarT<S> total, recon, kl0, kl_seq;
};

/// Distribution parameters and decoded means captured during an ELBO pass,
/// for closed-form oracle checks.
template <typename S>
struct ElboTraceT {
  TensorT<S> q0_mu, q0_lv;
  std::vector<TensorT<S>> q_mu, q_lv, p_mu, p_lv;  // t = 1..tau-1
  std::vector<TensorT<S>> recon_mean;              // t = 0..tau-1
};

template <typename S>
struct ReprModelT {
  ReprConfigT<S> cfg;
  int na = 1;
  ParamStoreT<S> ps;
  std::vector<Conv2dLayerT<S>> enc;
  LinearLayerT<S> enc_fc;
  LinearLayerT<S> q0_fc0, q0_fc1, q0_mu, q0_lv;
  LinearLayerT<S> q_fc0, q_fc1, q_mu, q_lv;
  LinearLayerT<S> p_fc0, p_fc1, p_mu, p_lv;
  LinearLayerT<S> dec_fc;
  std::vector<Conv2dLayerT<S>> dec;
  Conv2dLayerT<S> dec_out;

  ReprModelT() = default;
  ReprModelT(ReprConfigT<S> c, int na_, uint64_t seed) : cfg(c), na(na_) {
    Rng rng(seed, 0x51ac);
    int n = cfg.n_layers();
    S g2 = (S)std::sqrt(2.0);
    int ci = 3;
    for (int l = 0; l < n; ++l) {
      int co = cfg.enc_base << l;
      enc.emplace_back(ps, "enc" + std::to_string(l), ci, co, 4, 2, 1, rng, false, g2);
      ci = co;
    }
    int flat = cfg.top_channels() * 16;
    enc_fc = LinearLayerT<S>(ps, "enc_fc", flat, cfg.h_dim, rng);

    int H = cfg.mlp_hidden, z = cfg.z_dim;
    q0_fc0 = LinearLayerT<S>(ps, "q0_fc0", cfg.h_dim, H, rng, g2);
    q0_fc1 = LinearLayerT<S>(ps, "q0_fc1", H, H, rng, g2);
    q0_mu = LinearLayerT<S>(ps, "q0_mu", H, z, rng);
    q0_lv = LinearLayerT<S>(ps, "q0_lv", H, z, rng);
    q_fc0 = LinearLayerT<S>(ps, "q_fc0", cfg.h_dim + z + na, H, rng, g2);
    q_fc1 = LinearLayerT<S>(ps, "q_fc1", H, H, rng, g2);
    q_mu = LinearLayerT<S>(ps, "q_mu", H, z, rng);
    q_lv = LinearLayerT<S>(ps, "q_lv", H, z, rng);
    p_fc0 = LinearLayerT<S>(ps, "p_fc0", z + na, H, rng, g2);
    p_fc1 = LinearLayerT<S>(ps, "p_fc1", H, H, rng, g2);
    p_mu = LinearLayerT<S>(ps, "p_mu", H, z, rng);
    p_lv = LinearLayerT<S>(ps, "p_lv", H, z, rng);

    dec_fc = LinearLayerT<S>(ps, "dec_fc", z, flat, rng, g2);
    for (int l = n - 1; l >= 1; --l) {
      int from = cfg.enc_base << l, to = cfg.enc_base << (l - 1);
      dec.emplace_back(ps, "dec" + std::to_string(n - 1 - l), from, to, 3, 1, 1, rng,
                       false, g2);
    }
    dec_out = Conv2dLayerT<S>(ps, "dec_out", cfg.enc_base, 3, 3, 1, 1, rng);
  }

  /// Deterministic feature vector h = E(I): [B,3,R,R] -> [B,h_dim].
  VarT<S> encode(const VarT<S>& x) const {
    if (x->val.dim(2) != cfg.resolution || x->val.dim(3) != cfg.resolution)
      throw std::invalid_argument("encode: resolution mismatch");
    VarT<S> h = x;
    for (auto& c : enc) h = relu(c(h));
    int B = x->val.dim(0);
    return enc_fc(reshape(h, {B, cfg.top_channels() * 16}));
  }

  VarT<S> soft_clamp(VarT<S> lv) const {
    TensorT<S> hi(lv->val.shape, cfg.max_logvar), lo(lv->val.shape, cfg.min_logvar);
    lv = sub(constant(hi), softplus(sub(constant(hi), lv)));
    return add(constant(lo), softplus(sub(lv, constant(lo))));
  }

  std::pair<VarT<S>, VarT<S>> posterior0(const VarT<S>& h) const {
    auto t = relu(q0_fc1(relu(q0_fc0(h))));
    return {q0_mu(t), soft_clamp(q0_lv(t))};
  }
  std::pair<VarT<S>, VarT<S>> posterior(const VarT<S>& h, const VarT<S>& z_prev,
                                        const VarT<S>& a_prev) const {
    auto t = relu(q_fc1(relu(q_fc0(concat_cols<S>({h, z_prev, a_prev})))));
    return {q_mu(t), soft_clamp(q_lv(t))};
  }
  std::pair<VarT<S>, VarT<S>> prior(const VarT<S>& z_prev, const VarT<S>& a_prev) const {
    auto t = relu(p_fc1(relu(p_fc0(concat_cols<S>({z_prev, a_prev})))));
    return {p_mu(t), soft_clamp(p_lv(t))};
  }

  /// Decoded frame mean in (-1,1): [B,z] -> [B,3,R,R].
  VarT<S> decode(const VarT<S>& z) const {
    int B = z->val.dim(0);
    VarT<S> h = relu(dec_fc(z));
    h = reshape(h, {B, cfg.top_channels(), 4, 4});
    int r = 4;
    for (auto& c : dec) {
      r *= 2;
      h = relu(c(bilinear(h, r, r)));
    }
    r *= 2;
    return tanh_v(dec_out(bilinear(h, r, r)));
  }

  /// ELBO over a window: frames [B,tau,3,R,R], actions [B,tau-1,na].
  /// recon = sum_t NLL(I_t | dec(z_t)); kl0 = KL(q0 || N(0,I));
  /// kl_seq = sum_{t>=1} KL(q_t || p_t); all batch means; total = sum.
  ElboTermsT<S> elbo(const TensorT<S>& frames, const TensorT<S>& actions, Rng& rng,
                     ElboTraceT<S>* trace = nullptr) const {
    int B = frames.dim(0), tau = frames.dim(1), R = cfg.resolution;
    if (tau < 2) throw std::invalid_argument("elbo: sequence shorter than 2 steps");
    if (actions.dim(0) != B || actions.dim(1) != tau - 1 || actions.dim(2) != na)
      throw std::invalid_argument("elbo: actions must be [B,tau-1,na]");
    if (frames.dim(2) != 3 || frames.dim(3) != R || frames.dim(4) != R)
      throw std::invalid_argument("elbo: frames must be [B,tau,3,R,R]");
    int64_t fsz = (int64_t)3 * R * R;

    auto frame_at = [&](int t) {
      TensorT<S> x({B, 3, R, R});
      for (int b = 0; b < B; ++b)
        std::copy_n(frames.ptr() + ((int64_t)b * tau + t) * fsz, fsz,
                    x.ptr() + (int64_t)b * fsz);
      return constant(x);
    };
    auto action_at = [&](int t) {
      TensorT<S> a({B, na});
      for (int b = 0; b < B; ++b)
        std::copy_n(actions.ptr() + ((int64_t)b * (tau - 1) + t) * na, na,
                    a.ptr() + (int64_t)b * na);
      return constant(a);
    };
    auto draw_eps = [&] {
      TensorT<S> e({B, cfg.z_dim});
      for (int64_t i = 0; i < e.numel(); ++i) e[i] = (S)rng.normal();
      return constant(e);
    };
    auto sample_z = [&](const VarT<S>& mu, const VarT<S>& lv) {
      return add(mu, mul(exp_v(mul_c(lv, (S)0.5)), draw_eps()));
    };

    auto x0 = frame_at(0);
    auto [m0, l0] = posterior0(encode(x0));
    VarT<S> z = sample_z(m0, l0);
    VarT<S> xhat = decode(z);
    VarT<S> recon = mean_all(gaussian_recon_nll_rows(xhat, x0, cfg.out_var));
    VarT<S> kl0 = mean_all(kl_std_normal_rows(m0, l0));
    VarT<S> kl_seq;
    if (trace) {
      trace->q0_mu = m0->val;
      trace->q0_lv = l0->val;
      trace->recon_mean.push_back(xhat->val);
    }
    for (int t = 1; t < tau; ++t) {
      auto xt = frame_at(t);
      auto ap = action_at(t - 1);
      auto [qm, ql] = posterior(encode(xt), z, ap);
      auto [pm, pl] = prior(z, ap);
      z = sample_z(qm, ql);
      xhat = decode(z);
      recon = add(recon, mean_all(gaussian_recon_nll_rows(xhat, xt, cfg.out_var)));
      auto kl = mean_all(kl_diag_rows(qm, ql, pm, pl));
      kl_seq = kl_seq ? add(kl_seq, kl) : kl;
      if (trace) {
        trace->q_mu.push_back(qm->val);
        trace->q_lv.push_back(ql->val);
        trace->p_mu.push_back(pm->val);
        trace->p_lv.push_back(pl->val);
        trace->recon_mean.push_back(xhat->val);
      }
    }
    ElboTermsT<S> out;
    out.recon = recon;
    out.kl0 = kl0;
    out.kl_seq = kl_seq;
    out.total = add(recon, add(kl0, kl_seq));
    return out;
  }

  void save(const std::string& path, uint64_t seed) const {
    Checkpoint c;
    Manifest m;
    cfg.to_manifest(m, "repr.");
    for (auto& it : m.items) c.set_meta(it.first, it.second);
    c.set_meta("na", std::to_string(na));
    c.set_meta("seed", std::to_string(seed));
    checkpoint_pack(c, ps);
    c.save(path);
  }
  static ReprModelT load_model(const Checkpoint& c) {
    Manifest m;
    for (auto& it : c.meta) m.set(it.first, it.second);
    auto cfg = ReprConfigT<S>::from_manifest(m, "repr.");
    ReprModelT r(cfg, (int)m.get_int("na"), (uint64_t)m.get_int("seed"));
    checkpoint_unpack(c, r.ps);
    return r;
  }
};

/// Filtered posterior means over a batch of synchronized histories:
/// z_0 = mu_q0(h_0), z_t = mu_q(h_t, z_{t-1}, a_{t-1}). Deterministic.
template <typename S>
struct BeliefFilterT {
  const ReprModelT<S>* m = nullptr;
  TensorT<S> z;  // [B, z_dim]

  explicit BeliefFilterT(const ReprModelT<S>& model) : m(&model) {}

  const TensorT<S>& reset(const TensorT<S>& frames) {
    auto& mm = const_cast<ReprModelT<S>&>(*m);
    EvalGuardT<S> guard(mm.ps);
    auto [mu, lv] = m->posterior0(m->encode(constant(frames)));
    (void)lv;
    z = mu->val;
    return z;
  }
  const TensorT<S>& step(const TensorT<S>& frames, const TensorT<S>& a_prev) {
    auto& mm = const_cast<ReprModelT<S>&>(*m);
    EvalGuardT<S> guard(mm.ps);
    auto [mu, lv] =
        m->posterior(m->encode(constant(frames)), constant(z), constant(a_prev));
    (void)lv;
    z = mu->val;
    return z;
  }
};

/// Single-history convenience: frames [n,3,R,R], actions [n-1,na] -> final
/// belief [z_dim].
template <typename S>
TensorT<S> infer_latent(const ReprModelT<S>& m, const TensorT<S>& frames,
                        const TensorT<S>& actions) {
  int n = frames.dim(0);
  if (n < 1) throw std::invalid_argument("infer_latent: empty history");
  if (n > 1 && (actions.dim(0) != n - 1 || actions.dim(1) != m.na))
    throw std::invalid_argument("infer_latent: actions must be [n-1,na]");
  int R = m.cfg.resolution;
  BeliefFilterT<S> f(m);
  TensorT<S> x({1, 3, R, R});
  std::copy_n(frames.ptr(), x.numel(), x.ptr());
  f.reset(x);
  for (int t = 1; t < n; ++t) {
    std::copy_n(frames.ptr() + (int64_t)t * x.numel(), x.numel(), x.ptr());
    TensorT<S> a({1, m.na});
    std::copy_n(actions.ptr() + (int64_t)(t - 1) * m.na, m.na, a.ptr());
    f.step(x, a);
  }
  TensorT<S> out({m.cfg.z_dim});
  std::copy_n(f.z.ptr(), out.numel(), out.ptr());
  return out;
}

/// Map every trajectory of a dataset through the belief filter and emit
/// flat latent transitions (z_t, a_t, r_t, z_{t+1}, done_t), rows in the
/// same (trajectory, t) order as Transitions::from. Trajectories are
/// processed in blocks of equal length for batched encoding.
template <typename S>
Transitions infer_latent_transitions(const ReprModelT<S>& m, const Dataset& d) {
  if (d.resolution() != m.cfg.resolution)
    throw std::invalid_argument("latent inference: resolution mismatch");
  if (d.na() != m.na) throw std::invalid_argument("latent inference: action dim mismatch");
  const int R = m.cfg.resolution, z = m.cfg.z_dim, na = m.na;
  const int64_t fsz = (int64_t)3 * R * R;
  const size_t n = d.trajs.size();

  Transitions out;
  out.ns = z;
  out.na = na;
  std::vector<std::vector<float>> zs(n);  // per trajectory: (T+1) * z

  size_t i = 0;
  while (i < n) {
    size_t j = i;
    int T = d.trajs[i].T();
    while (j < n && d.trajs[j].T() == T && j - i < 64) ++j;
    int B = (int)(j - i);

    BeliefFilterT<S> f(m);
    TensorT<S> x({B, 3, R, R}), a({B, na});
    auto load_frames = [&](int t) {
      for (int b = 0; b < B; ++b)
        frame_to_chw(d.trajs[i + (size_t)b].frame(t), R, x.ptr() + (int64_t)b * fsz);
    };
    auto store_z = [&](int t) {
      for (int b = 0; b < B; ++b) {
        auto& v = zs[i + (size_t)b];
        if (v.empty()) v.resize((size_t)(T + 1) * z);
        for (int k = 0; k < z; ++k)
          v[(size_t)t * z + k] = (float)f.z[(int64_t)b * z + k];
      }
    };
    load_frames(0);
    f.reset(x);
    store_z(0);
    for (int t = 1; t <= T; ++t) {
      load_frames(t);
      for (int b = 0; b < B; ++b)
        for (int k = 0; k < na; ++k)
          a[(int64_t)b * na + k] =
              (S)d.trajs[i + (size_t)b].actions[(size_t)(t - 1) * na + k];
      f.step(x, a);
      store_z(t);
    }
    i = j;
  }

  for (size_t ti = 0; ti < n; ++ti) {
    const Trajectory& tr = d.trajs[ti];
    for (int t = 0; t < tr.T(); ++t) {
      out.s.insert(out.s.end(), zs[ti].begin() + (size_t)t * z,
                   zs[ti].begin() + (size_t)(t + 1) * z);
      out.s2.insert(out.s2.end(), zs[ti].begin() + (size_t)(t + 1) * z,
                    zs[ti].begin() + (size_t)(t + 2) * z);
      out.a.insert(out.a.end(), tr.actions.data() + (size_t)t * na,
                   tr.actions.data() + (size_t)(t + 1) * na);
      out.r.push_back(tr.rewards[(size_t)t]);
      out.done.push_back(tr.done[(size_t)t]);
    }
  }
  return out;
}

/// Mean PSNR of decode(posterior0 mean) against the source frames, over the
/// first `n_frames` frames of the dataset (deterministic probe order).
template <typename S>
double repr_roundtrip_psnr(const ReprModelT<S>& m, const Dataset& d, int n_frames) {
  const int R = m.cfg.resolution;
  const int64_t fsz = (int64_t)3 * R * R;
  auto& mm = const_cast<ReprModelT<S>&>(m);
  EvalGuardT<S> guard(mm.ps);
  double acc = 0;
  int got = 0;
  for (auto& tr : d.trajs) {
    for (int t = 0; t <= tr.T() && got < n_frames; ++t, ++got) {
      TensorT<S> x({1, 3, R, R});
      frame_to_chw(tr.frame(t), R, x.ptr());
      auto [mu, lv] = m.posterior0(m.encode(constant(x)));
      (void)lv;
      auto xhat = m.decode(mu);
      std::vector<float> a((size_t)fsz), b((size_t)fsz);
      for (int64_t k = 0; k < fsz; ++k) {
        a[(size_t)k] = (float)x[k];
        b[(size_t)k] = (float)xhat->val[k];
      }
      acc += psnr(a.data(), b.data(), fsz);
    }
    if (got >= n_frames) break;
  }
  if (got == 0) throw std::invalid_argument("roundtrip psnr: dataset has no frames");
  return acc / got;
}

/// Pretrainer: Adam over ELBO on random windows of tau frames.
template <typename S>
struct ReprTrainerT {
  ReprModelT<S> model;
  AdamT<S> opt;
  Rng rng;
  int steps_done = 0;

  ReprTrainerT(ReprConfigT<S> cfg, int na, uint64_t seed)
      : model(cfg, na, seed), opt(cfg.lr, (S)0.9, (S)0.999), rng(seed, 0xe1b0) {
    opt.ensure(model.ps);
  }

  struct StepStats {
    double total, recon, kl0, kl_seq;
  };

  StepStats train_step(const Dataset& d, const std::vector<int>& usable) {
    const auto& cfg = model.cfg;
    int R = cfg.resolution, tau = cfg.tau, na = model.na, B = cfg.batch;
    int64_t fsz = (int64_t)3 * R * R;
    TensorT<S> frames({B, tau, 3, R, R}), actions({B, tau - 1, na});
    for (int b = 0; b < B; ++b) {
      const Trajectory& tr =
          d.trajs[(size_t)usable[(size_t)rng.uniform_int((int64_t)usable.size())]];
      int t0 = (int)rng.uniform_int((int64_t)(tr.T() + 2 - tau));
      for (int t = 0; t < tau; ++t)
        frame_to_chw(tr.frame(t0 + t), R,
                     frames.ptr() + ((int64_t)b * tau + t) * fsz);
      for (int t = 0; t < tau - 1; ++t)
        for (int k = 0; k < na; ++k)
          actions[((int64_t)b * (tau - 1) + t) * na + k] =
              (S)tr.actions[(size_t)(t0 + t) * na + k];
    }
    auto terms = model.elbo(frames, actions, rng);
    model.ps.zero_grad();
    backward(terms.total);
    opt.step(model.ps);
    ++steps_done;
    return {(double)terms.total->val[0], (double)terms.recon->val[0],
            (double)terms.kl0->val[0], (double)terms.kl_seq->val[0]};
  }

  void save(const std::string& path, uint64_t seed) const {
    Checkpoint c;
    Manifest m;
    model.cfg.to_manifest(m, "repr.");
    for (auto& it : m.items) c.set_meta(it.first, it.second);
    c.set_meta("na", std::to_string(model.na));
    c.set_meta("seed", std::to_string(seed));
    c.set_meta("steps_done", std::to_string(steps_done));
    c.set_meta("rng.state", std::to_string(rng.state));
    c.set_meta("rng.inc", std::to_string(rng.inc));
    checkpoint_pack(c, model.ps, &opt, "adam.t");
    c.save(path);
  }
  void restore(const Checkpoint& c) {
    checkpoint_unpack(c, model.ps, &opt, "adam.t");
    steps_done = (int)std::stoll(c.get_meta("steps_done"));
    rng.state = std::stoull(c.get_meta("rng.state"));
    rng.inc = std::stoull(c.get_meta("rng.inc"));
  }
};

/// Run (or resume) pretraining; writes repr_log.csv and checkpoints under
/// out_dir. Returns the final step's loss components.
template <typename S>
typename ReprTrainerT<S>::StepStats train_repr(
    ReprTrainerT<S>& tr, const Dataset& d, uint64_t seed, const std::string& out_dir,
    const std::function<void(int, double)>& progress = {}) {
  std::filesystem::create_directories(out_dir);
  const auto& cfg = tr.model.cfg;
  if (d.resolution() != cfg.resolution)
    throw std::invalid_argument("repr training: resolution mismatch");
  std::vector<int> usable;
  for (size_t i = 0; i < d.trajs.size(); ++i)
    if (d.trajs[i].T() + 2 - cfg.tau >= 1) usable.push_back((int)i);
  if (usable.empty())
    throw std::invalid_argument("repr training: no trajectory is tau frames long");

  CsvWriter log;
  std::string log_path = out_dir + "/repr_log.csv";
  if (tr.steps_done == 0) {
    log.open(log_path, {"step", "total", "recon", "kl0", "kl_seq"});
  } else {
    log.f.open(log_path, std::ios::app);
    log.ncols = 5;
  }
  typename ReprTrainerT<S>::StepStats last{0, 0, 0, 0};
  for (int s = tr.steps_done; s < cfg.steps; ++s) {
    last = tr.train_step(d, usable);
    log.row({std::to_string(s), fmt_g9(last.total), fmt_g9(last.recon),
             fmt_g9(last.kl0), fmt_g9(last.kl_seq)});
    if ((s + 1) % cfg.save_every == 0 || s + 1 == cfg.steps)
      tr.save(out_dir + "/ckpt_latest.ckpt", seed);
    if (progress) progress(s, last.total);
  }
  tr.save(out_dir + "/ckpt_latest.ckpt", seed);
  return last;
}

}  // namespace s2p
