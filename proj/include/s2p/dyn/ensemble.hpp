#pragma once

#include <iostream>

#include "s2p/core/adam.hpp"
#include "s2p/data/sampler.hpp"
#include "s2p/io/checkpoint.hpp"
#include "s2p/io/csv.hpp"

namespace s2p {

// Probabilistic ensemble T(s', r | s, a): N independent Gaussian MLPs over
// normalized inputs/targets, trained by maximum likelihood on bootstrap
// resamples. Predictions expose per-member mean and diagonal variance in
// physical units; the uncertainty quantifiers feed the penalized reward.

template <typename S>
struct DynamicsConfigT {
  int n_members = 7;
  int hidden = 256;
  int layers = 3;  // hidden layers per member
  S lr = (S)1e-3;
  int batch = 256;
  int epochs = 40;
  S min_logvar = (S)-10, max_logvar = (S)0.5;
  // Start the variance head near the lower bound: training raises it toward the
  // data noise level, so off-data extrapolation errs toward inflated variance
  // (the conservative direction for a pessimistic reward penalty).
  S logvar_bias_init = (S)-8;

  void to_manifest(Manifest& m, const std::string& p) const {
    m.set_int(p + "n_members", n_members);
    m.set_int(p + "hidden", hidden);
    m.set_int(p + "layers", layers);
    m.set(p + "lr", fmt_g17((double)lr));
    m.set_int(p + "batch", batch);
    m.set_int(p + "epochs", epochs);
    m.set(p + "min_logvar", fmt_g17((double)min_logvar));
    m.set(p + "max_logvar", fmt_g17((double)max_logvar));
    m.set(p + "logvar_bias_init", fmt_g17((double)logvar_bias_init));
  }
  static DynamicsConfigT from_manifest(const Manifest& m, const std::string& p) {
    DynamicsConfigT c;
    c.n_members = (int)m.get_int(p + "n_members");
    c.hidden = (int)m.get_int(p + "hidden");
    c.layers = (int)m.get_int(p + "layers");
    c.lr = (S)m.get_double(p + "lr");
    c.batch = (int)m.get_int(p + "batch");
    c.epochs = (int)m.get_int(p + "epochs");
    c.min_logvar = (S)m.get_double(p + "min_logvar");
    c.max_logvar = (S)m.get_double(p + "max_logvar");
    c.logvar_bias_init = (S)m.get_double(p + "logvar_bias_init");
    return c;
  }
};

/// Column-wise mean/std with an epsilon floor; near-constant columns are
/// reported so degenerate datasets are visible rather than silently scaled.
template <typename S>
struct NormalizerT {
  TensorT<S> mean, stddev;
  std::vector<int> constant_cols;
  static constexpr double kEps = 1e-6;

  void fit(const std::vector<float>& data, int dim) {
    int64_t n = (int64_t)data.size() / dim;
    mean = TensorT<S>({dim});
    stddev = TensorT<S>({dim});
    constant_cols.clear();
    for (int d = 0; d < dim; ++d) {
      double acc = 0;
      for (int64_t i = 0; i < n; ++i) acc += data[(size_t)(i * dim + d)];
      double mu = acc / (double)n;
      double sq = 0;
      for (int64_t i = 0; i < n; ++i) {
        double x = data[(size_t)(i * dim + d)] - mu;
        sq += x * x;
      }
      double sd = std::sqrt(sq / (double)n);
      if (sd < kEps) {
        constant_cols.push_back(d);
        sd = kEps;
      }
      mean[d] = (S)mu;
      stddev[d] = (S)sd;
    }
    if (!constant_cols.empty()) {
      std::cerr << "warning: normalizer found " << constant_cols.size()
                << " near-constant column(s); using epsilon scale\n";
    }
  }
  void apply(const float* in, S* out, int dim) const {
    for (int d = 0; d < dim; ++d) out[d] = ((S)in[d] - mean[d]) / stddev[d];
  }
  double unapply_mean(double v, int d) const { return v * (double)stddev[d] + (double)mean[d]; }
  double unapply_var(double v, int d) const {
    return v * (double)stddev[d] * (double)stddev[d];
  }
};

/// Per-member Gaussian head MLP; log-variance soft-clamped to a fixed band.
template <typename S>
struct EnsembleMemberT {
  ParamStoreT<S> ps;
  std::vector<LinearLayerT<S>> trunk;
  LinearLayerT<S> mu_head, logvar_head;
  AdamT<S> opt;

  EnsembleMemberT() = default;
  EnsembleMemberT(const DynamicsConfigT<S>& cfg, int in_dim, int out_dim, Rng& rng)
      : opt(cfg.lr, (S)0.9, (S)0.999) {
    int prev = in_dim;
    for (int l = 0; l < cfg.layers; ++l) {
      trunk.emplace_back(ps, "fc" + std::to_string(l), prev, cfg.hidden, rng,
                         (S)std::sqrt(2.0));
      prev = cfg.hidden;
    }
    mu_head = LinearLayerT<S>(ps, "mu", prev, out_dim, rng);
    logvar_head =
        LinearLayerT<S>(ps, "logvar", prev, out_dim, rng, (S)1, cfg.logvar_bias_init);
  }

  /// Returns (mu, logvar) in normalized target space.
  std::pair<VarT<S>, VarT<S>> forward(const VarT<S>& x, const DynamicsConfigT<S>& cfg) const {
    VarT<S> h = x;
    for (auto& l : trunk) h = relu(l(h));
    auto mu = mu_head(h);
    auto lv = logvar_head(h);
    // soft clamp: max - softplus(max - lv), then min + softplus(lv - min)
    lv = sub(constant(TensorT<S>(lv->val.shape, cfg.max_logvar)),
             softplus(sub(constant(TensorT<S>(lv->val.shape, cfg.max_logvar)), lv)));
    lv = add(constant(TensorT<S>(lv->val.shape, cfg.min_logvar)),
             softplus(sub(lv, constant(TensorT<S>(lv->val.shape, cfg.min_logvar)))));
    return {mu, lv};
  }
};

/// Mean Gaussian negative log-likelihood over a batch:
/// mean_b 0.5 * sum_d [ (t-mu)^2 / sigma^2 + log sigma^2 + log 2pi ].
template <typename S>
VarT<S> gaussian_nll(const VarT<S>& mu, const VarT<S>& logvar, const VarT<S>& target) {
  auto diff = sub(target, mu);
  auto inv_var = exp_v(neg(logvar));
  auto per = add(add(mul(square(diff), inv_var), logvar),
                 constant(TensorT<S>(logvar->val.shape, (S)std::log(2.0 * M_PI))));
  return mul_c(mean_all(sum_rows(per)), (S)0.5);
}

struct EnsemblePrediction {
  // physical (de-normalized) units; double precision for exact uncertainty
  std::vector<std::vector<double>> mu;   // per member, dim ns+1
  std::vector<std::vector<double>> var;  // per member, dim ns+1
};

enum class UncertaintyKind { MaxVar, EnsVar, AverageBoth };

inline UncertaintyKind parse_uncertainty(const std::string& s) {
  if (s == "max_var") return UncertaintyKind::MaxVar;
  if (s == "ens_var") return UncertaintyKind::EnsVar;
  if (s == "average_both") return UncertaintyKind::AverageBoth;
  throw std::invalid_argument("unknown uncertainty kind '" + s +
                              "' (max_var|ens_var|average_both)");
}
inline const char* uncertainty_name(UncertaintyKind k) {
  switch (k) {
    case UncertaintyKind::MaxVar: return "max_var";
    case UncertaintyKind::EnsVar: return "ens_var";
    default: return "average_both";
  }
}

/// max_var: max_i ||Sigma_i||_F with Sigma_i the diagonal covariance.
/// ens_var: max_i ||mu_i - mean_j mu_j||_2. average_both: their mean.
inline double uncertainty(const EnsemblePrediction& p, UncertaintyKind kind) {
  size_t n = p.mu.size();
  size_t d = p.mu[0].size();
  auto max_var = [&] {
    double best = 0;
    for (size_t i = 0; i < n; ++i) {
      double acc = 0;
      for (size_t k = 0; k < d; ++k) acc += p.var[i][k] * p.var[i][k];
      best = std::max(best, std::sqrt(acc));
    }
    return best;
  };
  auto ens_var = [&] {
    std::vector<double> center(d, 0.0);
    for (size_t i = 0; i < n; ++i)
      for (size_t k = 0; k < d; ++k) center[k] += p.mu[i][k];
    for (auto& c : center) c /= (double)n;
    double best = 0;
    for (size_t i = 0; i < n; ++i) {
      double acc = 0;
      for (size_t k = 0; k < d; ++k) {
        double dv = p.mu[i][k] - center[k];
        acc += dv * dv;
      }
      best = std::max(best, std::sqrt(acc));
    }
    return best;
  };
  switch (kind) {
    case UncertaintyKind::MaxVar: return max_var();
    case UncertaintyKind::EnsVar: return ens_var();
    default: return (max_var() + ens_var()) / 2.0;
  }
}

inline double penalized_reward(double r_hat, double u, double lambda) {
  return r_hat - lambda * u;
}

/// Pessimism applied to model rewards: r~ = r^ - lambda * u(kind).
struct PenaltyConfig {
  UncertaintyKind kind = UncertaintyKind::MaxVar;
  double lambda = 2.0;

  void to_manifest(Manifest& m, const std::string& p) const {
    m.set(p + "kind", uncertainty_name(kind));
    m.set(p + "lambda", fmt_g17(lambda));
  }
  static PenaltyConfig from_manifest(const Manifest& m, const std::string& p) {
    PenaltyConfig c;
    c.kind = parse_uncertainty(m.get_or(p + "kind", uncertainty_name(c.kind)));
    c.lambda = std::stod(m.get_or(p + "lambda", fmt_g17(c.lambda)));
    if (c.lambda < 0) throw std::invalid_argument("penalty lambda must be >= 0");
    return c;
  }
};

template <typename S>
struct DynamicsEnsembleT {
  DynamicsConfigT<S> cfg;
  int ns = 0, na = 0;
  NormalizerT<S> in_norm, tgt_norm;
  std::vector<EnsembleMemberT<S>> members;

  DynamicsEnsembleT() = default;
  DynamicsEnsembleT(DynamicsConfigT<S> c, int ns_, int na_, uint64_t seed)
      : cfg(c), ns(ns_), na(na_) {
    for (int i = 0; i < cfg.n_members; ++i) {
      Rng rng(seed + (uint64_t)i, 0xd7a1);
      members.emplace_back(cfg, ns + na, ns + 1, rng);
    }
  }

  /// MLE training on bootstrap resamples; returns final mean validation NLL.
  double train(const Transitions& tx, uint64_t seed, const std::string& csv_path = "") {
    if (tx.size() == 0) throw std::runtime_error("train-dynamics: empty dataset");
    int in_dim = ns + na, out_dim = ns + 1;
    int64_t n = tx.size();

    // assemble raw input/target matrices
    std::vector<float> in_raw((size_t)(n * in_dim)), tgt_raw((size_t)(n * out_dim));
    for (int64_t i = 0; i < n; ++i) {
      for (int k = 0; k < ns; ++k) in_raw[(size_t)(i * in_dim + k)] = tx.s[(size_t)(i * ns + k)];
      for (int k = 0; k < na; ++k)
        in_raw[(size_t)(i * in_dim + ns + k)] = tx.a[(size_t)(i * na + k)];
      for (int k = 0; k < ns; ++k)
        tgt_raw[(size_t)(i * out_dim + k)] = tx.s2[(size_t)(i * ns + k)];
      tgt_raw[(size_t)(i * out_dim + ns)] = tx.r[(size_t)i];
    }
    in_norm.fit(in_raw, in_dim);
    tgt_norm.fit(tgt_raw, out_dim);

    // shared validation split (last 10% of a seeded shuffle)
    Rng split_rng(seed, 0x5b17);
    std::vector<int64_t> order(n);
    for (int64_t i = 0; i < n; ++i) order[(size_t)i] = i;
    for (int64_t i = n; i > 1; --i)
      std::swap(order[(size_t)(i - 1)], order[(size_t)split_rng.uniform_int(i)]);
    int64_t nval = std::max<int64_t>(1, n / 10);
    int64_t ntrain = n - nval;

    auto fill_batch = [&](const std::vector<int64_t>& rows, size_t at, int count,
                          TensorT<S>& xin, TensorT<S>& xtgt) {
      xin = TensorT<S>({count, in_dim});
      xtgt = TensorT<S>({count, out_dim});
      for (int b = 0; b < count; ++b) {
        int64_t r = rows[at + (size_t)b];
        in_norm.apply(in_raw.data() + r * in_dim, xin.ptr() + (int64_t)b * in_dim, in_dim);
        tgt_norm.apply(tgt_raw.data() + r * out_dim, xtgt.ptr() + (int64_t)b * out_dim,
                       out_dim);
      }
    };

    std::vector<int64_t> val_rows(order.begin() + ntrain, order.end());
    CsvWriter log;
    if (!csv_path.empty()) log.open(csv_path, {"epoch", "member", "train_nll", "val_nll"});

    double final_val = 0;
    for (int mi = 0; mi < (int)members.size(); ++mi) {
      auto& m = members[(size_t)mi];
      Rng rng(seed + (uint64_t)mi * 7919, 0xb007);
      // bootstrap resample of the training rows
      std::vector<int64_t> boot((size_t)ntrain);
      for (auto& r : boot) r = order[(size_t)rng.uniform_int(ntrain)];

      double val_nll = 0;
      for (int ep = 0; ep < cfg.epochs; ++ep) {
        for (size_t i = boot.size(); i > 1; --i)
          std::swap(boot[i - 1], boot[(size_t)rng.uniform_int((int64_t)i)]);
        double train_nll = 0;
        int64_t nb = std::max<int64_t>(1, ntrain / cfg.batch);
        for (int64_t bi = 0; bi < nb; ++bi) {
          int count = (int)std::min<int64_t>(cfg.batch, ntrain - bi * cfg.batch);
          if (count <= 0) break;
          TensorT<S> xin, xtgt;
          fill_batch(boot, (size_t)(bi * cfg.batch), count, xin, xtgt);
          auto [mu, lv] = m.forward(constant(xin), cfg);
          auto loss = gaussian_nll(mu, lv, constant(xtgt));
          m.ps.zero_grad();
          backward(loss);
          m.opt.step(m.ps);
          train_nll += (double)loss->val[0];
        }
        train_nll /= (double)nb;

        // validation NLL
        val_nll = 0;
        {
          EvalGuardT<S> guard(m.ps);
          int64_t done = 0;
          while (done < nval) {
            int count = (int)std::min<int64_t>(512, nval - done);
            TensorT<S> xin, xtgt;
            fill_batch(val_rows, (size_t)done, count, xin, xtgt);
            auto [mu, lv] = m.forward(constant(xin), cfg);
            auto loss = gaussian_nll(mu, lv, constant(xtgt));
            val_nll += (double)loss->val[0] * count;
            done += count;
          }
          val_nll /= (double)nval;
        }
        if (!csv_path.empty())
          log.row({std::to_string(ep), std::to_string(mi), fmt_g9(train_nll),
                   fmt_g9(val_nll)});
      }
      final_val += val_nll;
    }
    return final_val / (double)members.size();
  }

  /// All members' (mu, var) in physical units for one (s, a).
  EnsemblePrediction predict_all(const float* s, const float* a) const {
    int in_dim = ns + na, out_dim = ns + 1;
    std::vector<float> raw((size_t)in_dim);
    std::copy_n(s, ns, raw.data());
    std::copy_n(a, na, raw.data() + ns);
    TensorT<S> xin({1, in_dim});
    in_norm.apply(raw.data(), xin.ptr(), in_dim);
    EnsemblePrediction out;
    for (auto& m : members) {
      auto& mm = const_cast<EnsembleMemberT<S>&>(m);
      EvalGuardT<S> guard(mm.ps);
      auto [mu, lv] = m.forward(constant(xin), cfg);
      std::vector<double> muv((size_t)out_dim), varv((size_t)out_dim);
      for (int d = 0; d < out_dim; ++d) {
        muv[(size_t)d] = tgt_norm.unapply_mean((double)mu->val[d], d);
        varv[(size_t)d] = tgt_norm.unapply_var(std::exp((double)lv->val[d]), d);
      }
      out.mu.push_back(std::move(muv));
      out.var.push_back(std::move(varv));
    }
    return out;
  }

  struct Sample {
    std::vector<double> next_state;  // dim ns
    double reward = 0;
    int member = -1;
  };

  /// Draw s', r from one member's Gaussian (random member unless pinned).
  Sample sample(const EnsemblePrediction& pred, Rng& rng, int member = -1) const {
    Sample out;
    out.member = member >= 0 ? member : (int)rng.uniform_int((int64_t)pred.mu.size());
    const auto& mu = pred.mu[(size_t)out.member];
    const auto& var = pred.var[(size_t)out.member];
    out.next_state.resize((size_t)ns);
    for (int d = 0; d < ns; ++d)
      out.next_state[(size_t)d] = mu[(size_t)d] + std::sqrt(var[(size_t)d]) * rng.normal();
    out.reward = mu[(size_t)ns] + std::sqrt(var[(size_t)ns]) * rng.normal();
    return out;
  }

  void save(const std::string& path, uint64_t seed) const {
    Checkpoint c;
    Manifest m;
    cfg.to_manifest(m, "dyn.");
    for (auto& it : m.items) c.set_meta(it.first, it.second);
    c.set_meta("ns", std::to_string(ns));
    c.set_meta("na", std::to_string(na));
    c.set_meta("seed", std::to_string(seed));
    c.add("norm.in_mean", in_norm.mean.template cast<float>());
    c.add("norm.in_std", in_norm.stddev.template cast<float>());
    c.add("norm.tgt_mean", tgt_norm.mean.template cast<float>());
    c.add("norm.tgt_std", tgt_norm.stddev.template cast<float>());
    for (size_t i = 0; i < members.size(); ++i) {
      Checkpoint part;
      checkpoint_pack(part, members[i].ps, (const AdamT<S>*)nullptr);
      for (auto& ar : part.arrays)
        c.add("m" + std::to_string(i) + "." + ar.first, std::move(ar.second));
    }
    c.save(path);
  }

  static DynamicsEnsembleT load(const std::string& path) {
    Checkpoint c = Checkpoint::load(path);
    Manifest m;
    for (auto& it : c.meta) m.set(it.first, it.second);
    auto cfg = DynamicsConfigT<S>::from_manifest(m, "dyn.");
    DynamicsEnsembleT e(cfg, (int)m.get_int("ns"), (int)m.get_int("na"),
                        (uint64_t)m.get_int("seed"));
    e.in_norm.mean = c.find("norm.in_mean").cast<S>();
    e.in_norm.stddev = c.find("norm.in_std").cast<S>();
    e.tgt_norm.mean = c.find("norm.tgt_mean").cast<S>();
    e.tgt_norm.stddev = c.find("norm.tgt_std").cast<S>();
    for (size_t i = 0; i < e.members.size(); ++i) {
      for (auto& p : e.members[i].ps.params) {
        const Tensor& t = c.find("m" + std::to_string(i) + "." + p.name);
        if (t.shape != p.var->val.shape)
          throw std::runtime_error("dynamics checkpoint shape mismatch: " + p.name);
        p.var->val = t.cast<S>();
      }
    }
    return e;
  }
};

}  // namespace s2p
