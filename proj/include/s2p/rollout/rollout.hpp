#pragma once

#include <functional>

#include "s2p/data/relabel.hpp"
#include "s2p/data/sampler.hpp"
#include "s2p/dyn/ensemble.hpp"
#include "s2p/gen/s2p_train.hpp"

namespace s2p {

// Model-based data augmentation: seed (I0, s0) pairs drawn from a real
// dataset, roll the dynamics ensemble under a rollout policy eta, penalize
// each model reward by the ensemble's uncertainty, and render the synthetic
// state trajectory to frames with the generator — recurrently, starting
// from the real seed frame, so the first generated frame always conditions
// on a real image.

enum class EtaKind { RandomPolicy, OfflineRlPolicy };

inline EtaKind parse_eta(const std::string& s) {
  if (s == "random_policy" || s == "random") return EtaKind::RandomPolicy;
  if (s == "offline_rl_policy" || s == "offline_rl") return EtaKind::OfflineRlPolicy;
  throw std::invalid_argument("unknown eta kind '" + s +
                              "' (random_policy|offline_rl_policy)");
}
inline const char* eta_name(EtaKind k) {
  return k == EtaKind::RandomPolicy ? "random_policy" : "offline_rl_policy";
}

/// Rollout action distribution eta(a|s). The callable fills `a` with `na`
/// components given the state and a per-rollout RNG.
struct Eta {
  EtaKind kind = EtaKind::RandomPolicy;
  int na = 1;
  std::function<void(const float* s, float* a, Rng& rng)> sample;
};

/// random_policy: uniform actions on [-1,1]^na. offline_rl_policy wraps a
/// trained state-space policy's sampling function, which must be supplied.
inline Eta make_eta(EtaKind kind, int na,
                    std::function<void(const float*, float*, Rng&)> state_policy = {}) {
  if (na < 1) throw std::invalid_argument("eta: action dim must be >= 1");
  Eta e;
  e.kind = kind;
  e.na = na;
  if (kind == EtaKind::RandomPolicy) {
    e.sample = [na](const float*, float* a, Rng& rng) {
      for (int i = 0; i < na; ++i) a[i] = (float)rng.uniform(-1.0, 1.0);
    };
  } else {
    if (!state_policy)
      throw std::invalid_argument("eta: offline_rl_policy needs a trained state policy");
    e.sample = std::move(state_policy);
  }
  return e;
}

struct RolloutConfig {
  EtaKind eta = EtaKind::RandomPolicy;
  int horizon = 1;         // M: steps per rollout
  int64_t k_rollouts = 0;  // K; 0 = auto: ceil(|D| / M), matching |D| in volume
  PenaltyConfig penalty;
  uint64_t seed = 0;

  void to_manifest(Manifest& m, const std::string& p) const {
    m.set(p + "eta", eta_name(eta));
    m.set_int(p + "horizon", horizon);
    m.set_int(p + "k", (long long)k_rollouts);
    penalty.to_manifest(m, p + "penalty.");
    m.set_int(p + "seed", (long long)seed);
  }
  static RolloutConfig from_manifest(const Manifest& m, const std::string& p) {
    RolloutConfig c;
    c.eta = parse_eta(m.get_or(p + "eta", eta_name(c.eta)));
    c.horizon = (int)std::stoll(m.get_or(p + "horizon", "1"));
    c.k_rollouts = std::stoll(m.get_or(p + "k", "0"));
    c.penalty = PenaltyConfig::from_manifest(m, p + "penalty.");
    c.seed = (uint64_t)std::stoll(m.get_or(p + "seed", "0"));
    if (c.horizon < 1) throw std::invalid_argument("rollout horizon must be >= 1");
    if (c.k_rollouts < 0) throw std::invalid_argument("rollout count must be >= 0");
    return c;
  }
};

struct RolloutStats {
  int64_t transitions = 0;           // always K * M
  int64_t k_rollouts = 0;            // K actually run (after the auto default)
  std::vector<double> mean_u;        // per step index 0..M-1, averaged over rollouts
  std::vector<double> mean_r_tilde;  // penalized reward, same layout
};

/// Algorithm: for each of K rollouts, sample a seed (I0, s0) uniformly from
/// the dataset (optionally restricted to states satisfying `seed_filter`),
/// then for t = 0..M-1 draw a_t ~ eta, sample (s_{t+1}, r^_t) from one
/// ensemble member, score the full ensemble's disagreement u_t, store
/// r~_t = r^_t - lambda * u_t (computed in double), and render I_{t+1} from
/// s_{t+1} and the previous frame with the generator. Frames pass through
/// the u8 storage quantizer between steps so recurrence matches the data
/// distribution the generator was trained on.
///
/// Writes the synthetic dataset (same trajectory format, manifest key
/// synthetic=true) plus rollout_log.csv (one row per transition; r_hat and
/// u at full precision so the stored reward is exactly recomputable) and
/// uncertainty_summary.csv (per-step means). Synthetic transitions never
/// set done: model rollouts carry no termination.
template <typename S>
RolloutStats rollout_augment(const Dataset& d, const DynamicsEnsembleT<S>& ens,
                             const GeneratorT<S>& gen, const Eta& eta,
                             const RolloutConfig& cfg, const std::string& out_dir,
                             const RelabelRule* seed_filter = nullptr) {
  if (d.n_transitions() == 0) throw std::invalid_argument("rollout: dataset is empty");
  if (ens.members.empty()) throw std::invalid_argument("rollout: ensemble has no members");
  const int ns = d.ns(), na = d.na(), R = d.resolution();
  if (ens.ns != ns || ens.na != na)
    throw std::invalid_argument("rollout: ensemble dims do not match dataset");
  if (gen.cfg.resolution != R)
    throw std::invalid_argument("rollout: generator resolution does not match dataset");
  if (eta.na != na) throw std::invalid_argument("rollout: eta action dim mismatch");
  if (!eta.sample) throw std::invalid_argument("rollout: eta has no sampler");
  if (cfg.horizon < 1) throw std::invalid_argument("rollout horizon must be >= 1");

  // Candidate seed positions: every (trajectory, t) with a stored frame.
  struct SeedPos {
    int32_t traj, t;
  };
  std::vector<SeedPos> cands;
  for (size_t i = 0; i < d.trajs.size(); ++i)
    for (int t = 0; t <= d.trajs[i].T(); ++t) {
      if (seed_filter && !seed_filter->satisfied(d.trajs[i].state(t))) continue;
      cands.push_back({(int32_t)i, t});
    }
  if (cands.empty())
    throw std::invalid_argument("rollout: no seed state satisfies the filter");

  const int M = cfg.horizon;
  const int64_t K =
      cfg.k_rollouts > 0 ? cfg.k_rollouts : (d.n_transitions() + M - 1) / M;
  const size_t fsz = (size_t)R * R * 3;

  // Phase 1: dynamics. Per-rollout RNG streams keep draws independent of
  // any later batching, so results do not depend on the render chunk size.
  Rng seed_rng(cfg.seed, 0x4077);
  std::vector<Trajectory> trajs((size_t)K);
  std::vector<double> r_hat((size_t)K * M), u_val((size_t)K * M);
  std::vector<int> member((size_t)K * M);
  std::vector<double> sum_u(M, 0.0), sum_rt(M, 0.0);
  for (int64_t k = 0; k < K; ++k) {
    const SeedPos& sp = cands[(size_t)seed_rng.uniform_int((int64_t)cands.size())];
    const Trajectory& src = d.trajs[(size_t)sp.traj];
    Rng rk(cfg.seed + (uint64_t)k * 7919ull, 0x4011);

    Trajectory& tr = trajs[(size_t)k];
    tr.ns = ns;
    tr.na = na;
    tr.resolution = R;
    tr.states.resize((size_t)(M + 1) * ns);
    tr.frames.resize((size_t)(M + 1) * fsz);
    tr.actions.resize((size_t)M * na);
    tr.rewards.resize((size_t)M);
    tr.done.assign((size_t)M, 0);
    std::copy_n(src.state(sp.t), ns, tr.states.data());
    std::copy_n(src.frame(sp.t), fsz, tr.frames.data());

    for (int t = 0; t < M; ++t) {
      const float* st = tr.state(t);
      float* at = tr.actions.data() + (size_t)t * na;
      eta.sample(st, at, rk);
      auto pred = ens.predict_all(st, at);
      auto samp = ens.sample(pred, rk);
      double u = uncertainty(pred, cfg.penalty.kind);
      double rt = penalized_reward(samp.reward, u, cfg.penalty.lambda);
      for (int j = 0; j < ns; ++j)
        tr.states[(size_t)(t + 1) * ns + j] = (float)samp.next_state[(size_t)j];
      tr.rewards[(size_t)t] = (float)rt;
      size_t row = (size_t)k * M + t;
      r_hat[row] = samp.reward;
      u_val[row] = u;
      member[row] = samp.member;
      sum_u[(size_t)t] += u;
      sum_rt[(size_t)t] += rt;
    }
  }

  // Phase 2: render frames 1..M recurrently from the seed frame, in fixed
  // chunks of rollouts. Outputs come back already round-tripped through the
  // u8 quantizer, so storing them is lossless.
  const int64_t chunk = 16;
  for (int64_t k0 = 0; k0 < K; k0 += chunk) {
    int B = (int)std::min<int64_t>(chunk, K - k0);
    TensorT<S> states({B, M, ns}), init({B, 3, R, R});
    for (int b = 0; b < B; ++b) {
      const Trajectory& tr = trajs[(size_t)(k0 + b)];
      for (int t = 0; t < M; ++t)
        for (int j = 0; j < ns; ++j)
          states[((int64_t)b * M + t) * ns + j] = (S)tr.state(t + 1)[j];
      frame_to_chw(tr.frame(0), R, init.ptr() + (int64_t)b * fsz);
    }
    TensorT<S> out = generate_rollout(gen, states, init);
    for (int b = 0; b < B; ++b) {
      Trajectory& tr = trajs[(size_t)(k0 + b)];
      for (int t = 0; t < M; ++t)
        chw_to_frame(out.ptr() + ((int64_t)b * M + t) * fsz, R,
                     tr.frames.data() + (size_t)(t + 1) * fsz);
    }
  }

  // Persist: dataset + per-transition log + per-step uncertainty summary.
  std::filesystem::create_directories(out_dir);
  Manifest m;
  m.set("format", "traj-v1");
  m.set("kind", d.meta.get_or("kind", "unknown"));
  m.set("policy", "model_rollout");
  m.set("synthetic", "true");
  m.set_int("ns", ns);
  m.set_int("na", na);
  m.set_int("resolution", R);
  m.set_int("seed", (long long)cfg.seed);
  m.set_int("episode_len", M);
  for (auto& it : d.meta.items)
    if (it.first.rfind("env.", 0) == 0) m.set(it.first, it.second);
  RolloutConfig stamped = cfg;
  stamped.k_rollouts = K;
  stamped.to_manifest(m, "rollout.");
  if (seed_filter)
    m.set("rollout.seed_filter",
          seed_filter->component_name + ">=" + fmt_g17(seed_filter->threshold));
  m.set("source.policy", d.meta.get_or("policy", "unknown"));

  CsvWriter log(out_dir + "/rollout_log.csv",
                {"rollout", "step", "member", "r_hat", "u", "r_tilde"});
  for (int64_t k = 0; k < K; ++k)
    for (int t = 0; t < M; ++t) {
      size_t row = (size_t)k * M + t;
      double rt = penalized_reward(r_hat[row], u_val[row], cfg.penalty.lambda);
      log.row({std::to_string(k), std::to_string(t), std::to_string(member[row]),
               fmt_g17(r_hat[row]), fmt_g17(u_val[row]), fmt_g17(rt)});
    }

  RolloutStats st;
  st.transitions = K * M;
  st.k_rollouts = K;
  CsvWriter summary(out_dir + "/uncertainty_summary.csv",
                    {"step", "mean_u", "mean_r_tilde"});
  for (int t = 0; t < M; ++t) {
    st.mean_u.push_back(sum_u[(size_t)t] / (double)K);
    st.mean_r_tilde.push_back(sum_rt[(size_t)t] / (double)K);
    summary.row({std::to_string(t), fmt_g17(st.mean_u.back()),
                 fmt_g17(st.mean_r_tilde.back())});
  }

  save_dataset(out_dir, std::move(m), trajs);
  return st;
}

}  // namespace s2p
