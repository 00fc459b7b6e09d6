#pragma once

#include "s2p/data/dataset.hpp"
#include "s2p/env/scrollcart.hpp"
#include "s2p/io/csv.hpp"

namespace s2p {

enum class PolicyKind { Expert, Random, Mixed };

inline PolicyKind parse_policy(const std::string& s) {
  if (s == "expert") return PolicyKind::Expert;
  if (s == "random") return PolicyKind::Random;
  if (s == "mixed") return PolicyKind::Mixed;
  throw std::invalid_argument("unknown policy '" + s + "' (expert|random|mixed)");
}

/// Roll episodes until `n_transitions` are on disk. `mixed` perturbs the
/// expert with Gaussian noise whose scale anneals 1 -> 0 across episodes,
/// sweeping from near-random to optimal behaviour.
inline void collect_dataset(const ScrollCartConfig& cfg, PolicyKind pk, int64_t n_transitions,
                            uint64_t seed, const std::string& out_dir) {
  ScrollCart env(cfg);
  Rng rng(seed, 0x5eed);
  const int T = cfg.episode_len;
  int episodes = (int)((n_transitions + T - 1) / T);
  std::vector<Trajectory> trajs;
  int64_t remaining = n_transitions;
  const int R = cfg.resolution;
  const size_t frame_bytes = (size_t)R * R * 3;

  for (int ep = 0; ep < episodes; ++ep) {
    int len = (int)std::min<int64_t>(T, remaining);
    remaining -= len;
    double sigma = episodes > 1 ? 1.0 - (double)ep / (episodes - 1) : 0.0;

    Trajectory tr;
    tr.ns = ScrollCart::ns;
    tr.na = 1;
    tr.resolution = R;
    tr.states.reserve((size_t)(len + 1) * ScrollCart::ns);
    tr.frames.resize((size_t)(len + 1) * frame_bytes);
    auto st = env.reset(rng);
    auto push_obs = [&](const ScrollCartState& s, int t) {
      auto o = env.observe(s);
      tr.states.insert(tr.states.end(), o.begin(), o.end());
      env.render(s, tr.frames.data() + (size_t)t * frame_bytes);
    };
    push_obs(st, 0);
    for (int t = 0; t < len; ++t) {
      double a;
      switch (pk) {
        case PolicyKind::Expert: a = env.expert_action(st); break;
        case PolicyKind::Random: a = rng.uniform(-1.0, 1.0); break;
        case PolicyKind::Mixed:
          a = std::clamp(env.expert_action(st) + sigma * rng.normal(), -1.0, 1.0);
          break;
      }
      auto res = env.step(st, a);
      tr.actions.push_back((float)a);
      tr.rewards.push_back((float)res.reward);
      tr.done.push_back(t == len - 1 ? 1 : 0);
      st = res.next;
      push_obs(st, t + 1);
    }
    trajs.push_back(std::move(tr));
  }

  Manifest m;
  m.set("format", "traj-v1");
  m.set("kind", "scrollcart");
  m.set("policy", pk == PolicyKind::Expert ? "expert"
                  : pk == PolicyKind::Random ? "random"
                                             : "mixed");
  m.set_int("ns", ScrollCart::ns);
  m.set_int("na", 1);
  m.set_int("resolution", R);
  m.set_int("seed", (long long)seed);
  m.set_int("episode_len", T);
  m.set("env.v_max", fmt_g17(cfg.v_max));
  m.set("env.drive", fmt_g17(cfg.drive));
  m.set("env.friction", fmt_g17(cfg.friction));
  m.set("env.wheel_radius", fmt_g17(cfg.wheel_radius));
  save_dataset(out_dir, std::move(m), trajs);
}

/// Mean undiscounted return of a scripted policy, for score normalization.
inline double scripted_return(const ScrollCartConfig& cfg, PolicyKind pk, int episodes,
                              uint64_t seed) {
  ScrollCart env(cfg);
  Rng rng(seed, 0xeaa1);
  double total = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    auto st = env.reset(rng);
    for (int t = 0; t < cfg.episode_len; ++t) {
      double a = pk == PolicyKind::Expert ? env.expert_action(st) : rng.uniform(-1.0, 1.0);
      auto res = env.step(st, a);
      total += res.reward;
      st = res.next;
    }
  }
  return total / episodes;
}

}  // namespace s2p
