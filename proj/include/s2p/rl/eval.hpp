#pragma once

#include <functional>

#include "s2p/data/collect.hpp"
#include "s2p/env/scrollcart.hpp"
#include "s2p/repr/slac.hpp"
#include "s2p/rl/offline.hpp"

namespace s2p {

/// 100 * (ret - random) / (expert - random).
inline double normalized_score(double ret, double random_score, double expert_score) {
  return 100.0 * (ret - random_score) / (expert_score - random_score);
}

/// Scripted-controller returns used for score normalization.
struct ScoreRef {
  double random_score = 0;
  double expert_score = 0;
  double normalize(double ret) const {
    return normalized_score(ret, random_score, expert_score);
  }
};

/// Frozen 100-episode means of the scripted controllers on the default
/// ScrollCart (seed 17). Recomputable via scripted_return; a test pins them.
inline ScoreRef scrollcart_score_ref() {
  return {3.6337738631152599, 98.471819755773679};
}

/// Mean undiscounted return of `act` over full episodes. `act` maps the
/// 3-float observation to an action in [-1,1].
inline double evaluate_policy(const ScrollCartConfig& cfg,
                              const std::function<double(const float*)>& act, int episodes,
                              uint64_t seed) {
  ScrollCart env(cfg);
  Rng rng(seed, 0xe7a1);
  double total = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    auto st = env.reset(rng);
    for (int t = 0; t < cfg.episode_len; ++t) {
      auto obs = env.observe(st);
      auto res = env.step(st, act(obs.data()));
      total += res.reward;
      st = res.next;
    }
  }
  return total / episodes;
}

/// Deterministic (policy-mean) evaluation of an agent that consumes raw env
/// observations. Returns (mean return, normalized score).
template <typename S>
std::pair<double, double> evaluate_state_agent(const OfflineTrainerT<S>& tr,
                                               const ScrollCartConfig& cfg, int episodes,
                                               uint64_t seed) {
  if (tr.ns != ScrollCart::ns || tr.na != 1)
    throw std::invalid_argument("state agent evaluation: agent dims don't match the env");
  double ret = evaluate_policy(
      cfg,
      [&](const float* obs) {
        float a;
        tr.act_mean(obs, &a);
        return (double)a;
      },
      episodes, seed);
  return {ret, scrollcart_score_ref().normalize(ret)};
}

/// Deterministic evaluation of an agent acting from filtered latents: each
/// step renders the frame, updates the belief with the previous action, and
/// feeds the belief mean to the policy. Frames pass through the same uint8
/// quantization as stored datasets.
template <typename S>
std::pair<double, double> evaluate_latent_agent(const OfflineTrainerT<S>& tr,
                                                const ReprModelT<S>& repr,
                                                const ScrollCartConfig& cfg, int episodes,
                                                uint64_t seed) {
  if (tr.ns != repr.cfg.z_dim || tr.na != 1)
    throw std::invalid_argument("latent agent evaluation: agent dims don't match the model");
  if (cfg.resolution != repr.cfg.resolution)
    throw std::invalid_argument("latent agent evaluation: resolution mismatch");
  ScrollCart env(cfg);
  Rng rng(seed, 0xe7a1);
  const int R = cfg.resolution;
  std::vector<uint8_t> rgb((size_t)3 * R * R);
  TensorT<S> frame({1, 3, R, R});
  TensorT<S> act_prev({1, 1});
  std::vector<float> zf((size_t)repr.cfg.z_dim);
  double total = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    BeliefFilterT<S> belief(repr);
    auto st = env.reset(rng);
    env.render(st, rgb.data());
    frame_to_chw(rgb.data(), R, frame.ptr());
    belief.reset(frame);
    for (int t = 0; t < cfg.episode_len; ++t) {
      float a;
      for (int i = 0; i < repr.cfg.z_dim; ++i) zf[(size_t)i] = (float)belief.z[i];
      tr.act_mean(zf.data(), &a);
      auto res = env.step(st, (double)a);
      total += res.reward;
      st = res.next;
      env.render(st, rgb.data());
      frame_to_chw(rgb.data(), R, frame.ptr());
      act_prev[0] = (S)a;
      belief.step(frame, act_prev);
    }
  }
  return {total / episodes, scrollcart_score_ref().normalize(total / episodes)};
}

}  // namespace s2p
