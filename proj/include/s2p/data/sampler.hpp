#pragma once

#include <cfenv>

#include "s2p/data/dataset.hpp"
#include "s2p/core/rng.hpp"

namespace s2p {

/// Flat (s, a, r, s', done) arrays across all trajectories of a dataset.
struct Transitions {
  int ns = 0, na = 0;
  std::vector<float> s, a, r, s2;
  std::vector<uint8_t> done;

  int64_t size() const { return (int64_t)r.size(); }

  void append(const Dataset& d) {
    ns = d.ns();
    na = d.na();
    for (auto& tr : d.trajs)
      for (int t = 0; t < tr.T(); ++t) {
        s.insert(s.end(), tr.state(t), tr.state(t) + ns);
        s2.insert(s2.end(), tr.state(t + 1), tr.state(t + 1) + ns);
        a.insert(a.end(), tr.actions.data() + (size_t)t * na,
                 tr.actions.data() + (size_t)(t + 1) * na);
        r.push_back(tr.rewards[(size_t)t]);
        done.push_back(tr.done[(size_t)t]);
      }
  }
  static Transitions from(const Dataset& d) {
    Transitions t;
    t.append(d);
    return t;
  }
};

/// (trajectory, t) pairs addressing frame t predicted from frame t-1.
struct PairIndex {
  int32_t traj;
  int32_t t;
};

inline std::vector<PairIndex> all_pairs(const Dataset& d) {
  std::vector<PairIndex> v;
  for (size_t i = 0; i < d.trajs.size(); ++i)
    for (int t = 1; t <= d.trajs[i].T(); ++t) v.push_back({(int32_t)i, t});
  return v;
}

/// Fill [B,ns] state, [B,3,R,R] previous frame, [B,3,R,R] target frame.
template <typename S>
void fill_pair_batch(const Dataset& d, const std::vector<PairIndex>& idx, size_t begin,
                     size_t count, TensorT<S>& state, TensorT<S>& prev, TensorT<S>& target) {
  int R = d.resolution(), ns = d.ns();
  int B = (int)count;
  state = TensorT<S>({B, ns});
  prev = TensorT<S>({B, 3, R, R});
  target = TensorT<S>({B, 3, R, R});
  int64_t fsz = (int64_t)3 * R * R;
  for (int b = 0; b < B; ++b) {
    auto& pi = idx[begin + (size_t)b];
    const Trajectory& tr = d.trajs[(size_t)pi.traj];
    for (int k = 0; k < ns; ++k) state[(int64_t)b * ns + k] = (S)tr.state(pi.t)[k];
    frame_to_chw(tr.frame(pi.t - 1), R, prev.ptr() + (int64_t)b * fsz);
    frame_to_chw(tr.frame(pi.t), R, target.ptr() + (int64_t)b * fsz);
  }
}

/// Rows drawn from the real dataset in a hybrid batch: round(f*B), ties to
/// even. f is the REAL-data ratio; the rest of the batch is synthetic.
inline int real_batch_count(int batch, double f) {
  std::fesetround(FE_TONEAREST);
  return (int)std::nearbyint(f * (double)batch);
}

/// Draw a batch mixing real and synthetic transition indices: exactly
/// real_batch_count(B,f) real rows, the rest synthetic (with replacement).
struct HybridDraw {
  std::vector<int64_t> real_rows, model_rows;
};
inline HybridDraw draw_hybrid(int batch, double f, int64_t n_real, int64_t n_model, Rng& rng) {
  HybridDraw h;
  int nr = real_batch_count(batch, f);
  if (nr > 0 && n_real == 0)
    throw std::runtime_error("hybrid sampling needs real data but none was given");
  if (batch - nr > 0 && n_model == 0)
    throw std::runtime_error("hybrid sampling needs synthetic data but none was given");
  for (int i = 0; i < nr; ++i) h.real_rows.push_back((int64_t)rng.uniform_int(n_real));
  for (int i = 0; i < batch - nr; ++i)
    h.model_rows.push_back((int64_t)rng.uniform_int(n_model));
  return h;
}

}  // namespace s2p
