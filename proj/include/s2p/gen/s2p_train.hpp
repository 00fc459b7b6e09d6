#pragma once

#include <filesystem>
#include <functional>

#include "s2p/data/sampler.hpp"
#include "s2p/gen/s2p.hpp"
#include "s2p/io/checkpoint.hpp"
#include "s2p/io/csv.hpp"
#include "s2p/metrics/metrics.hpp"

namespace s2p {

/// Deterministic 90/10 pair split keyed only by `seed`, so a held-out set can
/// be reproduced later from checkpoint metadata alone.
inline void split_pairs_seeded(const Dataset& data, uint64_t seed,
                               std::vector<PairIndex>& train, std::vector<PairIndex>& val) {
  auto pairs = all_pairs(data);
  if (pairs.empty()) throw std::runtime_error("train-s2p: dataset has no transitions");
  Rng split_rng(seed, 0x5917);  // dedicated stream
  for (size_t i = pairs.size(); i > 1; --i)
    std::swap(pairs[i - 1], pairs[(size_t)split_rng.uniform_int((int64_t)i)]);
  size_t nval = std::max<size_t>(1, pairs.size() / 10);
  val.assign(pairs.end() - (long)nval, pairs.end());
  train.assign(pairs.begin(), pairs.end() - (long)nval);
}

template <typename S>
struct S2pTrainerT {
  GeneratorConfigT<S> cfg;
  uint64_t seed;
  GeneratorT<S> G;
  MultiDiscriminatorT<S> D;
  PerceptualNetT<S> phi;
  AdamT<S> opt_g, opt_d;
  Rng rng;
  int epochs_done = 0;

  S2pTrainerT(GeneratorConfigT<S> c, int ns, uint64_t seed_)
      : cfg(c),
        seed(seed_),
        G(c, ns, seed_),
        D(ns, seed_ + 1),
        phi(777),
        opt_g(c.lr, (S)0.5, (S)0.999),
        opt_d(c.lr, (S)0.5, (S)0.999),
        rng(seed_, 0x7a17) {
    // allocate moment arrays up front so checkpoints round-trip even for
    // optimizers that have not stepped yet (e.g. lambda3 = 0 disables D)
    opt_g.ensure(G.ps);
    opt_d.ensure(D.ps);
  }

  void save(const std::string& path) const {
    Checkpoint c;
    Manifest m;
    cfg.to_manifest(m, "gen.");
    for (auto& it : m.items) c.set_meta(it.first, it.second);
    c.set_meta("ns", std::to_string(G.ns));
    c.set_meta("seed", std::to_string(seed));
    c.set_meta("epochs_done", std::to_string(epochs_done));
    c.set_meta("rng.state", std::to_string(rng.state));
    c.set_meta("rng.inc", std::to_string(rng.inc));
    checkpoint_pack(c, G.ps, &opt_g, "adam_g.t");
    checkpoint_pack(c, D.ps, &opt_d, "adam_d.t");
    c.save(path);
  }

  void restore(const Checkpoint& c) {
    checkpoint_unpack(c, G.ps, &opt_g, "adam_g.t");
    checkpoint_unpack(c, D.ps, &opt_d, "adam_d.t");
    epochs_done = (int)std::stoll(c.get_meta("epochs_done"));
    rng.state = std::stoull(c.get_meta("rng.state"));
    rng.inc = std::stoull(c.get_meta("rng.inc"));
  }

  /// Deterministic 90/10 split of the pair list (seeded by the trainer seed).
  void split_pairs(const Dataset& data, std::vector<PairIndex>& train,
                   std::vector<PairIndex>& val) const {
    split_pairs_seeded(data, seed, train, val);
  }

  struct EpochStats {
    double l1 = 0, loss_g = 0, loss_d = 0, val_l1 = 0, val_psnr = 0;
  };

  EpochStats run_epoch(const Dataset& data, const std::vector<PairIndex>& train_idx_base,
                       const std::vector<PairIndex>& val_idx) {
    const int B = cfg.batch;
    auto idx = train_idx_base;
    for (size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[(size_t)rng.uniform_int((int64_t)i)]);

    EpochStats st;
    int64_t nb = (int64_t)idx.size() / B;
    if (nb == 0) throw std::runtime_error("train-s2p: fewer pairs than one batch");
    bool adversarial = cfg.lambda3 > S(0);
    for (int64_t bi = 0; bi < nb; ++bi) {
      TensorT<S> states, prev_t, target_t;
      fill_pair_batch(data, idx, (size_t)(bi * B), (size_t)B, states, prev_t, target_t);
      auto prev = constant(prev_t);
      auto target = constant(target_t);

      G.power_iterate();
      auto fake = G.forward(states, prev);

      if (adversarial) {
        auto fake_detached = detach(fake);
        auto sr = D(states, target);
        auto sf = D(states, fake_detached);
        VarT<S> l_d;
        for (size_t k = 0; k < sr.size(); ++k) {
          auto term = loss_adv_d(sr[k], sf[k]);
          l_d = l_d ? add(l_d, term) : term;
        }
        D.ps.zero_grad();
        backward(l_d);
        opt_d.step(D.ps);
        st.loss_d += (double)l_d->val[0];
      }

      auto l1 = loss_l1(target, fake);
      VarT<S> l_per =
          cfg.lambda2 > S(0) ? loss_perceptual(phi, target, fake) : VarT<S>();
      VarT<S> adv;
      if (adversarial) {
        auto sf2 = D(states, fake);
        for (auto& s : sf2) {
          auto term = loss_adv_g(s);
          adv = adv ? add(adv, term) : term;
        }
      }
      VarT<S> l_g = loss_total(l1, l_per, adv, cfg.lambda1, cfg.lambda2, cfg.lambda3);
      G.ps.zero_grad();
      D.ps.zero_grad();  // G backward also reaches D params; discard those grads
      backward(l_g);
      opt_g.step(G.ps);
      st.l1 += (double)l1->val[0];
      st.loss_g += (double)l_g->val[0];
    }
    st.l1 /= (double)nb;
    st.loss_g /= (double)nb;
    st.loss_d /= (double)std::max<int64_t>(1, nb);

    // validation
    auto [vl1, vpsnr] = validate(data, val_idx);
    st.val_l1 = vl1;
    st.val_psnr = vpsnr;
    ++epochs_done;
    return st;
  }

  std::pair<double, double> validate(const Dataset& data, const std::vector<PairIndex>& val) {
    EvalGuardT<S> guard_g(G.ps);
    double l1 = 0, ps_acc = 0;
    int64_t n = 0;
    const int chunk = 16;
    int R = cfg.resolution;
    int64_t fsz = (int64_t)3 * R * R;
    for (size_t at = 0; at < val.size(); at += chunk) {
      size_t cnt = std::min((size_t)chunk, val.size() - at);
      TensorT<S> states, prev_t, target_t;
      fill_pair_batch(data, val, at, cnt, states, prev_t, target_t);
      auto fake = G.forward(states, constant(prev_t));
      for (size_t b = 0; b < cnt; ++b) {
        const S* fp = fake->val.ptr() + (int64_t)b * fsz;
        const S* tp = target_t.ptr() + (int64_t)b * fsz;
        double m = 0;
        for (int64_t i = 0; i < fsz; ++i) {
          double d = ((double)fp[i] - (double)tp[i]) * 0.5;
          m += d * d;
          l1 += std::abs((double)fp[i] - (double)tp[i]);
        }
        m /= (double)fsz;
        ps_acc += m <= 0 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
        ++n;
      }
    }
    if (n == 0) return {0, 0};
    return {l1 / ((double)n * fsz), ps_acc / (double)n};
  }
};

/// Full training entry: splits, loops epochs, writes log + checkpoints.
/// Returns the final validation (L1, PSNR).
template <typename S>
std::pair<double, double> train_s2p(S2pTrainerT<S>& tr, const Dataset& data,
                                    const std::string& out_dir,
                                    const std::function<void(int, double, double)>& progress = {}) {
  std::filesystem::create_directories(out_dir);
  std::vector<PairIndex> train_idx, val_idx;
  tr.split_pairs(data, train_idx, val_idx);

  CsvWriter log;
  std::string log_path = out_dir + "/train_log.csv";
  bool fresh = tr.epochs_done == 0;
  if (fresh) {
    log.open(log_path, {"epoch", "l1", "psnr", "loss_g", "loss_d", "val_l1"});
  } else {
    // resuming: re-open existing log and append
    log.f.open(log_path, std::ios::app);
    log.ncols = 6;
  }
  std::pair<double, double> last{0, 0};
  for (int ep = tr.epochs_done; ep < tr.cfg.epochs; ++ep) {
    auto st = tr.run_epoch(data, train_idx, val_idx);
    log.row({std::to_string(ep), fmt_g9(st.l1), fmt_g9(st.val_psnr), fmt_g9(st.loss_g),
             fmt_g9(st.loss_d), fmt_g9(st.val_l1)});
    char name[64];
    std::snprintf(name, sizeof name, "/ckpt_epoch_%03d.ckpt", ep);
    tr.save(out_dir + name);
    tr.save(out_dir + "/ckpt_latest.ckpt");
    last = {st.val_l1, st.val_psnr};
    if (progress) progress(ep, st.val_l1, st.val_psnr);
  }
  return last;
}

/// Rebuild a generator from a checkpoint written by S2pTrainerT::save.
template <typename S>
GeneratorT<S> load_generator(const Checkpoint& c) {
  Manifest m;
  for (auto& it : c.meta) m.set(it.first, it.second);
  auto cfg = GeneratorConfigT<S>::from_manifest(m, "gen.");
  int ns = (int)m.get_int("ns");
  GeneratorT<S> g(cfg, ns, (uint64_t)m.get_int("seed"));
  checkpoint_unpack(c, g.ps, (AdamT<S>*)nullptr, "adam_g.t");
  return g;
}

/// Recurrent generation: frames for states[0..T) starting from init_frame,
/// feeding each output back (through the u8 quantizer) as the next input.
template <typename S>
TensorT<S> generate_rollout(const GeneratorT<S>& gen, const TensorT<S>& states,
                            const TensorT<S>& init_frames) {
  auto& g = const_cast<GeneratorT<S>&>(gen);
  EvalGuardT<S> guard(g.ps);
  int B = states.dim(0), T = states.dim(1), ns = states.dim(2);
  int R = gen.cfg.resolution;
  int64_t fsz = (int64_t)3 * R * R;
  TensorT<S> out({B, T, 3, R, R});
  TensorT<S> cur = init_frames;  // [B,3,R,R]
  std::vector<uint8_t> q((size_t)R * R * 3);
  for (int t = 0; t < T; ++t) {
    TensorT<S> st({B, ns});
    for (int b = 0; b < B; ++b)
      for (int k = 0; k < ns; ++k)
        st[(int64_t)b * ns + k] = states[((int64_t)b * T + t) * ns + k];
    auto fake = g.forward(st, constant(cur));
    for (int b = 0; b < B; ++b) {
      // round-trip through the storage quantizer so the next input matches
      // the training distribution of u8-decoded frames
      chw_to_frame(fake->val.ptr() + (int64_t)b * fsz, R, q.data());
      frame_to_chw(q.data(), R, cur.ptr() + (int64_t)b * fsz);
      std::copy_n(cur.ptr() + (int64_t)b * fsz, fsz,
                  out.ptr() + ((int64_t)b * T + t) * fsz);
    }
  }
  return out;
}

}  // namespace s2p
