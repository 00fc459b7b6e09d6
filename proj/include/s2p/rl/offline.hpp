#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "s2p/core/adam.hpp"
#include "s2p/core/nn.hpp"
#include "s2p/data/sampler.hpp"
#include "s2p/io/checkpoint.hpp"
#include "s2p/io/csv.hpp"
#include "s2p/io/manifest.hpp"
#include "s2p/rl/policy.hpp"

namespace s2p {

enum class OfflineAlgo { Conservative, Implicit };

inline OfflineAlgo parse_offline_algo(const std::string& s) {
  if (s == "conservative") return OfflineAlgo::Conservative;
  if (s == "implicit") return OfflineAlgo::Implicit;
  throw std::invalid_argument("unknown offline algo: " + s +
                              " (expected conservative or implicit)");
}
inline const char* offline_algo_name(OfflineAlgo a) {
  return a == OfflineAlgo::Conservative ? "conservative" : "implicit";
}

enum class InputSpace { Latent, State };

inline InputSpace parse_input_space(const std::string& s) {
  if (s == "latent") return InputSpace::Latent;
  if (s == "state") return InputSpace::State;
  throw std::invalid_argument("unknown input space: " + s + " (expected latent or state)");
}
inline const char* input_space_name(InputSpace s) {
  return s == InputSpace::Latent ? "latent" : "state";
}

/// Offline agent hyper-parameters. `f` is the real-data fraction of every
/// gradient batch; the rest is drawn from the synthetic buffer.
template <typename S>
struct AgentConfigT {
  OfflineAlgo algo = OfflineAlgo::Conservative;
  InputSpace input_space = InputSpace::Latent;
  double critic_lr = 3e-4;
  double policy_lr = 1e-4;
  int hidden = 256;  // width of the two hidden layers in every net
  int batch = 128;
  double gamma = 0.99;
  double f = 0.5;
  double conservative_weight = 5.0;  // weight on the conservative penalty
  int penalty_uniform = 10;          // uniform actions in the penalty logsumexp
  int penalty_policy = 10;           // policy actions in the penalty logsumexp
  double expectile = 0.7;            // expectile for the value fit
  double adv_temperature = 3.0;      // advantage temperature in the actor weight
  double adv_clip = 100.0;           // cap on exp(beta * advantage)
  double polyak = 0.005;             // target-net update rate
  int steps = 30000;
  int eval_every = 1000;  // 0 disables periodic evaluation
  int eval_episodes = 10;
  int save_every = 5000;

  void validate() const {
    if (hidden < 1 || batch < 1 || steps < 0 || save_every < 1)
      throw std::invalid_argument("agent: hidden, batch, steps and save_every bounds");
    if (critic_lr <= 0 || policy_lr <= 0)
      throw std::invalid_argument("agent: learning rates must be positive");
    if (gamma < 0 || gamma > 1) throw std::invalid_argument("agent: gamma must be in [0,1]");
    if (f < 0 || f > 1) throw std::invalid_argument("agent: f must be in [0,1]");
    if (conservative_weight < 0)
      throw std::invalid_argument("agent: conservative_weight must be >= 0");
    if (penalty_uniform < 0 || penalty_policy < 0 || penalty_uniform + penalty_policy < 1)
      throw std::invalid_argument("agent: penalty sample counts");
    if (expectile <= 0 || expectile >= 1)
      throw std::invalid_argument("agent: expectile must be in (0,1)");
    if (adv_temperature < 0 || adv_clip <= 0)
      throw std::invalid_argument("agent: advantage temperature/clip bounds");
    if (polyak <= 0 || polyak > 1) throw std::invalid_argument("agent: polyak must be in (0,1]");
    if (eval_every < 0 || eval_episodes < 1)
      throw std::invalid_argument("agent: eval cadence bounds");
  }

  void to_manifest(Manifest& m, const std::string& p) const {
    m.set(p + "algo", offline_algo_name(algo));
    m.set(p + "input_space", input_space_name(input_space));
    m.set(p + "critic_lr", fmt_g17(critic_lr));
    m.set(p + "policy_lr", fmt_g17(policy_lr));
    m.set_int(p + "hidden", hidden);
    m.set_int(p + "batch", batch);
    m.set(p + "gamma", fmt_g17(gamma));
    m.set(p + "f", fmt_g17(f));
    m.set(p + "conservative_weight", fmt_g17(conservative_weight));
    m.set_int(p + "penalty_uniform", penalty_uniform);
    m.set_int(p + "penalty_policy", penalty_policy);
    m.set(p + "expectile", fmt_g17(expectile));
    m.set(p + "adv_temperature", fmt_g17(adv_temperature));
    m.set(p + "adv_clip", fmt_g17(adv_clip));
    m.set(p + "polyak", fmt_g17(polyak));
    m.set_int(p + "steps", steps);
    m.set_int(p + "eval_every", eval_every);
    m.set_int(p + "eval_episodes", eval_episodes);
    m.set_int(p + "save_every", save_every);
  }
  static AgentConfigT from_manifest(const Manifest& m, const std::string& p) {
    AgentConfigT c;
    c.algo = parse_offline_algo(m.get_or(p + "algo", offline_algo_name(c.algo)));
    c.input_space =
        parse_input_space(m.get_or(p + "input_space", input_space_name(c.input_space)));
    c.critic_lr = m.has(p + "critic_lr") ? m.get_double(p + "critic_lr") : c.critic_lr;
    c.policy_lr = m.has(p + "policy_lr") ? m.get_double(p + "policy_lr") : c.policy_lr;
    c.hidden = m.has(p + "hidden") ? (int)m.get_int(p + "hidden") : c.hidden;
    c.batch = m.has(p + "batch") ? (int)m.get_int(p + "batch") : c.batch;
    c.gamma = m.has(p + "gamma") ? m.get_double(p + "gamma") : c.gamma;
    c.f = m.has(p + "f") ? m.get_double(p + "f") : c.f;
    c.conservative_weight = m.has(p + "conservative_weight")
                                ? m.get_double(p + "conservative_weight")
                                : c.conservative_weight;
    c.penalty_uniform = m.has(p + "penalty_uniform") ? (int)m.get_int(p + "penalty_uniform") : c.penalty_uniform;
    c.penalty_policy = m.has(p + "penalty_policy") ? (int)m.get_int(p + "penalty_policy") : c.penalty_policy;
    c.expectile = m.has(p + "expectile") ? m.get_double(p + "expectile") : c.expectile;
    c.adv_temperature =
        m.has(p + "adv_temperature") ? m.get_double(p + "adv_temperature") : c.adv_temperature;
    c.adv_clip = m.has(p + "adv_clip") ? m.get_double(p + "adv_clip") : c.adv_clip;
    c.polyak = m.has(p + "polyak") ? m.get_double(p + "polyak") : c.polyak;
    c.steps = m.has(p + "steps") ? (int)m.get_int(p + "steps") : c.steps;
    c.eval_every = m.has(p + "eval_every") ? (int)m.get_int(p + "eval_every") : c.eval_every;
    c.eval_episodes = m.has(p + "eval_episodes") ? (int)m.get_int(p + "eval_episodes") : c.eval_episodes;
    c.save_every = m.has(p + "save_every") ? (int)m.get_int(p + "save_every") : c.save_every;
    c.validate();
    return c;
  }
};

/// One assembled gradient batch. Real rows come first, synthetic rows after.
template <typename S>
struct RlBatchT {
  TensorT<S> s, a, s2;  // [B,ns], [B,na], [B,ns]
  TensorT<S> r, done;   // [B]
  int n_real = 0;       // rows [0, n_real) are from the real buffer
};

template <typename S>
RlBatchT<S> assemble_batch(const Transitions& real, const Transitions& model,
                           const HybridDraw& draw) {
  const Transitions& any = draw.real_rows.empty() ? model : real;
  int ns = any.ns, na = any.na;
  int B = (int)(draw.real_rows.size() + draw.model_rows.size());
  RlBatchT<S> b;
  b.s = TensorT<S>({B, ns});
  b.a = TensorT<S>({B, na});
  b.s2 = TensorT<S>({B, ns});
  b.r = TensorT<S>({B});
  b.done = TensorT<S>({B});
  b.n_real = (int)draw.real_rows.size();
  int row = 0;
  auto put = [&](const Transitions& src, int64_t i) {
    for (int k = 0; k < ns; ++k) {
      b.s[(int64_t)row * ns + k] = (S)src.s[i * ns + k];
      b.s2[(int64_t)row * ns + k] = (S)src.s2[i * ns + k];
    }
    for (int k = 0; k < na; ++k) b.a[(int64_t)row * na + k] = (S)src.a[i * na + k];
    b.r[row] = (S)src.r[i];
    b.done[row] = (S)src.done[i];
    ++row;
  };
  for (int64_t i : draw.real_rows) put(real, i);
  for (int64_t i : draw.model_rows) put(model, i);
  return b;
}

/// mean over rows of (logsumexp_j q_samples[b,j] - q_data[b]); scalar [1].
/// Non-negative whenever each row's data action appears among the samples.
template <typename S>
VarT<S> cql_penalty(const VarT<S>& q_samples, const VarT<S>& q_data) {
  return mean_all(sub(logsumexp_rows(q_samples), q_data));
}

/// Expectile regression loss per element: |tau - 1{u<0}| * u^2.
/// tau = 0.5 halves the plain squared loss.
template <typename S>
VarT<S> expectile_loss(const VarT<S>& u, double tau) {
  return detail::unary(
      u,
      [tau](S x) {
        S w = x >= S(0) ? (S)tau : (S)(1.0 - tau);
        return w * x * x;
      },
      [tau](S x, S) {
        S w = x >= S(0) ? (S)tau : (S)(1.0 - tau);
        return S(2) * w * x;
      });
}

/// Actor weights min(exp(beta * adv), clip), computed outside the graph.
template <typename S>
TensorT<S> awr_weights(const TensorT<S>& adv, double beta, double clip) {
  TensorT<S> w(adv.shape);
  for (int64_t i = 0; i < adv.numel(); ++i)
    w[i] = (S)std::min(std::exp(beta * (double)adv[i]), clip);
  return w;
}

/// Per-step loss values; fields unused by the active algo stay zero.
struct RlStepStats {
  double critic_loss = 0, actor_loss = 0, value_loss = 0, penalty = 0;
  double q_mean = 0;      // mean Q(s, a_data) under the first critic
  double alpha_ent = 0;   // entropy temperature (conservative algo)
};

/// Optional capture of one step's internals, for oracle checks.
template <typename S>
struct StepDiagT {
  RlBatchT<S> batch;
  TensorT<S> td_target;                // [B] regression target for both critics
  TensorT<S> next_action, next_logp;   // conservative: draws at s' ([B,na],[B])
  std::vector<TensorT<S>> cand;        // conservative: penalty actions, each [B,na]
  TensorT<S> q1_samples, q2_samples;   // [B,K] critic values on cand
  TensorT<S> actor_weights;            // implicit: [B]
  double td_loss = 0, penalty1 = 0, penalty2 = 0;
};

/// Offline actor-critic trainer over flat transition buffers. Holds twin
/// critics with Polyak-averaged targets, a squashed-Gaussian actor, a value
/// net (implicit algo) and an entropy temperature (conservative algo).
template <typename S>
struct OfflineTrainerT {
  AgentConfigT<S> cfg;
  int ns = 0, na = 0;

  ParamStoreT<S> ps_q, ps_qt, ps_pi, ps_v, ps_ent;
  MlpT<S> q1, q2, q1t, q2t, v;
  SquashedGaussianPolicyT<S> pi;
  VarT<S> log_alpha;
  double target_entropy = 0;

  AdamT<S> opt_q, opt_pi, opt_v, opt_ent;
  Rng rng;
  uint64_t seed = 0;
  int64_t steps_done = 0;

  OfflineTrainerT(const AgentConfigT<S>& c, int ns_, int na_, uint64_t seed_)
      : cfg(c),
        ns(ns_),
        na(na_),
        opt_q((S)c.critic_lr, (S)0.9, (S)0.999),
        opt_pi((S)c.policy_lr, (S)0.9, (S)0.999),
        opt_v((S)c.critic_lr, (S)0.9, (S)0.999),
        opt_ent((S)c.policy_lr, (S)0.9, (S)0.999),
        rng(seed_, 0x0ff2),
        seed(seed_) {
    cfg.validate();
    if (ns_ < 1 || na_ < 1) throw std::invalid_argument("agent: ns and na must be positive");
    Rng ir(seed, 0x0ff1);
    std::vector<int> hid{cfg.hidden, cfg.hidden};
    q1 = MlpT<S>(ps_q, "q1", ns + na, hid, 1, ir);
    q2 = MlpT<S>(ps_q, "q2", ns + na, hid, 1, ir);
    q1t = MlpT<S>(ps_qt, "q1t", ns + na, hid, 1, ir);
    q2t = MlpT<S>(ps_qt, "q2t", ns + na, hid, 1, ir);
    pi = SquashedGaussianPolicyT<S>(ps_pi, "pi", ns, na, cfg.hidden, ir);
    v = MlpT<S>(ps_v, "v", ns, hid, 1, ir);
    log_alpha = ps_ent.add("ent.log_alpha", TensorT<S>({1}));
    target_entropy = -(double)na;
    sync_targets();
    opt_q.ensure(ps_q);
    opt_pi.ensure(ps_pi);
    opt_v.ensure(ps_v);
    opt_ent.ensure(ps_ent);
  }

  void sync_targets() {
    for (size_t i = 0; i < ps_q.params.size(); ++i)
      ps_qt.params[i].var->val = ps_q.params[i].var->val;
  }
  void polyak_update() {
    S t = (S)cfg.polyak;
    for (size_t i = 0; i < ps_q.params.size(); ++i) {
      auto& src = ps_q.params[i].var->val;
      auto& dst = ps_qt.params[i].var->val;
      for (int64_t j = 0; j < src.numel(); ++j) dst[j] = (S(1) - t) * dst[j] + t * src[j];
    }
  }

  double alpha_ent_value() const { return std::exp((double)log_alpha->val[0]); }

  VarT<S> q_fwd(const MlpT<S>& q, const VarT<S>& s, const VarT<S>& a) const {
    auto out = q(concat_cols<S>({s, a}));
    return reshape(out, {out->val.dim(0)});
  }
  VarT<S> v_fwd(const VarT<S>& s) const {
    auto out = v(s);
    return reshape(out, {out->val.dim(0)});
  }

  // ---- conservative (CQL-style) losses ----

  /// TD loss to a Bellman target with entropy bonus, plus the conservative
  /// logsumexp penalty on both critics. Draw order from `r`: target action
  /// noise, then penalty uniform actions, then penalty policy-action noise.
  VarT<S> conservative_critic_loss(const RlBatchT<S>& b, Rng& r,
                                   StepDiagT<S>* diag = nullptr) {
    int B = b.r.dim(0);
    double a_ent = alpha_ent_value();
    TensorT<S> y({B});
    {
      EvalGuardT<S> gp(ps_pi), gt(ps_qt);
      auto s2c = constant(b.s2);
      auto draw = pi.sample(s2c, r);
      auto tq1 = q_fwd(q1t, s2c, draw.action);
      auto tq2 = q_fwd(q2t, s2c, draw.action);
      for (int i = 0; i < B; ++i) {
        double qmin = std::min((double)tq1->val[i], (double)tq2->val[i]);
        y[i] = (S)((double)b.r[i] +
                   cfg.gamma * (1.0 - (double)b.done[i]) *
                       (qmin - a_ent * (double)draw.log_prob->val[i]));
      }
      if (diag) {
        diag->next_action = draw.action->val;
        diag->next_logp = draw.log_prob->val;
      }
    }
    auto sc = constant(b.s);
    auto yc = constant(y);
    auto q1d = q_fwd(q1, sc, constant(b.a));
    auto q2d = q_fwd(q2, sc, constant(b.a));
    auto td = add(mean_all(square(sub(q1d, yc))), mean_all(square(sub(q2d, yc))));
    if (diag) {
      diag->td_target = y;
      diag->td_loss = (double)td->val[0];
    }
    if (cfg.conservative_weight == 0) return td;

    std::vector<TensorT<S>> cand;
    for (int k = 0; k < cfg.penalty_uniform; ++k) {
      TensorT<S> u({B, na});
      for (int64_t i = 0; i < u.numel(); ++i) u[i] = (S)r.uniform(-1.0, 1.0);
      cand.push_back(std::move(u));
    }
    {
      EvalGuardT<S> gp(ps_pi);
      auto sc2 = constant(b.s);
      for (int k = 0; k < cfg.penalty_policy; ++k)
        cand.push_back(pi.sample(sc2, r).action->val);
    }
    auto stack_q = [&](const MlpT<S>& q) {
      std::vector<VarT<S>> cols;
      for (auto& c : cand)
        cols.push_back(reshape(q_fwd(q, sc, constant(c)), {B, 1, 1, 1}));
      return reshape(concat_c(cols), {B, (int)cand.size()});
    };
    auto q1s = stack_q(q1);
    auto q2s = stack_q(q2);
    auto pen1 = cql_penalty(q1s, q1d);
    auto pen2 = cql_penalty(q2s, q2d);
    if (diag) {
      diag->cand = cand;
      diag->q1_samples = q1s->val;
      diag->q2_samples = q2s->val;
      diag->penalty1 = (double)pen1->val[0];
      diag->penalty2 = (double)pen2->val[0];
    }
    return add(td, mul_c(add(pen1, pen2), (S)cfg.conservative_weight));
  }

  /// Actor: mean(alpha * log pi(a~|s) - min Q(s, a~)), reparameterized.
  VarT<S> conservative_actor_loss(const RlBatchT<S>& b, Rng& r,
                                  double* mean_logp_out = nullptr) {
    auto sc = constant(b.s);
    auto draw = pi.sample(sc, r);
    auto qmin = min_v(q_fwd(q1, sc, draw.action), q_fwd(q2, sc, draw.action));
    if (mean_logp_out) {
      double m = 0;
      for (int i = 0; i < b.r.dim(0); ++i) m += (double)draw.log_prob->val[i];
      *mean_logp_out = m / b.r.dim(0);
    }
    return mean_all(sub(mul_c(draw.log_prob, (S)alpha_ent_value()), qmin));
  }

  /// Temperature: - log_alpha * mean(log pi + target_entropy), with the mean
  /// taken over the actor's fresh draws (passed in as a plain number).
  VarT<S> temperature_loss(double mean_logp) {
    return mul_c(log_alpha, (S)(-(mean_logp + target_entropy)));
  }

  // ---- implicit (IQL-style) losses ----

  /// Value net fits the tau-expectile of min target-critic values at data
  /// actions: mean expectile_loss(Q_t(s,a) - V(s)).
  VarT<S> implicit_value_loss(const RlBatchT<S>& b) {
    int B = b.r.dim(0);
    TensorT<S> qd({B});
    {
      EvalGuardT<S> gt(ps_qt);
      auto sc = constant(b.s);
      auto ac = constant(b.a);
      auto t1 = q_fwd(q1t, sc, ac);
      auto t2 = q_fwd(q2t, sc, ac);
      for (int i = 0; i < B; ++i)
        qd[i] = (S)std::min((double)t1->val[i], (double)t2->val[i]);
    }
    auto u = sub(constant(qd), v_fwd(constant(b.s)));
    return mean_all(expectile_loss(u, cfg.expectile));
  }

  /// Critics regress on r + gamma * (1-done) * V(s').
  VarT<S> implicit_critic_loss(const RlBatchT<S>& b, StepDiagT<S>* diag = nullptr) {
    int B = b.r.dim(0);
    TensorT<S> y({B});
    {
      EvalGuardT<S> gv(ps_v);
      auto vs2 = v_fwd(constant(b.s2));
      for (int i = 0; i < B; ++i)
        y[i] = (S)((double)b.r[i] +
                   cfg.gamma * (1.0 - (double)b.done[i]) * (double)vs2->val[i]);
    }
    auto sc = constant(b.s);
    auto ac = constant(b.a);
    auto yc = constant(y);
    auto q1d = q_fwd(q1, sc, ac);
    auto q2d = q_fwd(q2, sc, ac);
    auto td = add(mean_all(square(sub(q1d, yc))), mean_all(square(sub(q2d, yc))));
    if (diag) {
      diag->td_target = y;
      diag->td_loss = (double)td->val[0];
    }
    return td;
  }

  /// Advantage-weighted log-likelihood on data actions:
  /// -mean( min(exp(beta*(Q_t - V)), clip) * log pi(a|s) ).
  VarT<S> implicit_actor_loss(const RlBatchT<S>& b, StepDiagT<S>* diag = nullptr) {
    int B = b.r.dim(0);
    TensorT<S> adv({B});
    {
      EvalGuardT<S> gt(ps_qt), gv(ps_v);
      auto sc = constant(b.s);
      auto ac = constant(b.a);
      auto t1 = q_fwd(q1t, sc, ac);
      auto t2 = q_fwd(q2t, sc, ac);
      auto vs = v_fwd(sc);
      for (int i = 0; i < B; ++i)
        adv[i] = (S)(std::min((double)t1->val[i], (double)t2->val[i]) - (double)vs->val[i]);
    }
    auto w = awr_weights(adv, cfg.adv_temperature, cfg.adv_clip);
    if (diag) diag->actor_weights = w;
    auto lp = pi.log_prob(constant(b.s), b.a);
    return neg(mean_all(mul(constant(w), lp)));
  }

  // ---- one gradient step ----

  RlStepStats train_step(const Transitions& real, const Transitions& model,
                         StepDiagT<S>* diag = nullptr) {
    auto draw = draw_hybrid(cfg.batch, cfg.f, real.size(), model.size(), rng);
    auto b = assemble_batch<S>(real, model, draw);
    StepDiagT<S> local;
    StepDiagT<S>* d = diag ? diag : &local;
    d->batch = b;
    RlStepStats st;

    if (cfg.algo == OfflineAlgo::Conservative) {
      ps_q.zero_grad();
      auto closs = conservative_critic_loss(b, rng, d);
      st.critic_loss = (double)closs->val[0];
      st.penalty = d->penalty1 + d->penalty2;
      backward(closs);
      opt_q.step(ps_q);

      ps_pi.zero_grad();
      double mean_logp = 0;
      auto aloss = conservative_actor_loss(b, rng, &mean_logp);
      st.actor_loss = (double)aloss->val[0];
      backward(aloss);
      opt_pi.step(ps_pi);

      ps_ent.zero_grad();
      auto eloss = temperature_loss(mean_logp);
      backward(eloss);
      opt_ent.step(ps_ent);
      st.alpha_ent = alpha_ent_value();
    } else {
      ps_v.zero_grad();
      auto vloss = implicit_value_loss(b);
      st.value_loss = (double)vloss->val[0];
      backward(vloss);
      opt_v.step(ps_v);

      ps_q.zero_grad();
      auto closs = implicit_critic_loss(b, d);
      st.critic_loss = (double)closs->val[0];
      backward(closs);
      opt_q.step(ps_q);

      ps_pi.zero_grad();
      auto aloss = implicit_actor_loss(b, d);
      st.actor_loss = (double)aloss->val[0];
      backward(aloss);
      opt_pi.step(ps_pi);
    }
    polyak_update();

    {
      EvalGuardT<S> gq(ps_q);
      auto qd = q_fwd(q1, constant(b.s), constant(b.a));
      double m = 0;
      for (int i = 0; i < b.r.dim(0); ++i) m += (double)qd->val[i];
      st.q_mean = m / b.r.dim(0);
    }
    ++steps_done;
    return st;
  }

  // ---- acting ----

  /// Deterministic action: tanh of the policy mean, clamped strictly inside
  /// (-1,1). `s` is one state row [ns]; writes na values.
  void act_mean(const float* s, float* a_out) const {
    EvalGuardT<S> g(const_cast<ParamStoreT<S>&>(ps_pi));
    TensorT<S> st({1, ns});
    for (int i = 0; i < ns; ++i) st[i] = (S)s[i];
    auto [mu, ls] = pi.dist_params(constant(st));
    (void)ls;
    for (int i = 0; i < na; ++i)
      a_out[i] = (float)squash_env_action((S)std::tanh((double)mu->val[i]));
  }

  /// Stochastic action drawn from the policy, clamped strictly inside (-1,1).
  void act_sample(const float* s, float* a_out, Rng& r) const {
    EvalGuardT<S> g(const_cast<ParamStoreT<S>&>(ps_pi));
    TensorT<S> st({1, ns});
    for (int i = 0; i < ns; ++i) st[i] = (S)s[i];
    auto draw = pi.sample(constant(st), r);
    for (int i = 0; i < na; ++i) a_out[i] = (float)squash_env_action(draw.action->val[i]);
  }

  // ---- persistence ----

  void save(const std::string& path) const {
    Checkpoint c;
    Manifest m;
    cfg.to_manifest(m, "agent.");
    for (auto& it : m.items) c.set_meta(it.first, it.second);
    c.set_meta("kind", "offline_agent");
    c.set_meta("ns", std::to_string(ns));
    c.set_meta("na", std::to_string(na));
    c.set_meta("seed", std::to_string(seed));
    c.set_meta("steps_done", std::to_string(steps_done));
    c.set_meta("rng.state", std::to_string(rng.state));
    c.set_meta("rng.inc", std::to_string(rng.inc));
    checkpoint_pack(c, ps_q, &opt_q, "adam_q.t");
    checkpoint_pack(c, ps_qt);
    checkpoint_pack(c, ps_pi, &opt_pi, "adam_pi.t");
    checkpoint_pack(c, ps_v, &opt_v, "adam_v.t");
    checkpoint_pack(c, ps_ent, &opt_ent, "adam_ent.t");
    c.save(path);
  }
  void restore(const Checkpoint& c) {
    checkpoint_unpack(c, ps_q, &opt_q, "adam_q.t");
    checkpoint_unpack(c, ps_qt);
    checkpoint_unpack(c, ps_pi, &opt_pi, "adam_pi.t");
    checkpoint_unpack(c, ps_v, &opt_v, "adam_v.t");
    checkpoint_unpack(c, ps_ent, &opt_ent, "adam_ent.t");
    steps_done = (int64_t)std::stoll(c.get_meta("steps_done"));
    rng.state = std::stoull(c.get_meta("rng.state"));
    rng.inc = std::stoull(c.get_meta("rng.inc"));
  }
  static OfflineTrainerT load_agent(const Checkpoint& c) {
    Manifest m;
    for (auto& it : c.meta) m.set(it.first, it.second);
    auto cfg = AgentConfigT<S>::from_manifest(m, "agent.");
    OfflineTrainerT tr(cfg, (int)m.get_int("ns"), (int)m.get_int("na"),
                       (uint64_t)m.get_int("seed"));
    tr.restore(c);
    return tr;
  }
};

/// Periodic-evaluation hook: returns (mean return, normalized score).
template <typename S>
using EvalFnT = std::function<std::pair<double, double>(OfflineTrainerT<S>&)>;

struct OfflineTrainSummary {
  RlStepStats last;
  double last_eval_return = 0, last_eval_score = 0;
  bool evaluated = false;
};

/// Run (or resume) offline training; writes train_log.csv, eval_log.csv and
/// checkpoints under out_dir.
template <typename S>
OfflineTrainSummary train_offline(OfflineTrainerT<S>& tr, const Transitions& real,
                                  const Transitions& model, const std::string& out_dir,
                                  const EvalFnT<S>& eval_fn = {},
                                  const std::function<void(int64_t, const RlStepStats&)>&
                                      progress = {}) {
  const auto& cfg = tr.cfg;
  int nr = real_batch_count(cfg.batch, cfg.f);
  if (nr > 0 && real.size() == 0)
    throw std::invalid_argument("offline training: no real transitions");
  if (cfg.batch - nr > 0 && model.size() == 0)
    throw std::invalid_argument(
        "offline training: f < 1 needs synthetic transitions but none were given");
  if (real.size() > 0 && (real.ns != tr.ns || real.na != tr.na))
    throw std::invalid_argument("offline training: real buffer dims mismatch");
  if (model.size() > 0 && (model.ns != tr.ns || model.na != tr.na))
    throw std::invalid_argument("offline training: synthetic buffer dims mismatch");

  std::filesystem::create_directories(out_dir);
  std::string log_path = out_dir + "/train_log.csv";
  std::string eval_path = out_dir + "/eval_log.csv";
  CsvWriter log, elog;
  if (tr.steps_done > 0 && std::filesystem::exists(log_path)) {
    log.f.open(log_path, std::ios::app);
    log.ncols = 7;
  } else {
    log.open(log_path,
             {"step", "critic_loss", "actor_loss", "value_loss", "penalty", "q_mean",
              "alpha_ent"});
  }
  if (tr.steps_done > 0 && std::filesystem::exists(eval_path)) {
    elog.f.open(eval_path, std::ios::app);
    elog.ncols = 3;
  } else {
    elog.open(eval_path, {"step", "mean_return", "normalized_score"});
  }

  OfflineTrainSummary out;
  for (int64_t step = tr.steps_done; step < cfg.steps; ++step) {
    auto st = tr.train_step(real, model);
    out.last = st;
    log.row({std::to_string(step + 1), fmt_g9(st.critic_loss), fmt_g9(st.actor_loss),
             fmt_g9(st.value_loss), fmt_g9(st.penalty), fmt_g9(st.q_mean),
             fmt_g9(st.alpha_ent)});
    bool last_step = step + 1 == cfg.steps;
    if (eval_fn && cfg.eval_every > 0 &&
        ((step + 1) % cfg.eval_every == 0 || last_step)) {
      auto [ret, score] = eval_fn(tr);
      out.last_eval_return = ret;
      out.last_eval_score = score;
      out.evaluated = true;
      elog.row({std::to_string(step + 1), fmt_g9(ret), fmt_g9(score)});
      elog.f.flush();
    }
    if ((step + 1) % cfg.save_every == 0 || last_step)
      tr.save(out_dir + "/ckpt_latest.ckpt");
    if (progress) progress(step + 1, st);
  }
  if (cfg.steps == 0) tr.save(out_dir + "/ckpt_latest.ckpt");
  return out;
}

}  // namespace s2p
