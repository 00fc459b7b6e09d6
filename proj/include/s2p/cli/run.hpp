#pragma once

// Pipeline orchestration: every CLI subcommand is a plain function here, so
// tests and the acceptance harness can call them in-process. Each run
// validates its inputs, does the work, and leaves a run_manifest.txt in the
// output directory that echoes the fully resolved configuration plus content
// hashes of the inputs — enough to reproduce the run from the manifest alone.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "s2p/cli/plot.hpp"
#include "s2p/data/collect.hpp"
#include "s2p/data/relabel.hpp"
#include "s2p/data/sampler.hpp"
#include "s2p/dyn/ensemble.hpp"
#include "s2p/gen/s2p_train.hpp"
#include "s2p/io/sha1.hpp"
#include "s2p/metrics/metrics.hpp"
#include "s2p/repr/slac.hpp"
#include "s2p/rl/eval.hpp"
#include "s2p/rl/offline.hpp"
#include "s2p/rollout/rollout.hpp"

namespace s2p {

namespace fs = std::filesystem;

/// Failure with a reporting category: "usage" (bad invocation), "config"
/// (invalid or inconsistent settings), "io" (missing/unreadable files),
/// "data" (inputs that parse but do not fit together).
struct CliError : std::runtime_error {
  std::string category;
  CliError(std::string cat, const std::string& msg)
      : std::runtime_error(msg), category(std::move(cat)) {}
};

// ---------------------------------------------------------------------------
// config files: flat key=value with section prefixes (env., gen., dyn.,
// repr., agent.). A subcommand consumes only its own sections; unknown keys
// *within* a consumed section are an error so typos do not silently fall
// back to defaults.
// ---------------------------------------------------------------------------

inline Manifest load_config_file(const std::string& path) {
  if (path.empty()) return Manifest{};
  if (!fs::exists(path)) throw CliError("io", "config file not found: " + path);
  try {
    return Manifest::load(path);
  } catch (const std::exception& e) {
    throw CliError("config", std::string("cannot parse config: ") + e.what());
  }
}

/// Copy every `prefix`-keyed entry of `file` over `base` (which holds the
/// defaults for that section and therefore defines the legal key set).
inline void overlay_section(Manifest& base, const Manifest& file, const std::string& prefix) {
  for (const auto& it : file.items) {
    if (it.first.rfind(prefix, 0) != 0) continue;
    if (!base.has(it.first))
      throw CliError("config", "unknown config key '" + it.first + "'");
    base.set(it.first, it.second);
  }
}

// ---- environment section ----

inline void env_to_manifest(const ScrollCartConfig& c, Manifest& m) {
  m.set_int("env.resolution", c.resolution);
  m.set_int("env.episode_len", c.episode_len);
  m.set("env.v_max", fmt_g17(c.v_max));
  m.set("env.drive", fmt_g17(c.drive));
  m.set("env.friction", fmt_g17(c.friction));
  m.set("env.wheel_radius", fmt_g17(c.wheel_radius));
}

inline ScrollCartConfig env_from_manifest(const Manifest& m) {
  ScrollCartConfig c;
  c.resolution = (int)m.get_int("env.resolution");
  c.episode_len = (int)m.get_int("env.episode_len");
  c.v_max = m.get_double("env.v_max");
  c.drive = m.get_double("env.drive");
  c.friction = m.get_double("env.friction");
  c.wheel_radius = m.get_double("env.wheel_radius");
  if (c.resolution < 8) throw CliError("config", "env.resolution must be >= 8");
  if (c.episode_len < 1) throw CliError("config", "env.episode_len must be >= 1");
  return c;
}

/// Environment parameters as recorded in a dataset manifest by `collect`.
inline ScrollCartConfig env_from_dataset_meta(const Manifest& meta) {
  ScrollCartConfig c;
  c.resolution = (int)meta.get_int("resolution");
  c.episode_len = (int)meta.get_int("episode_len");
  c.v_max = std::stod(meta.get_or("env.v_max", fmt_g17(c.v_max)));
  c.drive = std::stod(meta.get_or("env.drive", fmt_g17(c.drive)));
  c.friction = std::stod(meta.get_or("env.friction", fmt_g17(c.friction)));
  c.wheel_radius = std::stod(meta.get_or("env.wheel_radius", fmt_g17(c.wheel_radius)));
  return c;
}

// ---------------------------------------------------------------------------
// content hashes (git-style: files as blobs, directories as sorted trees)
// ---------------------------------------------------------------------------

inline std::string hash_file_blob(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CliError("io", "cannot read input file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  std::string body = ss.str();
  Sha1 h;
  std::string hdr = "blob " + std::to_string(body.size());
  h.update(hdr.data(), hdr.size() + 1);  // include the trailing NUL
  h.update(body.data(), body.size());
  return h.hex();
}

inline std::string hash_tree(const std::string& dir) {
  if (!fs::is_directory(dir)) throw CliError("io", "not a directory: " + dir);
  std::vector<std::string> rels;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file())
      rels.push_back(fs::relative(e.path(), dir).generic_string());
  std::sort(rels.begin(), rels.end());
  std::string listing;
  for (const auto& r : rels) listing += hash_file_blob(dir + "/" + r) + " " + r + "\n";
  return sha1_hex(listing);
}

/// File or directory, whichever the path is.
inline std::string hash_input(const std::string& path) {
  if (fs::is_directory(path)) return hash_tree(path);
  return hash_file_blob(path);
}

// ---------------------------------------------------------------------------
// run manifests
// ---------------------------------------------------------------------------

inline void stamp_run(Manifest& m, const std::string& command, uint64_t seed) {
  m.set("command", command);
  m.set_int("seed", (long long)seed);
}

inline void add_input(Manifest& m, const std::string& name, const std::string& path) {
  if (path.empty()) return;
  m.set("input." + name, path);
  m.set("input." + name + ".sha1", hash_input(path));
}

inline void write_run_manifest(const Manifest& m, const std::string& out_dir) {
  fs::create_directories(out_dir);
  m.save(out_dir + "/run_manifest.txt");
}

// ---------------------------------------------------------------------------
// checked loaders
// ---------------------------------------------------------------------------

inline Dataset load_dataset_checked(const std::string& dir) {
  if (!fs::is_directory(dir)) throw CliError("io", "dataset directory not found: " + dir);
  if (!fs::exists(dir + "/manifest.txt"))
    throw CliError("io", "no dataset manifest in " + dir);
  try {
    return Dataset::load(dir);
  } catch (const std::exception& e) {
    throw CliError("data", "cannot load dataset " + dir + ": " + e.what());
  }
}

inline Checkpoint load_checkpoint_checked(const std::string& path) {
  if (!fs::exists(path)) throw CliError("io", "checkpoint not found: " + path);
  try {
    return Checkpoint::load(path);
  } catch (const std::exception& e) {
    throw CliError("data", "cannot load checkpoint " + path + ": " + e.what());
  }
}

// ===========================================================================
// collect
// ===========================================================================

struct CollectOpts {
  std::string kind = "random";  // random | mixed | expert
  int64_t size = 0;
  std::string out;
  uint64_t seed = 0;
  std::string config;  // optional, env.* section
  bool quiet = false;
};

struct CollectResult {
  int64_t transitions = 0;
};

inline CollectResult run_collect(const CollectOpts& o) {
  if (o.size < 1) throw CliError("usage", "--size must be >= 1");
  if (o.out.empty()) throw CliError("usage", "--out is required");
  PolicyKind pk;
  try {
    pk = parse_policy(o.kind);
  } catch (const std::exception& e) {
    throw CliError("usage", e.what());
  }
  Manifest file = load_config_file(o.config);
  Manifest envm;
  env_to_manifest(ScrollCartConfig{}, envm);
  overlay_section(envm, file, "env.");
  ScrollCartConfig env = env_from_manifest(envm);

  collect_dataset(env, pk, o.size, o.seed, o.out);

  Manifest rm;
  stamp_run(rm, "collect", o.seed);
  rm.set("arg.kind", o.kind);
  rm.set_int("arg.size", (long long)o.size);
  env_to_manifest(env, rm);
  long long n = Manifest::load(o.out + "/manifest.txt").get_int("transitions");
  rm.set_int("result.transitions", n);
  write_run_manifest(rm, o.out);
  if (!o.quiet)
    std::printf("[collect] kind=%s transitions=%lld out=%s\n", o.kind.c_str(), n,
                o.out.c_str());
  return {n};
}

// ===========================================================================
// train-s2p
// ===========================================================================

struct TrainS2pOpts {
  std::string data, config, out;
  uint64_t seed = 0;
  int epochs = -1;  // override gen.epochs when >= 0
  bool resume = false;
  bool quiet = false;
};

struct TrainS2pResult {
  double val_l1 = 0, val_psnr = 0;
  std::string checkpoint;
};

inline TrainS2pResult run_train_s2p(const TrainS2pOpts& o) {
  if (o.data.empty() || o.out.empty()) throw CliError("usage", "--data and --out are required");
  Dataset d = load_dataset_checked(o.data);
  Manifest file = load_config_file(o.config);

  GeneratorConfigT<float> def;
  def.resolution = d.resolution();  // default follows the data
  Manifest merged;
  def.to_manifest(merged, "gen.");
  overlay_section(merged, file, "gen.");
  auto cfg = GeneratorConfigT<float>::from_manifest(merged, "gen.");
  if (o.epochs >= 0) cfg.epochs = o.epochs;
  if (cfg.resolution != d.resolution())
    throw CliError("config", "gen.resolution does not match the dataset resolution");
  if (d.n_transitions() < cfg.batch)
    throw CliError("data", "dataset smaller than one training batch");

  Manifest rm;
  stamp_run(rm, "train-s2p", o.seed);
  rm.set("arg.data", o.data);
  cfg.to_manifest(rm, "gen.");
  add_input(rm, "data", o.data);
  write_run_manifest(rm, o.out);

  S2pTrainerT<float> tr(cfg, d.ns(), o.seed);
  std::string latest = o.out + "/ckpt_latest.ckpt";
  if (o.resume && fs::exists(latest)) tr.restore(Checkpoint::load(latest));

  auto progress = [&](int ep, double l1, double psnr) {
    if (!o.quiet)
      std::printf("[train-s2p] epoch %d/%d val_l1 %.4f val_psnr %.2f\n", ep + 1, cfg.epochs,
                  l1, psnr);
  };
  auto [l1, psnr] = train_s2p(tr, d, o.out, progress);
  if (tr.epochs_done == 0) tr.save(latest);  // zero-epoch run still leaves a checkpoint

  rm.set("result.val_l1", fmt_g17(l1));
  rm.set("result.val_psnr", fmt_g17(psnr));
  write_run_manifest(rm, o.out);
  if (!o.quiet) std::printf("[train-s2p] done val_psnr %.2f -> %s\n", psnr, latest.c_str());
  return {l1, psnr, latest};
}

// ===========================================================================
// train-dynamics
// ===========================================================================

struct TrainDynOpts {
  std::string data, config, out;
  uint64_t seed = 0;
  bool quiet = false;
};

struct TrainDynResult {
  double val_nll = 0;
  std::string checkpoint;
};

inline TrainDynResult run_train_dynamics(const TrainDynOpts& o) {
  if (o.data.empty() || o.out.empty()) throw CliError("usage", "--data and --out are required");
  Dataset d = load_dataset_checked(o.data);
  Manifest file = load_config_file(o.config);

  DynamicsConfigT<float> def;
  Manifest merged;
  def.to_manifest(merged, "dyn.");
  overlay_section(merged, file, "dyn.");
  auto cfg = DynamicsConfigT<float>::from_manifest(merged, "dyn.");

  Manifest rm;
  stamp_run(rm, "train-dynamics", o.seed);
  rm.set("arg.data", o.data);
  cfg.to_manifest(rm, "dyn.");
  add_input(rm, "data", o.data);
  write_run_manifest(rm, o.out);

  Transitions tx = Transitions::from(d);
  DynamicsEnsembleT<float> ens(cfg, d.ns(), d.na(), o.seed);
  double nll = ens.train(tx, o.seed, o.out + "/train_log.csv");
  std::string ckpt = o.out + "/ensemble.ckpt";
  ens.save(ckpt, o.seed);

  rm.set("result.val_nll", fmt_g17(nll));
  write_run_manifest(rm, o.out);
  if (!o.quiet)
    std::printf("[train-dynamics] members=%d val_nll %.4f -> %s\n", cfg.n_members, nll,
                ckpt.c_str());
  return {nll, ckpt};
}

// ===========================================================================
// shared offline-RL helpers
// ===========================================================================

inline AgentConfigT<float> agent_config_from(const Manifest& file) {
  AgentConfigT<float> def;
  Manifest merged;
  def.to_manifest(merged, "agent.");
  overlay_section(merged, file, "agent.");
  auto cfg = AgentConfigT<float>::from_manifest(merged, "agent.");
  return cfg;
}

// ===========================================================================
// train-eta: state-space behavior policy for model rollouts
// ===========================================================================

struct TrainEtaOpts {
  std::string data, config, out;
  uint64_t seed = 0;
  int steps = -1;  // override agent.steps when >= 0
  bool quiet = false;
};

struct TrainEtaResult {
  double mean_return = 0, normalized_score = 0;
  bool evaluated = false;
  std::string checkpoint;
};

inline TrainEtaResult run_train_eta(const TrainEtaOpts& o) {
  if (o.data.empty() || o.out.empty()) throw CliError("usage", "--data and --out are required");
  Dataset d = load_dataset_checked(o.data);
  auto cfg = agent_config_from(load_config_file(o.config));
  cfg.input_space = InputSpace::State;  // eta acts on raw states by definition
  cfg.f = 1.0;                          // trained on real data only
  if (o.steps >= 0) cfg.steps = o.steps;
  cfg.validate();

  Manifest rm;
  stamp_run(rm, "train-eta", o.seed);
  rm.set("arg.data", o.data);
  cfg.to_manifest(rm, "agent.");
  add_input(rm, "data", o.data);
  write_run_manifest(rm, o.out);

  Transitions real = Transitions::from(d);
  OfflineTrainerT<float> tr(cfg, d.ns(), d.na(), o.seed);
  ScrollCartConfig env = env_from_dataset_meta(d.meta);
  uint64_t eval_seed = o.seed;
  int episodes = cfg.eval_episodes;
  EvalFnT<float> ev = [env, eval_seed, episodes](OfflineTrainerT<float>& t) {
    return evaluate_state_agent(t, env, episodes, eval_seed);
  };
  auto progress = [&](int64_t step, const RlStepStats& st) {
    if (!o.quiet && (step + 1) % 1000 == 0)
      std::printf("[train-eta] step %lld critic %.4f actor %.4f\n", (long long)(step + 1),
                  st.critic_loss, st.actor_loss);
  };
  auto sum = train_offline(tr, real, Transitions{}, o.out, ev, progress);

  rm.set("result.mean_return", fmt_g17(sum.last_eval_return));
  rm.set("result.normalized_score", fmt_g17(sum.last_eval_score));
  write_run_manifest(rm, o.out);
  std::string ckpt = o.out + "/ckpt_latest.ckpt";
  if (!o.quiet)
    std::printf("[train-eta] done return %.2f score %.1f -> %s\n", sum.last_eval_return,
                sum.last_eval_score, ckpt.c_str());
  return {sum.last_eval_return, sum.last_eval_score, sum.evaluated, ckpt};
}

// ===========================================================================
// augment: uncertainty-penalized model rollouts rendered to frames
// ===========================================================================

struct AugmentOpts {
  std::string data, s2p, dyn;
  std::string eta = "random";  // "random" or a path to a train-eta checkpoint
  int horizon = 1;
  int64_t k = 0;  // rollout count; 0 = match |D| / horizon
  std::string penalty = "max_var";
  double lambda = 2.0;
  std::string seed_filter;  // optional state predicate, e.g. "velocity>=0.3"
  std::string out;
  uint64_t seed = 0;
  bool quiet = false;
};

struct AugmentResult {
  RolloutStats stats;
};

inline AugmentResult run_augment(const AugmentOpts& o) {
  if (o.data.empty() || o.s2p.empty() || o.dyn.empty() || o.out.empty())
    throw CliError("usage", "--data, --s2p, --dyn and --out are required");
  Dataset d = load_dataset_checked(o.data);
  auto gen = load_generator<float>(load_checkpoint_checked(o.s2p));
  if (!fs::exists(o.dyn)) throw CliError("io", "checkpoint not found: " + o.dyn);
  DynamicsEnsembleT<float> ens;
  try {
    ens = DynamicsEnsembleT<float>::load(o.dyn);
  } catch (const std::exception& e) {
    throw CliError("data", "cannot load dynamics ensemble: " + std::string(e.what()));
  }

  RolloutConfig rc;
  rc.horizon = o.horizon;
  rc.k_rollouts = o.k;
  rc.seed = o.seed;
  try {
    rc.penalty.kind = parse_uncertainty(o.penalty);
  } catch (const std::exception& e) {
    throw CliError("usage", e.what());
  }
  if (o.lambda < 0) throw CliError("usage", "--lambda must be >= 0");
  rc.penalty.lambda = o.lambda;
  if (o.horizon < 1) throw CliError("usage", "--horizon must be >= 1");
  if (o.k < 0) throw CliError("usage", "--k must be >= 0");

  Eta eta;
  std::shared_ptr<OfflineTrainerT<float>> eta_agent;
  if (o.eta == "random" || o.eta == "random_policy") {
    rc.eta = EtaKind::RandomPolicy;
    eta = make_eta(EtaKind::RandomPolicy, d.na());
  } else {
    rc.eta = EtaKind::OfflineRlPolicy;
    eta_agent = std::make_shared<OfflineTrainerT<float>>(
        OfflineTrainerT<float>::load_agent(load_checkpoint_checked(o.eta)));
    if (eta_agent->cfg.input_space != InputSpace::State)
      throw CliError("data", "eta checkpoint is not a state-space policy: " + o.eta);
    if (eta_agent->ns != d.ns() || eta_agent->na != d.na())
      throw CliError("data", "eta policy dims do not match the dataset");
    auto sp = eta_agent;
    eta = make_eta(EtaKind::OfflineRlPolicy, d.na(),
                   [sp](const float* s, float* a, Rng& r) { sp->act_sample(s, a, r); });
  }

  RelabelRule rule;
  const RelabelRule* filter = nullptr;
  if (!o.seed_filter.empty()) {
    try {
      rule = RelabelRule::parse(o.seed_filter);
    } catch (const std::exception& e) {
      throw CliError("usage", e.what());
    }
    filter = &rule;
  }

  Manifest rm;
  stamp_run(rm, "augment", o.seed);
  rm.set("arg.data", o.data);
  rm.set("arg.s2p", o.s2p);
  rm.set("arg.dyn", o.dyn);
  rm.set("arg.eta", o.eta);
  if (!o.seed_filter.empty()) rm.set("arg.seed_filter", o.seed_filter);
  rc.to_manifest(rm, "rollout.");
  add_input(rm, "data", o.data);
  add_input(rm, "s2p", o.s2p);
  add_input(rm, "dyn", o.dyn);
  if (rc.eta == EtaKind::OfflineRlPolicy) add_input(rm, "eta", o.eta);
  write_run_manifest(rm, o.out);

  RolloutStats st = rollout_augment(d, ens, gen, eta, rc, o.out, filter);

  rm.set_int("result.transitions", st.transitions);
  rm.set_int("result.k_rollouts", st.k_rollouts);
  for (size_t i = 0; i < st.mean_u.size(); ++i)
    rm.set("result.mean_u." + std::to_string(i), fmt_g17(st.mean_u[i]));
  write_run_manifest(rm, o.out);
  if (!o.quiet)
    std::printf("[augment] k=%lld horizon=%d transitions=%lld mean_u[0]=%.3g -> %s\n",
                (long long)st.k_rollouts, o.horizon, (long long)st.transitions,
                st.mean_u.empty() ? 0.0 : st.mean_u[0], o.out.c_str());
  return {st};
}

// ===========================================================================
// pretrain-repr
// ===========================================================================

struct PretrainReprOpts {
  std::string data, config, out;
  uint64_t seed = 0;
  int steps = -1;  // override repr.steps when >= 0
  bool quiet = false;
};

struct PretrainReprResult {
  double loss = 0;
  std::string checkpoint;
};

inline PretrainReprResult run_pretrain_repr(const PretrainReprOpts& o) {
  if (o.data.empty() || o.out.empty()) throw CliError("usage", "--data and --out are required");
  Dataset d = load_dataset_checked(o.data);
  Manifest file = load_config_file(o.config);

  ReprConfigT<float> def;
  def.resolution = d.resolution();
  Manifest merged;
  def.to_manifest(merged, "repr.");
  overlay_section(merged, file, "repr.");
  auto cfg = ReprConfigT<float>::from_manifest(merged, "repr.");
  if (o.steps >= 0) cfg.steps = o.steps;
  if (cfg.resolution != d.resolution())
    throw CliError("config", "repr.resolution does not match the dataset resolution");

  Manifest rm;
  stamp_run(rm, "pretrain-repr", o.seed);
  rm.set("arg.data", o.data);
  cfg.to_manifest(rm, "repr.");
  add_input(rm, "data", o.data);
  write_run_manifest(rm, o.out);

  ReprTrainerT<float> tr(cfg, d.na(), o.seed);
  auto progress = [&](int step, double total) {
    if (!o.quiet && (step + 1) % 500 == 0)
      std::printf("[pretrain-repr] step %d/%d loss %.4f\n", step + 1, cfg.steps, total);
  };
  auto last = train_repr(tr, d, o.seed, o.out, progress);

  rm.set("result.loss", fmt_g17(last.total));
  rm.set("result.recon", fmt_g17(last.recon));
  write_run_manifest(rm, o.out);
  std::string ckpt = o.out + "/ckpt_latest.ckpt";
  if (!o.quiet) std::printf("[pretrain-repr] done loss %.4f -> %s\n", last.total, ckpt.c_str());
  return {last.total, ckpt};
}

// ===========================================================================
// train-offline
// ===========================================================================

struct TrainOfflineOpts {
  std::string data;        // real dataset
  std::string model_data;  // optional synthetic dataset from `augment`
  double f = -1;           // real fraction override when >= 0
  std::string algo;        // conservative | implicit; empty = config value
  std::string repr;        // latent encoder checkpoint; empty = raw states
  std::string config, out;
  uint64_t seed = 0;
  int steps = -1;  // override agent.steps when >= 0
  bool quiet = false;
};

struct TrainOfflineResult {
  double mean_return = 0, normalized_score = 0;
  bool evaluated = false;
  std::string checkpoint;
};

inline TrainOfflineResult run_train_offline(const TrainOfflineOpts& o) {
  if (o.data.empty() || o.out.empty()) throw CliError("usage", "--data and --out are required");
  Dataset d = load_dataset_checked(o.data);
  auto cfg = agent_config_from(load_config_file(o.config));
  if (!o.algo.empty()) {
    try {
      cfg.algo = parse_offline_algo(o.algo);
    } catch (const std::exception& e) {
      throw CliError("usage", e.what());
    }
  }
  if (o.f >= 0) cfg.f = o.f;
  if (o.steps >= 0) cfg.steps = o.steps;
  cfg.input_space = o.repr.empty() ? InputSpace::State : InputSpace::Latent;
  cfg.validate();
  if (o.model_data.empty() && cfg.f < 1.0)
    throw CliError("config", "f < 1 needs --model-data for the synthetic share");

  std::shared_ptr<ReprModelT<float>> repr;
  if (!o.repr.empty()) {
    repr = std::make_shared<ReprModelT<float>>(
        ReprModelT<float>::load_model(load_checkpoint_checked(o.repr)));
    if (repr->cfg.resolution != d.resolution())
      throw CliError("data", "latent encoder resolution does not match the dataset");
  }

  Manifest rm;
  stamp_run(rm, "train-offline", o.seed);
  rm.set("arg.data", o.data);
  if (!o.model_data.empty()) rm.set("arg.model_data", o.model_data);
  if (!o.repr.empty()) rm.set("arg.repr", o.repr);
  cfg.to_manifest(rm, "agent.");
  add_input(rm, "data", o.data);
  add_input(rm, "model_data", o.model_data);
  add_input(rm, "repr", o.repr);
  write_run_manifest(rm, o.out);

  Transitions real, model;
  if (repr) {
    if (!o.quiet) std::printf("[train-offline] inferring latents for %s\n", o.data.c_str());
    real = infer_latent_transitions(*repr, d);
  } else {
    real = Transitions::from(d);
  }
  if (!o.model_data.empty()) {
    Dataset md = load_dataset_checked(o.model_data);
    if (md.ns() != d.ns() || md.na() != d.na())
      throw CliError("data", "synthetic dataset dims do not match the real dataset");
    if (repr) {
      if (md.resolution() != repr->cfg.resolution)
        throw CliError("data", "synthetic dataset resolution does not match the encoder");
      if (!o.quiet)
        std::printf("[train-offline] inferring latents for %s\n", o.model_data.c_str());
      model = infer_latent_transitions(*repr, md);
    } else {
      model = Transitions::from(md);
    }
  }

  int ns = repr ? repr->cfg.z_dim : d.ns();
  OfflineTrainerT<float> tr(cfg, ns, d.na(), o.seed);
  ScrollCartConfig env = env_from_dataset_meta(d.meta);
  uint64_t eval_seed = o.seed;
  int episodes = cfg.eval_episodes;
  EvalFnT<float> ev;
  if (repr) {
    auto rp = repr;
    env.resolution = rp->cfg.resolution;  // rendered frames feed the encoder
    ev = [rp, env, eval_seed, episodes](OfflineTrainerT<float>& t) {
      return evaluate_latent_agent(t, *rp, env, episodes, eval_seed);
    };
  } else {
    ev = [env, eval_seed, episodes](OfflineTrainerT<float>& t) {
      return evaluate_state_agent(t, env, episodes, eval_seed);
    };
  }
  auto progress = [&](int64_t step, const RlStepStats& st) {
    if (!o.quiet && (step + 1) % 1000 == 0)
      std::printf("[train-offline] step %lld critic %.4f actor %.4f q %.2f\n",
                  (long long)(step + 1), st.critic_loss, st.actor_loss, st.q_mean);
  };
  auto sum = train_offline(tr, real, model, o.out, ev, progress);

  rm.set("result.mean_return", fmt_g17(sum.last_eval_return));
  rm.set("result.normalized_score", fmt_g17(sum.last_eval_score));
  write_run_manifest(rm, o.out);
  std::string ckpt = o.out + "/ckpt_latest.ckpt";
  if (!o.quiet)
    std::printf("[train-offline] done return %.2f score %.1f -> %s\n", sum.last_eval_return,
                sum.last_eval_score, ckpt.c_str());
  return {sum.last_eval_return, sum.last_eval_score, sum.evaluated, ckpt};
}

// ===========================================================================
// eval
// ===========================================================================

struct EvalOpts {
  std::string agent;
  std::string repr;  // required for latent-space agents
  int episodes = 10;
  std::string config;  // optional env.* overrides
  std::string out;     // optional: write eval_result.csv + manifest
  uint64_t seed = 0;
  bool quiet = false;
};

struct EvalResult {
  double mean_return = 0, normalized_score = 0;
};

inline EvalResult run_eval(const EvalOpts& o) {
  if (o.agent.empty()) throw CliError("usage", "--agent is required");
  if (o.episodes < 1) throw CliError("usage", "--episodes must be >= 1");
  auto tr = OfflineTrainerT<float>::load_agent(load_checkpoint_checked(o.agent));

  Manifest file = load_config_file(o.config);
  Manifest envm;
  env_to_manifest(ScrollCartConfig{}, envm);
  overlay_section(envm, file, "env.");
  ScrollCartConfig env = env_from_manifest(envm);

  double ret = 0, score = 0;
  if (tr.cfg.input_space == InputSpace::Latent) {
    if (o.repr.empty())
      throw CliError("config", "latent-space agent needs --repr for the encoder");
    auto repr = ReprModelT<float>::load_model(load_checkpoint_checked(o.repr));
    env.resolution = repr.cfg.resolution;  // frames must match the encoder input
    std::tie(ret, score) = evaluate_latent_agent(tr, repr, env, o.episodes, o.seed);
  } else {
    std::tie(ret, score) = evaluate_state_agent(tr, env, o.episodes, o.seed);
  }

  if (!o.out.empty()) {
    Manifest rm;
    stamp_run(rm, "eval", o.seed);
    rm.set("arg.agent", o.agent);
    if (!o.repr.empty()) rm.set("arg.repr", o.repr);
    rm.set_int("arg.episodes", o.episodes);
    env_to_manifest(env, rm);
    add_input(rm, "agent", o.agent);
    add_input(rm, "repr", o.repr);
    rm.set("result.mean_return", fmt_g17(ret));
    rm.set("result.normalized_score", fmt_g17(score));
    write_run_manifest(rm, o.out);
    CsvWriter w(o.out + "/eval_result.csv", {"episodes", "mean_return", "normalized_score"});
    w.row({std::to_string(o.episodes), fmt_g9(ret), fmt_g9(score)});
  }
  if (!o.quiet)
    std::printf("[eval] episodes=%d mean_return %.3f normalized_score %.2f\n", o.episodes,
                ret, score);
  return {ret, score};
}

// ===========================================================================
// eval-images: PSNR/SSIM of generated frames, one-step and recurrent
// ===========================================================================

struct EvalImagesOpts {
  std::string s2p, data;
  std::string split = "val";  // val: the trainer's held-out 10%; all: every pair
  int rollout = 0;            // recurrent horizon; 0 = one-step only
  int windows = 64;           // rollout start points
  std::string out;            // optional: csv tables + manifest
  uint64_t seed = 0;          // window sampling (rollout eval)
  bool quiet = false;
};

struct EvalImagesResult {
  double mean_psnr = 0, mean_ssim = 0;
  int64_t pairs = 0;
  std::vector<double> step_psnr, step_ssim;  // per rollout step, 1-based
};

inline EvalImagesResult run_eval_images(const EvalImagesOpts& o) {
  if (o.s2p.empty() || o.data.empty())
    throw CliError("usage", "--s2p and --data are required");
  if (o.split != "val" && o.split != "all")
    throw CliError("usage", "--split must be 'val' or 'all'");
  Dataset d = load_dataset_checked(o.data);
  Checkpoint ck = load_checkpoint_checked(o.s2p);
  auto gen = load_generator<float>(ck);
  if (gen.cfg.resolution != d.resolution())
    throw CliError("data", "generator resolution does not match the dataset");
  const int R = d.resolution();
  const int64_t fsz = (int64_t)3 * R * R;

  std::vector<PairIndex> idx;
  if (o.split == "val") {
    uint64_t train_seed = (uint64_t)std::stoull(ck.get_meta("seed"));
    std::vector<PairIndex> train_idx;
    split_pairs_seeded(d, train_seed, train_idx, idx);
  } else {
    idx = all_pairs(d);
  }
  if (idx.empty()) throw CliError("data", "dataset has no frame pairs");

  EvalImagesResult res;
  res.pairs = (int64_t)idx.size();
  {
    EvalGuardT<float> guard(gen.ps);
    const int chunk = 16;
    std::vector<uint8_t> q((size_t)fsz);
    for (size_t at = 0; at < idx.size(); at += chunk) {
      size_t cnt = std::min((size_t)chunk, idx.size() - at);
      TensorT<float> states, prev, target;
      fill_pair_batch(d, idx, at, cnt, states, prev, target);
      auto fake = gen.forward(states, constant(prev));
      for (size_t b = 0; b < cnt; ++b) {
        const PairIndex& pi = idx[at + b];
        const uint8_t* truth = d.trajs[(size_t)pi.traj].frame(pi.t);
        chw_to_frame(fake->val.ptr() + (int64_t)b * fsz, R, q.data());
        res.mean_psnr += psnr_frames(q.data(), truth, fsz);
        res.mean_ssim += ssim_frames(q.data(), truth, R, R);
      }
    }
  }
  res.mean_psnr /= (double)res.pairs;
  res.mean_ssim /= (double)res.pairs;
  if (!o.quiet)
    std::printf("[eval-images] split=%s pairs=%lld psnr %.2f ssim %.4f\n", o.split.c_str(),
                (long long)res.pairs, res.mean_psnr, res.mean_ssim);

  if (o.rollout > 0) {
    const int M = o.rollout;
    if (o.windows < 1) throw CliError("usage", "--windows must be >= 1");
    // start points (traj, t0) with M frames ahead
    std::vector<PairIndex> starts;
    for (size_t i = 0; i < d.trajs.size(); ++i)
      for (int t0 = 0; t0 + M <= d.trajs[i].T(); ++t0)
        starts.push_back({(int32_t)i, (int32_t)t0});
    if (starts.empty())
      throw CliError("data", "no trajectory is long enough for the rollout horizon");
    Rng rng(o.seed, 0xe51a);
    int W = std::min<int>(o.windows, (int)starts.size());
    std::vector<PairIndex> picks;
    for (int w = 0; w < W; ++w)
      picks.push_back(starts[(size_t)rng.uniform_int((int64_t)starts.size())]);

    const int ns = d.ns();
    TensorT<float> states({W, M, ns}), init({W, 3, R, R});
    for (int w = 0; w < W; ++w) {
      const Trajectory& tr = d.trajs[(size_t)picks[(size_t)w].traj];
      int t0 = picks[(size_t)w].t;
      frame_to_chw(tr.frame(t0), R, init.ptr() + (int64_t)w * fsz);
      for (int m = 0; m < M; ++m)
        for (int k = 0; k < ns; ++k)
          states[((int64_t)w * M + m) * ns + k] = tr.state(t0 + m + 1)[k];
    }
    TensorT<float> out = generate_rollout(gen, states, init);
    res.step_psnr.assign((size_t)M, 0.0);
    res.step_ssim.assign((size_t)M, 0.0);
    std::vector<uint8_t> q((size_t)fsz);
    for (int w = 0; w < W; ++w) {
      const Trajectory& tr = d.trajs[(size_t)picks[(size_t)w].traj];
      int t0 = picks[(size_t)w].t;
      for (int m = 0; m < M; ++m) {
        chw_to_frame(out.ptr() + ((int64_t)w * M + m) * fsz, R, q.data());
        const uint8_t* truth = tr.frame(t0 + m + 1);
        res.step_psnr[(size_t)m] += psnr_frames(q.data(), truth, fsz);
        res.step_ssim[(size_t)m] += ssim_frames(q.data(), truth, R, R);
      }
    }
    for (int m = 0; m < M; ++m) {
      res.step_psnr[(size_t)m] /= W;
      res.step_ssim[(size_t)m] /= W;
      if (!o.quiet)
        std::printf("[eval-images] rollout step %d psnr %.2f ssim %.4f\n", m + 1,
                    res.step_psnr[(size_t)m], res.step_ssim[(size_t)m]);
    }
  }

  if (!o.out.empty()) {
    fs::create_directories(o.out);
    CsvWriter w(o.out + "/image_metrics.csv", {"split", "pairs", "psnr", "ssim"});
    w.row({o.split, std::to_string(res.pairs), fmt_g9(res.mean_psnr), fmt_g9(res.mean_ssim)});
    if (!res.step_psnr.empty()) {
      CsvWriter rw(o.out + "/rollout_steps.csv", {"step", "psnr", "ssim"});
      for (size_t m = 0; m < res.step_psnr.size(); ++m)
        rw.row({std::to_string(m + 1), fmt_g9(res.step_psnr[m]), fmt_g9(res.step_ssim[m])});
    }
    Manifest rm;
    stamp_run(rm, "eval-images", o.seed);
    rm.set("arg.s2p", o.s2p);
    rm.set("arg.data", o.data);
    rm.set("arg.split", o.split);
    rm.set_int("arg.rollout", o.rollout);
    rm.set_int("arg.windows", o.windows);
    add_input(rm, "s2p", o.s2p);
    add_input(rm, "data", o.data);
    rm.set("result.psnr", fmt_g17(res.mean_psnr));
    rm.set("result.ssim", fmt_g17(res.mean_ssim));
    write_run_manifest(rm, o.out);
  }
  return res;
}

// ===========================================================================
// report: cross-run summary table + plots
// ===========================================================================

struct ReportOpts {
  std::vector<std::string> runs;
  std::string out;
  bool quiet = false;
};

struct ReportResult {
  int64_t rows = 0;
  std::vector<std::string> plots;
};

inline ReportResult run_report(const ReportOpts& o) {
  if (o.runs.empty() || o.out.empty())
    throw CliError("usage", "--runs (at least one) and --out are required");
  fs::create_directories(o.out);

  CsvWriter sum(o.out + "/summary.csv",
                {"run", "command", "transitions", "val_psnr", "val_ssim", "val_l1", "val_nll",
                 "mean_return", "normalized_score", "mean_u_first", "mean_u_last"});
  std::vector<PlotSeries> curves_return, curves_psnr, curves_u;

  for (const auto& dir : o.runs) {
    std::string mpath = dir + "/run_manifest.txt";
    if (!fs::exists(mpath)) throw CliError("io", "no run manifest in " + dir);
    Manifest m = Manifest::load(mpath);
    std::string cmd = m.get_or("command", "?");
    std::string name = fs::path(dir).filename().string();
    if (name.empty()) name = dir;

    std::string transitions = m.get_or("result.transitions", "");
    std::string vpsnr = m.get_or("result.val_psnr", m.get_or("result.psnr", ""));
    std::string vssim = m.get_or("result.ssim", "");
    std::string vl1 = m.get_or("result.val_l1", "");
    std::string vnll = m.get_or("result.val_nll", "");
    std::string ret = m.get_or("result.mean_return", "");
    std::string score = m.get_or("result.normalized_score", "");
    std::string u0, ulast;
    if (fs::exists(dir + "/uncertainty_summary.csv")) {
      CsvTable t = read_csv(dir + "/uncertainty_summary.csv");
      if (!t.rows.empty()) {
        PlotSeries s;
        s.label = name;
        for (size_t r = 0; r < t.rows.size(); ++r) {
          s.x.push_back(t.num(r, "step"));
          s.y.push_back(t.num(r, "mean_u"));
        }
        curves_u.push_back(std::move(s));
        u0 = fmt_g9(t.num(0, "mean_u"));
        ulast = fmt_g9(t.num(t.rows.size() - 1, "mean_u"));
      }
    }
    if (fs::exists(dir + "/eval_log.csv")) {
      CsvTable t = read_csv(dir + "/eval_log.csv");
      if (!t.rows.empty()) {
        PlotSeries s;
        s.label = name;
        for (size_t r = 0; r < t.rows.size(); ++r) {
          s.x.push_back(t.num(r, "step"));
          s.y.push_back(t.num(r, "normalized_score"));
        }
        curves_return.push_back(std::move(s));
      }
    }
    if ((cmd == "train-s2p") && fs::exists(dir + "/train_log.csv")) {
      CsvTable t = read_csv(dir + "/train_log.csv");
      if (!t.rows.empty()) {
        PlotSeries s;
        s.label = name;
        for (size_t r = 0; r < t.rows.size(); ++r) {
          s.x.push_back(t.num(r, "epoch"));
          s.y.push_back(t.num(r, "psnr"));
        }
        curves_psnr.push_back(std::move(s));
      }
    }
    sum.row({name, cmd, transitions, vpsnr, vssim, vl1, vnll, ret, score, u0, ulast});
  }

  ReportResult res;
  res.rows = (int64_t)o.runs.size();
  if (!curves_return.empty()) {
    std::string p = o.out + "/learning_curve_return.bmp";
    render_line_plot(p, "OFFLINE RL LEARNING CURVE", "STEP", "SCORE", curves_return);
    res.plots.push_back(p);
  }
  if (!curves_psnr.empty()) {
    std::string p = o.out + "/learning_curve_psnr.bmp";
    render_line_plot(p, "IMAGE MODEL LEARNING CURVE", "EPOCH", "PSNR (DB)", curves_psnr);
    res.plots.push_back(p);
  }
  if (!curves_u.empty()) {
    std::string p = o.out + "/uncertainty_vs_horizon.bmp";
    render_line_plot(p, "UNCERTAINTY VS ROLLOUT STEP", "STEP", "MEAN U", curves_u);
    res.plots.push_back(p);
  }

  Manifest rm;
  stamp_run(rm, "report", 0);
  for (size_t i = 0; i < o.runs.size(); ++i) {
    rm.set("arg.runs." + std::to_string(i), o.runs[i]);
    add_input(rm, "runs." + std::to_string(i), o.runs[i]);
  }
  for (const auto& p : res.plots) rm.set("result.plot." + fs::path(p).filename().string(), p);
  write_run_manifest(rm, o.out);
  if (!o.quiet)
    std::printf("[report] rows=%lld plots=%zu -> %s\n", (long long)res.rows,
                res.plots.size(), o.out.c_str());
  return res;
}

}  // namespace s2p
