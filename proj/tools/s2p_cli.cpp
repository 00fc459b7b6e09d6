// Command-line front end: argument parsing and exit-code mapping only; all
// work happens in the run_* functions so tests can drive them in-process.

#include <cstdio>

#include "CLI11.hpp"
#include "s2p/cli/run.hpp"

namespace {

template <typename Fn>
int guarded(const char* cmd, Fn&& fn) {
  try {
    fn();
    return 0;
  } catch (const s2p::CliError& e) {
    std::fprintf(stderr, "s2p %s: error: %s: %s\n", cmd, e.category.c_str(), e.what());
    return e.category == "usage" ? 2 : 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "s2p %s: error: io: %s\n", cmd, e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "s2p %s: error: config: %s\n", cmd, e.what());
    return 1;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "s2p %s: error: io: %s\n", cmd, e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "s2p %s: error: internal: %s\n", cmd, e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"state-to-pixel transition synthesis and offline RL pipeline"};
  app.require_subcommand(1);
  app.failure_message([](const CLI::App* a, const CLI::Error& e) {
    return "s2p: error: usage: " + CLI::FailureMessage::simple(a, e);
  });

  s2p::CollectOpts co;
  auto* collect = app.add_subcommand("collect", "roll scripted policies in the environment");
  collect->add_option("--kind", co.kind, "random | mixed | expert")->required();
  collect->add_option("--size", co.size, "number of transitions")->required();
  collect->add_option("--out", co.out, "output dataset directory")->required();
  collect->add_option("--seed", co.seed, "rng seed");
  collect->add_option("--config", co.config, "config file (env.* section)");
  collect->add_flag("--quiet", co.quiet);

  s2p::TrainS2pOpts so;
  auto* ts = app.add_subcommand("train-s2p", "train the image-transition generator");
  ts->add_option("--data", so.data, "dataset directory")->required();
  ts->add_option("--config", so.config, "config file (gen.* section)");
  ts->add_option("--out", so.out, "run directory")->required();
  ts->add_option("--seed", so.seed, "rng seed");
  ts->add_option("--epochs", so.epochs, "override gen.epochs");
  ts->add_flag("--resume", so.resume, "continue from ckpt_latest.ckpt in --out");
  ts->add_flag("--quiet", so.quiet);

  s2p::TrainDynOpts dyo;
  auto* td = app.add_subcommand("train-dynamics", "train the probabilistic dynamics ensemble");
  td->add_option("--data", dyo.data, "dataset directory")->required();
  td->add_option("--config", dyo.config, "config file (dyn.* section)");
  td->add_option("--out", dyo.out, "run directory")->required();
  td->add_option("--seed", dyo.seed, "rng seed");
  td->add_flag("--quiet", dyo.quiet);

  s2p::TrainEtaOpts eo;
  auto* te = app.add_subcommand("train-eta", "train the state-space rollout policy");
  te->add_option("--data", eo.data, "dataset directory")->required();
  te->add_option("--config", eo.config, "config file (agent.* section)");
  te->add_option("--out", eo.out, "run directory")->required();
  te->add_option("--seed", eo.seed, "rng seed");
  te->add_option("--steps", eo.steps, "override agent.steps");
  te->add_flag("--quiet", eo.quiet);

  s2p::AugmentOpts ao;
  auto* au = app.add_subcommand("augment", "synthesize penalized model rollouts with frames");
  au->add_option("--data", ao.data, "real dataset directory")->required();
  au->add_option("--s2p", ao.s2p, "generator checkpoint")->required();
  au->add_option("--dyn", ao.dyn, "dynamics ensemble checkpoint")->required();
  au->add_option("--eta", ao.eta, "'random' or a train-eta checkpoint path");
  au->add_option("--horizon", ao.horizon, "steps per rollout (M)");
  au->add_option("--k", ao.k, "rollout count (K); 0 matches the dataset volume");
  au->add_option("--penalty", ao.penalty, "max_var | ens_var | average_both");
  au->add_option("--lambda", ao.lambda, "uncertainty penalty weight");
  au->add_option("--seed-filter", ao.seed_filter, "start-state predicate, e.g. velocity>=0.3");
  au->add_option("--out", ao.out, "output dataset directory")->required();
  au->add_option("--seed", ao.seed, "rng seed");
  au->add_flag("--quiet", ao.quiet);

  s2p::PretrainReprOpts po;
  auto* pr = app.add_subcommand("pretrain-repr", "pretrain the latent state representation");
  pr->add_option("--data", po.data, "dataset directory")->required();
  pr->add_option("--config", po.config, "config file (repr.* section)");
  pr->add_option("--out", po.out, "run directory")->required();
  pr->add_option("--seed", po.seed, "rng seed");
  pr->add_option("--steps", po.steps, "override repr.steps");
  pr->add_flag("--quiet", po.quiet);

  s2p::TrainOfflineOpts oo;
  auto* to = app.add_subcommand("train-offline", "train an offline RL agent");
  to->add_option("--data", oo.data, "real dataset directory")->required();
  to->add_option("--model-data", oo.model_data, "synthetic dataset from augment");
  to->add_option("--f", oo.f, "real fraction per batch, in [0,1]");
  to->add_option("--algo", oo.algo, "conservative | implicit");
  to->add_option("--repr", oo.repr, "latent encoder checkpoint (omit for raw states)");
  to->add_option("--config", oo.config, "config file (agent.* section)");
  to->add_option("--out", oo.out, "run directory")->required();
  to->add_option("--seed", oo.seed, "rng seed");
  to->add_option("--steps", oo.steps, "override agent.steps");
  to->add_flag("--quiet", oo.quiet);

  s2p::EvalOpts vo;
  auto* ev = app.add_subcommand("eval", "run a trained agent in the environment");
  ev->add_option("--agent", vo.agent, "agent checkpoint")->required();
  ev->add_option("--repr", vo.repr, "latent encoder checkpoint (latent agents)");
  ev->add_option("--episodes", vo.episodes, "episode count");
  ev->add_option("--config", vo.config, "config file (env.* section)");
  ev->add_option("--out", vo.out, "optional run directory for results");
  ev->add_option("--seed", vo.seed, "rng seed");
  ev->add_flag("--quiet", vo.quiet);

  s2p::EvalImagesOpts io;
  auto* ei = app.add_subcommand("eval-images", "PSNR/SSIM of generated frames");
  ei->add_option("--s2p", io.s2p, "generator checkpoint")->required();
  ei->add_option("--data", io.data, "dataset directory")->required();
  ei->add_option("--split", io.split, "val | all");
  ei->add_option("--rollout", io.rollout, "recurrent horizon (0 = one-step only)");
  ei->add_option("--windows", io.windows, "rollout start points");
  ei->add_option("--out", io.out, "optional run directory for tables");
  ei->add_option("--seed", io.seed, "rng seed for window sampling");
  ei->add_flag("--quiet", io.quiet);

  s2p::ReportOpts ro;
  auto* rp = app.add_subcommand("report", "summarize runs: csv table + plots");
  rp->add_option("--runs", ro.runs, "run directories")->required()->expected(-1);
  rp->add_option("--out", ro.out, "report directory")->required();
  rp->add_flag("--quiet", ro.quiet);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);        // prints help or the failure message
    return rc == 0 ? 0 : 2;     // normalize all usage failures to exit 2
  }

  if (collect->parsed()) return guarded("collect", [&] { s2p::run_collect(co); });
  if (ts->parsed()) return guarded("train-s2p", [&] { s2p::run_train_s2p(so); });
  if (td->parsed()) return guarded("train-dynamics", [&] { s2p::run_train_dynamics(dyo); });
  if (te->parsed()) return guarded("train-eta", [&] { s2p::run_train_eta(eo); });
  if (au->parsed()) return guarded("augment", [&] { s2p::run_augment(ao); });
  if (pr->parsed()) return guarded("pretrain-repr", [&] { s2p::run_pretrain_repr(po); });
  if (to->parsed()) return guarded("train-offline", [&] { s2p::run_train_offline(oo); });
  if (ev->parsed()) return guarded("eval", [&] { s2p::run_eval(vo); });
  if (ei->parsed()) return guarded("eval-images", [&] { s2p::run_eval_images(io); });
  if (rp->parsed()) return guarded("report", [&] { s2p::run_report(ro); });
  std::fprintf(stderr, "s2p: error: usage: no subcommand\n");
  return 2;
}
