// Transition generator stack: positional encoding, MAT modulation, generator
// and discriminator contracts, loss oracles, end-to-end finite differences,
// and the training loop (improvement + deterministic resume).
#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "s2p/data/collect.hpp"
#include "s2p/gen/s2p_train.hpp"

using namespace s2p;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "s2p_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Small double-precision config whose encoded state is 5-dim (ns=1, L=2).
GeneratorConfigT<double> tiny_cfg(int resolution = 16) {
  GeneratorConfigT<double> c;
  c.resolution = resolution;
  c.L = 2;
  c.base_channels = 8;
  c.d_w = 12;
  c.mat_hidden = 4;
  c.img_enc_channels = 8;
  c.state_proj_channels = 8;
  return c;
}

template <typename S>
TensorT<S> random_tensor(const Shape& shape, Rng& rng, S lo = (S)-1, S hi = (S)1) {
  TensorT<S> t(shape);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = (S)rng.uniform((double)lo, (double)hi);
  return t;
}

}  // namespace

TEST_CASE("positional encoding matches the analytic examples") {
  SECTION("x = 0, L = 2 gives (0, 0, 1, 0, 1)") {
    TensorT<double> s({1, 1});
    auto e = positional_encode(s, 2);
    REQUIRE(e.shape == Shape{1, 5});
    double want[5] = {0, 0, 1, 0, 1};
    for (int i = 0; i < 5; ++i)
      REQUIRE(e[i] == Catch::Approx(want[i]).epsilon(0).margin(1e-12));
  }
  SECTION("x = 1, L = 1 gives (1, 0, -1)") {
    TensorT<double> s({1, 1}, 1.0);
    auto e = positional_encode(s, 1);
    REQUIRE(e.shape == Shape{1, 3});
    REQUIRE(e[0] == 1.0);
    REQUIRE(e[1] == Catch::Approx(0.0).epsilon(0).margin(1e-12));
    REQUIRE(e[2] == Catch::Approx(-1.0).epsilon(0).margin(1e-12));
  }
  SECTION("ns = 3, L = 10 expands to dim 63, frequency parts in [-1,1]") {
    Rng rng(5, 1);
    auto s = random_tensor<double>({4, 3}, rng);
    auto e = positional_encode(s, 10);
    REQUIRE(e.shape == Shape{4, 63});
    REQUIRE(encoded_dim(3, 10) == 63);
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 3; ++c)
        for (int k = 1; k < 21; ++k) {
          double v = e[(int64_t)b * 63 + c * 21 + k];
          REQUIRE(v >= -1.0);
          REQUIRE(v <= 1.0);
        }
  }
  SECTION("injective on [-1, 1) per component") {
    Rng rng(6, 1);
    for (int trial = 0; trial < 200; ++trial) {
      double x = rng.uniform(-1.0, 1.0 - 1e-9);
      double y = rng.uniform(-1.0, 1.0 - 1e-9);
      if (std::abs(x - y) < 1e-6) continue;
      TensorT<double> s({2, 1});
      s[0] = x;
      s[1] = y;
      auto e = positional_encode(s, 1);
      // (x, sin pi x, cos pi x) rows must differ
      double diff = 0;
      for (int k = 0; k < 3; ++k) diff = std::max(diff, std::abs(e[k] - e[3 + k]));
      REQUIRE(diff > 1e-9);
    }
  }
  SECTION("errors") {
    TensorT<double> s({1, 1});
    REQUIRE_THROWS_AS(positional_encode(s, 0), std::invalid_argument);
    s[0] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(positional_encode(s, 2), std::invalid_argument);
  }
}

TEST_CASE("mat affine satisfies identity, inverse, and epsilon guard") {
  Rng rng(7, 2);
  const int N = 2, C = 3, H = 5, W = 4;
  const double eps = 1e-5;

  for (int trial = 0; trial < 100; ++trial) {
    TensorT<double> x({N, C, H, W});
    for (int64_t i = 0; i < x.numel(); ++i) x[i] = 2.0 * rng.normal();

    // per-sample per-channel spatial stats, straight-line
    TensorT<double> mu({N, C}), var({N, C});
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        double m = 0;
        const double* p = x.ptr() + ((int64_t)n * C + c) * H * W;
        for (int i = 0; i < H * W; ++i) m += p[i];
        m /= H * W;
        double v = 0;
        for (int i = 0; i < H * W; ++i) v += (p[i] - m) * (p[i] - m);
        mu[(int64_t)n * C + c] = m;
        var[(int64_t)n * C + c] = v / (H * W);
      }

    // gamma = 1, beta = 0: normalized output, mean 0 / std 1
    {
      auto y = mat_affine(constant(x), constant(TensorT<double>({N, C, H, W}, 1.0)),
                          constant(TensorT<double>({N, C, H, W}, 0.0)));
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const double* p = y->val.ptr() + ((int64_t)n * C + c) * H * W;
          double m = 0;
          for (int i = 0; i < H * W; ++i) m += p[i];
          m /= H * W;
          double v = 0;
          for (int i = 0; i < H * W; ++i) v += (p[i] - m) * (p[i] - m);
          v /= H * W;
          REQUIRE(m == Catch::Approx(0.0).epsilon(0).margin(1e-5));
          REQUIRE(std::sqrt(v) == Catch::Approx(1.0).epsilon(0).margin(1e-5));
        }
    }

    // gamma = sigma_c, beta = mu_c: recovers x
    {
      TensorT<double> g({N, C, H, W}), b({N, C, H, W});
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          double sd = std::sqrt(var[(int64_t)n * C + c] + eps);
          double m = mu[(int64_t)n * C + c];
          for (int i = 0; i < H * W; ++i) {
            g[((int64_t)n * C + c) * H * W + i] = sd;
            b[((int64_t)n * C + c) * H * W + i] = m;
          }
        }
      auto y = mat_affine(constant(x), constant(g), constant(b));
      for (int64_t i = 0; i < x.numel(); ++i)
        REQUIRE(y->val[i] == Catch::Approx(x[i]).epsilon(0).margin(1e-5));
    }
  }

  SECTION("constant channel stays finite through the epsilon guard") {
    TensorT<double> x({1, 2, 4, 4}, 3.25);
    auto y = mat_affine(constant(x), constant(TensorT<double>({1, 2, 4, 4}, 1.0)),
                        constant(TensorT<double>({1, 2, 4, 4}, 0.0)));
    REQUIRE(all_finite(y->val));
    for (int64_t i = 0; i < y->val.numel(); ++i)
      REQUIRE(y->val[i] == Catch::Approx(0.0).epsilon(0).margin(1e-9));
  }

  SECTION("gradients pass finite differences") {
    TensorT<double> x({1, 2, 3, 3}), g({1, 2, 3, 3}), b({1, 2, 3, 3});
    for (int64_t i = 0; i < x.numel(); ++i) {
      x[i] = rng.normal();
      g[i] = 1.0 + 0.3 * rng.normal();
      b[i] = 0.3 * rng.normal();
    }
    auto vx = leaf(x, true);
    auto vg = leaf(g, true);
    auto vb = leaf(b, true);
    auto loss = mean_all(square(mat_affine(vx, vg, vb)));
    backward(loss);
    auto eval = [&](TensorT<double>& t, int64_t i, double d) {
      t[i] += d;
      auto l = mean_all(square(mat_affine(constant(x), constant(g), constant(b))));
      t[i] -= d;
      return l->val[0];
    };
    const double fd_eps = 1e-6;
    for (int64_t i = 0; i < x.numel(); i += 3) {
      double fd = (eval(x, i, fd_eps) - eval(x, i, -fd_eps)) / (2 * fd_eps);
      REQUIRE(vx->grad[i] == Catch::Approx(fd).epsilon(0).margin(2e-6));
      fd = (eval(g, i, fd_eps) - eval(g, i, -fd_eps)) / (2 * fd_eps);
      REQUIRE(vg->grad[i] == Catch::Approx(fd).epsilon(0).margin(2e-6));
      fd = (eval(b, i, fd_eps) - eval(b, i, -fd_eps)) / (2 * fd_eps);
      REQUIRE(vb->grad[i] == Catch::Approx(fd).epsilon(0).margin(2e-6));
    }
  }
}

TEST_CASE("latent mapping: determinism, width, and input differentiability") {
  auto cfg = tiny_cfg();
  GeneratorT<double> g(cfg, 1, 100);

  SECTION("identical states give identical codes of width d_w") {
    TensorT<double> s({2, 1});
    s[0] = 0.37;
    s[1] = 0.37;
    auto w = g.map_latent(s);
    REQUIRE(w->val.shape == Shape{2, cfg.d_w});
    for (int d = 0; d < cfg.d_w; ++d) REQUIRE(w->val[d] == w->val[cfg.d_w + d]);
  }

  SECTION("gradient of |w|^2 w.r.t. the encoded state passes finite differences") {
    TensorT<double> s({1, 1});
    s[0] = 0.21;
    TensorT<double> e = positional_encode(s, cfg.L);  // 5-dim probe
    const int D = (int)e.numel();

    // same math as map_latent, but with the normalization in the graph
    auto forward_from = [&](const TensorT<double>& enc, bool want_grad) {
      auto ve = leaf(enc, want_grad);
      auto x4 = reshape(ve, {1, 1, 1, D});
      auto msq = mean_hw(square(x4));  // [1,1]
      auto inv = div(constant(TensorT<double>({1, 1}, 1.0)),
                     sqrt_v(add_c(msq, 1e-8)));
      auto normed = reshape(mul(x4, broadcast_hw(inv, 1, D)), {1, D});
      VarT<double> h = normed;
      for (auto& l : g.mapping) h = lrelu(l(h), 0.2);
      return std::pair{ve, h};
    };

    auto [ve, w] = forward_from(e, true);
    // composed path agrees with the production forward
    auto w_prod = g.map_latent(s);
    for (int d = 0; d < cfg.d_w; ++d)
      REQUIRE(w->val[d] == Catch::Approx(w_prod->val[d]).epsilon(1e-12).margin(1e-12));

    auto loss = sum_all(square(w));
    backward(loss);

    const double fd_eps = 1e-6;
    for (int i = 0; i < D; ++i) {
      TensorT<double> ep = e, em = e;
      ep[i] += fd_eps;
      em[i] -= fd_eps;
      double lp = sum_all(square(forward_from(ep, false).second))->val[0];
      double lm = sum_all(square(forward_from(em, false).second))->val[0];
      double fd = (lp - lm) / (2 * fd_eps);
      double ad = ve->grad[i];
      REQUIRE(ad == Catch::Approx(fd).epsilon(1e-4).margin(1e-6));
    }
  }
}

TEST_CASE("generator forward contract and resolution covariance") {
  Rng rng(11, 3);
  for (int R : {16, 32}) {
    auto cfg = tiny_cfg(R);
    GeneratorT<double> g(cfg, 3, 55);
    auto states = random_tensor<double>({2, 3}, rng);
    auto prev = random_tensor<double>({2, 3, R, R}, rng);
    auto out = g.forward(states, constant(prev));
    REQUIRE(out->val.shape == Shape{2, 3, R, R});
    REQUIRE(all_finite(out->val));
    for (int64_t i = 0; i < out->val.numel(); ++i) {
      REQUIRE(out->val[i] > -1.0);
      REQUIRE(out->val[i] < 1.0);
    }
    // deterministic
    auto out2 = g.forward(states, constant(prev));
    REQUIRE(out->val.data == out2->val.data);
    // zero previous frame is fine
    auto out0 = g.forward(states, constant(TensorT<double>({2, 3, R, R})));
    REQUIRE(all_finite(out0->val));
  }

  SECTION("resolution mismatch and invalid resolutions throw") {
    auto cfg = tiny_cfg(32);
    GeneratorT<double> g(cfg, 3, 55);
    TensorT<double> s({1, 3});
    REQUIRE_THROWS_AS(g.forward(s, constant(TensorT<double>({1, 3, 16, 16}))),
                      std::invalid_argument);
    GeneratorConfigT<double> bad;
    bad.resolution = 48;
    REQUIRE_THROWS_AS(bad.n_blocks(), std::invalid_argument);
    REQUIRE(tiny_cfg(64).n_blocks() == 4);
    REQUIRE(tiny_cfg(32).n_blocks() == 3);
  }
}

TEST_CASE("discriminator scales, stability, and determinism") {
  Rng rng(13, 3);
  MultiDiscriminatorT<double> D(3, 42);
  auto states = random_tensor<double>({2, 3}, rng);
  auto img = random_tensor<double>({2, 3, 32, 32}, rng);
  auto scores = D(states, constant(img));
  REQUIRE(scores.size() == 2);
  // full and half resolution maps differ by 2x spatially
  REQUIRE(scores[0]->val.dim(2) == 2 * scores[1]->val.dim(2));
  REQUIRE(scores[0]->val.dim(3) == 2 * scores[1]->val.dim(3));

  auto scores2 = D(states, constant(img));
  REQUIRE(scores[0]->val.data == scores2[0]->val.data);

  auto extreme = D(states, constant(TensorT<double>({2, 3, 32, 32}, 1.0)));
  REQUIRE(all_finite(extreme[0]->val));
  REQUIRE(all_finite(extreme[1]->val));
  auto extreme2 = D(states, constant(TensorT<double>({2, 3, 32, 32}, -1.0)));
  REQUIRE(all_finite(extreme2[0]->val));
}

TEST_CASE("loss operations agree with straight-line oracles") {
  Rng rng(17, 3);
  auto a = random_tensor<double>({1, 3, 4, 4}, rng);
  auto b = random_tensor<double>({1, 3, 4, 4}, rng);

  SECTION("L1") {
    double oracle = 0;
    for (int64_t i = 0; i < a.numel(); ++i) oracle += std::abs(a[i] - b[i]);
    oracle /= a.numel();
    REQUIRE(loss_l1(constant(a), constant(b))->val[0] ==
            Catch::Approx(oracle).epsilon(0).margin(1e-9));
    REQUIRE(loss_l1(constant(a), constant(a))->val[0] == 0.0);
  }

  SECTION("perceptual") {
    PerceptualNetT<double> net(777);
    auto tr = net.taps(constant(a));
    auto tf = net.taps(constant(b));
    double oracle = 0;
    for (size_t i = 0; i < tr.size(); ++i) {
      double m = 0;
      for (int64_t j = 0; j < tr[i]->val.numel(); ++j)
        m += std::abs(tr[i]->val[j] - tf[i]->val[j]);
      oracle += m / tr[i]->val.numel();
    }
    REQUIRE(loss_perceptual(net, constant(a), constant(b))->val[0] ==
            Catch::Approx(oracle).epsilon(1e-9).margin(1e-9));
    REQUIRE(loss_perceptual(net, constant(a), constant(a))->val[0] == 0.0);
    // frozen and seeded: a second instance produces identical taps
    PerceptualNetT<double> net2(777);
    auto tr2 = net2.taps(constant(a));
    REQUIRE(tr[0]->val.data == tr2[0]->val.data);
  }

  SECTION("hinge losses") {
    auto sr = random_tensor<double>({1, 1, 3, 3}, rng, -2.0, 2.0);
    auto sf = random_tensor<double>({1, 1, 3, 3}, rng, -2.0, 2.0);
    double od = 0;
    for (int64_t i = 0; i < sr.numel(); ++i) od -= std::min(0.0, -1.0 + sr[i]);
    od /= sr.numel();
    double of = 0;
    for (int64_t i = 0; i < sf.numel(); ++i) of -= std::min(0.0, -1.0 - sf[i]);
    of /= sf.numel();
    REQUIRE(loss_adv_d(constant(sr), constant(sf))->val[0] ==
            Catch::Approx(od + of).epsilon(0).margin(1e-9));

    double og = 0;
    for (int64_t i = 0; i < sf.numel(); ++i) og -= sf[i];
    og /= sf.numel();
    REQUIRE(loss_adv_g(constant(sf))->val[0] ==
            Catch::Approx(og).epsilon(0).margin(1e-9));

    // saturation: D(real) >= 1 and D(fake) <= -1 everywhere -> exactly 0
    REQUIRE(loss_adv_d(constant(TensorT<double>({1, 1, 2, 2}, 1.5)),
                       constant(TensorT<double>({1, 1, 2, 2}, -2.0)))
                ->val[0] == 0.0);
    // partial hinge by hand: real 0.5 -> 0.5; fake -0.3 -> 0.7
    REQUIRE(loss_adv_d(constant(TensorT<double>({1, 1, 1, 1}, 0.5)),
                       constant(TensorT<double>({1, 1, 1, 1}, -0.3)))
                ->val[0] == Catch::Approx(1.2).epsilon(0).margin(1e-12));
  }

  SECTION("total loss with lambda = (1,0,0) equals L1 exactly") {
    auto l1 = loss_l1(constant(a), constant(b));
    auto total = loss_total(l1, VarT<double>(), VarT<double>(), 1.0, 0.0, 0.0);
    REQUIRE(total->val[0] == l1->val[0]);
  }
}

TEST_CASE("end-to-end generator and discriminator gradients pass finite differences") {
  auto cfg = tiny_cfg(16);
  GeneratorT<double> G(cfg, 2, 21);
  MultiDiscriminatorT<double> D(2, 22);
  PerceptualNetT<double> phi(777);
  Rng rng(23, 5);
  auto states = random_tensor<double>({2, 2}, rng);
  auto prev = random_tensor<double>({2, 3, 16, 16}, rng);
  auto target = random_tensor<double>({2, 3, 16, 16}, rng);

  auto gen_loss = [&] {
    auto fake = G.forward(states, constant(prev));
    auto l1 = loss_l1(constant(target), fake);
    auto l_per = loss_perceptual(phi, constant(target), fake);
    auto scores = D(states, fake);
    VarT<double> adv;
    for (auto& s : scores) {
      auto term = loss_adv_g(s);
      adv = adv ? add(adv, term) : term;
    }
    return loss_total(l1, l_per, adv, cfg.lambda1, cfg.lambda2, cfg.lambda3);
  };

  auto check_params = [](ParamStoreT<double>& ps, const std::function<double()>& f,
                         const std::function<void()>& run_backward, int stride) {
    run_backward();
    std::vector<std::pair<std::string, TensorT<double>>> grads;
    for (auto& p : ps.params) grads.emplace_back(p.name, p.var->grad);
    const double fd_eps = 1e-5;
    int checked = 0;
    for (size_t pi = 0; pi < ps.params.size(); pi += (size_t)stride) {
      auto& p = ps.params[pi];
      int64_t idx = (int64_t)(pi * 7919) % p.var->val.numel();
      double keep = p.var->val[idx];
      p.var->val[idx] = keep + fd_eps;
      double lp = f();
      p.var->val[idx] = keep - fd_eps;
      double lm = f();
      p.var->val[idx] = keep;
      double fd = (lp - lm) / (2 * fd_eps);
      double ad = grads[pi].second[idx];
      INFO("param " << p.name << " idx " << idx << " ad " << ad << " fd " << fd);
      REQUIRE(std::abs(ad - fd) <= 1e-3 * std::max(1.0, std::abs(fd)));
      ++checked;
    }
    REQUIRE(checked >= 8);
  };

  SECTION("generator parameters under the full training loss") {
    check_params(
        G.ps, [&] { return gen_loss()->val[0]; },
        [&] {
          G.ps.zero_grad();
          D.ps.zero_grad();
          backward(gen_loss());
        },
        3);
  }

  SECTION("discriminator parameters under the hinge loss") {
    auto d_loss = [&] {
      auto fake = detach(G.forward(states, constant(prev)));
      auto sr = D(states, constant(target));
      auto sf = D(states, fake);
      VarT<double> l;
      for (size_t k = 0; k < sr.size(); ++k) {
        auto term = loss_adv_d(sr[k], sf[k]);
        l = l ? add(l, term) : term;
      }
      return l;
    };
    check_params(
        D.ps, [&] { return d_loss()->val[0]; },
        [&] {
          D.ps.zero_grad();
          backward(d_loss());
        },
        1);
  }
}

TEST_CASE("training improves validation L1 and resumes bit-exactly") {
  // tiny expert dataset at 16px
  ScrollCartConfig env_cfg;
  env_cfg.resolution = 16;
  env_cfg.episode_len = 40;
  auto data_dir = tmpdir("gen_data");
  collect_dataset(env_cfg, PolicyKind::Expert, 120, 31, data_dir.string());
  Dataset data = Dataset::load(data_dir.string());

  GeneratorConfigT<float> cfg;
  cfg.resolution = 16;
  cfg.L = 4;
  cfg.base_channels = 16;
  cfg.d_w = 32;
  cfg.mat_hidden = 8;
  cfg.img_enc_channels = 16;
  cfg.state_proj_channels = 16;
  cfg.batch = 8;
  cfg.epochs = 6;

  auto dir_a = tmpdir("gen_run_a");
  S2pTrainerT<float> tr_a(cfg, 3, 91);
  auto [val_l1, val_psnr] = train_s2p(tr_a, data, dir_a.string());
  REQUIRE(std::isfinite(val_l1));
  REQUIRE(std::isfinite(val_psnr));

  auto log_a = read_csv((dir_a / "train_log.csv").string());
  REQUIRE(log_a.rows.size() == 6);
  double l1_ep0 = log_a.num(0, "val_l1");
  double l1_ep5 = log_a.num(5, "val_l1");
  INFO("val_l1 epoch0 " << l1_ep0 << " epoch5 " << l1_ep5);
  REQUIRE(l1_ep5 < l1_ep0);
  for (size_t r = 0; r < log_a.rows.size(); ++r) {
    REQUIRE(std::isfinite(log_a.num(r, "loss_g")));
    REQUIRE(std::isfinite(log_a.num(r, "loss_d")));
  }

  SECTION("resume reproduces the continuous run exactly") {
    auto dir_b = tmpdir("gen_run_b");
    GeneratorConfigT<float> cfg4 = cfg;
    cfg4.epochs = 4;
    S2pTrainerT<float> tr_b(cfg4, 3, 91);
    train_s2p(tr_b, data, dir_b.string());

    S2pTrainerT<float> tr_c(cfg, 3, 91);  // epochs = 6
    auto ckpt = Checkpoint::load((dir_b / "ckpt_latest.ckpt").string());
    tr_c.restore(ckpt);
    REQUIRE(tr_c.epochs_done == 4);
    train_s2p(tr_c, data, dir_b.string());

    auto log_b = read_csv((dir_b / "train_log.csv").string());
    REQUIRE(log_b.rows.size() == 6);
    // epochs 4 and 5 must match the uninterrupted run field-for-field
    for (size_t r = 4; r < 6; ++r) REQUIRE(log_b.rows[r] == log_a.rows[r]);
  }

  SECTION("checkpoint loads back into an identical generator") {
    auto ckpt = Checkpoint::load((dir_a / "ckpt_latest.ckpt").string());
    auto g = load_generator<float>(ckpt);
    REQUIRE(g.cfg.resolution == 16);
    Rng rng(3, 3);
    auto states = random_tensor<float>({2, 3}, rng);
    auto prev = random_tensor<float>({2, 3, 16, 16}, rng);
    EvalGuardT<float> g1(tr_a.G.ps), g2(g.ps);
    auto a = tr_a.G.forward(states, constant(prev));
    auto b = g.forward(states, constant(prev));
    REQUIRE(a->val.data == b->val.data);
  }

  SECTION("recurrent rollout chains through the storage quantizer") {
    auto ckpt = Checkpoint::load((dir_a / "ckpt_latest.ckpt").string());
    auto g = load_generator<float>(ckpt);
    Rng rng(4, 3);
    const int T = 3, R = 16;
    TensorT<float> states({1, T, 3});
    for (int64_t i = 0; i < states.numel(); ++i) states[i] = (float)rng.uniform(-1.0, 1.0);
    auto init = random_tensor<float>({1, 3, R, R}, rng);
    auto frames = generate_rollout(g, states, init);
    REQUIRE(frames.shape == Shape{1, T, 3, R, R});
    REQUIRE(all_finite(frames));

    // step 0 by hand: forward, quantize, compare
    TensorT<float> s0({1, 3});
    for (int k = 0; k < 3; ++k) s0[k] = states[k];
    EvalGuardT<float> guard(g.ps);
    auto f0 = g.forward(s0, constant(init));
    std::vector<uint8_t> q((size_t)R * R * 3);
    chw_to_frame(f0->val.ptr(), R, q.data());
    TensorT<float> rt({3, R, R});
    frame_to_chw(q.data(), R, rt.ptr());
    for (int64_t i = 0; i < rt.numel(); ++i) REQUIRE(rt[i] == frames[i]);
  }
}

TEST_CASE("training errors on degenerate datasets") {
  GeneratorConfigT<float> cfg;
  cfg.resolution = 16;
  S2pTrainerT<float> tr(cfg, 3, 1);
  Dataset empty;
  std::vector<PairIndex> a, b;
  REQUIRE_THROWS_AS(tr.split_pairs(empty, a, b), std::runtime_error);
}
