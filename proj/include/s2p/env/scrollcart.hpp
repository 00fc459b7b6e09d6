#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "s2p/core/rng.hpp"

namespace s2p {

// A cart rolls along an endless checkerboard plain. The camera tracks the
// cart, so the cart stays centered while the ground scrolls past and the
// wheel spins. Observation: (sin phase, cos phase, velocity / v_max).
// The pair (observation_t, frame_{t-1}) determines frame_t exactly: the
// scroll advance equals the current velocity and the wheel angle is read
// off the observation. That makes the transition-rendering task well posed.

struct ScrollCartConfig {
  int resolution = 64;
  double v_max = 0.1;
  double drive = 0.02;     // action gain
  double friction = 0.9;   // velocity carry-over per step
  double wheel_radius = 0.05;  // world units; phase advance = v / wheel_radius
  int episode_len = 100;
};

struct ScrollCartState {
  double phase = 0;     // wheel angle, radians
  double velocity = 0;  // world units / step
  double scroll = 0;    // cart position along the plain
};

struct ScrollCart {
  static constexpr int ns = 3;
  ScrollCartConfig cfg;

  ScrollCart() = default;
  explicit ScrollCart(ScrollCartConfig c) : cfg(c) {}

  ScrollCartState reset(Rng& rng) const {
    ScrollCartState st;
    st.phase = rng.uniform(0.0, 2.0 * M_PI);
    st.velocity = rng.uniform(0.0, 0.5 * cfg.v_max);
    st.scroll = rng.uniform(0.0, 8.0);
    return st;
  }

  struct Step {
    ScrollCartState next;
    double reward;
  };

  Step step(const ScrollCartState& st, double action) const {
    double a = std::clamp(action, -1.0, 1.0);
    Step out;
    out.next.velocity =
        std::clamp(cfg.friction * st.velocity + cfg.drive * a, -cfg.v_max, cfg.v_max);
    out.next.scroll = st.scroll + out.next.velocity;
    out.next.phase = st.phase + out.next.velocity / cfg.wheel_radius;
    out.reward = out.next.velocity / cfg.v_max;
    return out;
  }

  std::array<float, ns> observe(const ScrollCartState& st) const {
    return {(float)std::sin(st.phase), (float)std::cos(st.phase),
            (float)(st.velocity / cfg.v_max)};
  }

  /// Max-speed controller: saturates the drive until v_max is reachable in
  /// one step, then holds it exactly.
  double expert_action(const ScrollCartState& st) const {
    return std::clamp((cfg.v_max - cfg.friction * st.velocity) / cfg.drive, -1.0, 1.0);
  }

  // ---- rendering ----

  int horizon_row() const { return (int)(0.45 * cfg.resolution); }

  void render(const ScrollCartState& st, uint8_t* rgb) const {
    const int R = cfg.resolution;
    const int hz = horizon_row();
    const int ts = std::max(2, R / 8);
    const double ppu = R / 2.0;

    auto put = [&](int x, int y, double r, double g, double b) {
      uint8_t* p = rgb + 3 * ((int64_t)y * R + x);
      p[0] = (uint8_t)std::clamp((int)std::lround(r), 0, 255);
      p[1] = (uint8_t)std::clamp((int)std::lround(g), 0, 255);
      p[2] = (uint8_t)std::clamp((int)std::lround(b), 0, 255);
    };

    // sky
    for (int y = 0; y < hz; ++y) {
      double t = hz > 1 ? (double)y / (hz - 1) : 0.0;
      double r = 118 + t * (186 - 118), g = 148 + t * (206 - 148), b = 228 + t * (242 - 228);
      for (int x = 0; x < R; ++x) put(x, y, r, g, b);
    }
    // scrolling checker ground
    double off = st.scroll * ppu;
    for (int y = hz; y < R; ++y) {
      double shade = 0.78 + 0.22 * (double)(y - hz + 1) / (R - hz);
      for (int x = 0; x < R; ++x) {
        auto fdiv = [](long long a, long long b) {
          long long q = a / b, r = a % b;
          return r && ((r < 0) != (b < 0)) ? q - 1 : q;
        };
        long long u = (long long)std::floor(x + off);
        int par = (int)((fdiv(u, ts) + fdiv(y, ts)) & 1);
        double r = par ? 98 : 64, g = par ? 152 : 110, b = par ? 66 : 46;
        put(x, y, r * shade, g * shade, b * shade);
      }
    }

    // cart geometry (camera-fixed)
    double cx = R / 2.0;
    double contact = hz + 0.62 * (R - hz);
    double wr = R / 9.0;
    double wcy = contact - wr;
    double body_bottom = wcy - 0.15 * wr;
    double body_h = R / 6.0, body_hw = R / 5.5;
    int by0 = (int)std::lround(body_bottom - body_h), by1 = (int)std::lround(body_bottom);
    int bx0 = (int)std::lround(cx - body_hw), bx1 = (int)std::lround(cx + body_hw);
    for (int y = std::max(0, by0); y < std::min(R, by1); ++y)
      for (int x = std::max(0, bx0); x < std::min(R, bx1); ++x) {
        bool edge = y == by0 || y == by1 - 1 || x == bx0 || x == bx1 - 1;
        bool roof = y - by0 < std::max(2, R / 24);
        if (edge)
          put(x, y, 140, 38, 30);
        else if (roof)
          put(x, y, 232, 186, 70);
        else
          put(x, y, 205, 66, 50);
      }

    // wheel: tire ring, pale hub, rotating 4-spoke cross
    double tire_w = std::max(1.5, R / 28.0);
    int wy0 = std::max(0, (int)std::floor(wcy - wr) - 1);
    int wy1 = std::min(R, (int)std::ceil(wcy + wr) + 2);
    int wx0 = std::max(0, (int)std::floor(cx - wr) - 1);
    int wx1 = std::min(R, (int)std::ceil(cx + wr) + 2);
    for (int y = wy0; y < wy1; ++y)
      for (int x = wx0; x < wx1; ++x) {
        double dx = x + 0.5 - cx, dy = y + 0.5 - wcy;
        double d = std::sqrt(dx * dx + dy * dy);
        if (d > wr) continue;
        if (d >= wr - tire_w) {
          put(x, y, 26, 26, 30);
          continue;
        }
        double theta = std::atan2(dy, dx);
        double s2 = std::abs(std::sin(2.0 * (theta - st.phase)));
        bool spoke = d > 1e-9 && d * s2 <= 2.4;
        if (d <= 0.22 * wr)
          put(x, y, 60, 60, 68);
        else if (spoke)
          put(x, y, 42, 42, 48);
        else
          put(x, y, 208, 208, 214);
      }
  }

  /// 1 where the cart (body or wheel) covers the pixel, 0 elsewhere.
  void render_mask(const ScrollCartState&, uint8_t* mask) const {
    const int R = cfg.resolution;
    std::fill_n(mask, (size_t)R * R, (uint8_t)0);
    const int hz = horizon_row();
    double cx = R / 2.0;
    double contact = hz + 0.62 * (R - hz);
    double wr = R / 9.0;
    double wcy = contact - wr;
    double body_bottom = wcy - 0.15 * wr;
    double body_h = R / 6.0, body_hw = R / 5.5;
    int by0 = (int)std::lround(body_bottom - body_h), by1 = (int)std::lround(body_bottom);
    int bx0 = (int)std::lround(cx - body_hw), bx1 = (int)std::lround(cx + body_hw);
    for (int y = std::max(0, by0); y < std::min(R, by1); ++y)
      for (int x = std::max(0, bx0); x < std::min(R, bx1); ++x)
        mask[(size_t)y * R + x] = 1;
    for (int y = 0; y < R; ++y)
      for (int x = 0; x < R; ++x) {
        double dx = x + 0.5 - cx, dy = y + 0.5 - wcy;
        if (dx * dx + dy * dy <= wr * wr) mask[(size_t)y * R + x] = 1;
      }
  }
};

}  // namespace s2p
