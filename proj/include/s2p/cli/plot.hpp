#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "s2p/io/bmp.hpp"

namespace s2p {

// ---------------------------------------------------------------------------
// Tiny raster canvas + 5x7 bitmap font, enough for labeled line plots without
// pulling in a graphics dependency. Output goes through write_bmp.
// ---------------------------------------------------------------------------

struct Rgb {
  uint8_t r = 0, g = 0, b = 0;
};

/// Column-encoded 5x7 glyphs (bit 0 = top row). Lowercase maps to uppercase;
/// anything not covered renders as a hollow box.
inline const uint8_t* glyph5x7(char ch) {
  struct G {
    char c;
    uint8_t col[5];
  };
  static const G table[] = {
      {' ', {0x00, 0x00, 0x00, 0x00, 0x00}}, {'%', {0x23, 0x13, 0x08, 0x64, 0x62}},
      {'(', {0x00, 0x1C, 0x22, 0x41, 0x00}}, {')', {0x00, 0x41, 0x22, 0x1C, 0x00}},
      {'+', {0x08, 0x08, 0x3E, 0x08, 0x08}}, {',', {0x00, 0x50, 0x30, 0x00, 0x00}},
      {'-', {0x08, 0x08, 0x08, 0x08, 0x08}}, {'.', {0x00, 0x60, 0x60, 0x00, 0x00}},
      {'/', {0x20, 0x10, 0x08, 0x04, 0x02}}, {'0', {0x3E, 0x51, 0x49, 0x45, 0x3E}},
      {'1', {0x00, 0x42, 0x7F, 0x40, 0x00}}, {'2', {0x42, 0x61, 0x51, 0x49, 0x46}},
      {'3', {0x21, 0x41, 0x45, 0x4B, 0x31}}, {'4', {0x18, 0x14, 0x12, 0x7F, 0x10}},
      {'5', {0x27, 0x45, 0x45, 0x45, 0x39}}, {'6', {0x3C, 0x4A, 0x49, 0x49, 0x30}},
      {'7', {0x01, 0x71, 0x09, 0x05, 0x03}}, {'8', {0x36, 0x49, 0x49, 0x49, 0x36}},
      {'9', {0x06, 0x49, 0x49, 0x29, 0x1E}}, {':', {0x00, 0x36, 0x36, 0x00, 0x00}},
      {'=', {0x14, 0x14, 0x14, 0x14, 0x14}}, {'A', {0x7E, 0x11, 0x11, 0x11, 0x7E}},
      {'B', {0x7F, 0x49, 0x49, 0x49, 0x36}}, {'C', {0x3E, 0x41, 0x41, 0x41, 0x22}},
      {'D', {0x7F, 0x41, 0x41, 0x22, 0x1C}}, {'E', {0x7F, 0x49, 0x49, 0x49, 0x41}},
      {'F', {0x7F, 0x09, 0x09, 0x09, 0x01}}, {'G', {0x3E, 0x41, 0x49, 0x49, 0x7A}},
      {'H', {0x7F, 0x08, 0x08, 0x08, 0x7F}}, {'I', {0x00, 0x41, 0x7F, 0x41, 0x00}},
      {'J', {0x20, 0x40, 0x41, 0x3F, 0x01}}, {'K', {0x7F, 0x08, 0x14, 0x22, 0x41}},
      {'L', {0x7F, 0x40, 0x40, 0x40, 0x40}}, {'M', {0x7F, 0x02, 0x0C, 0x02, 0x7F}},
      {'N', {0x7F, 0x04, 0x08, 0x10, 0x7F}}, {'O', {0x3E, 0x41, 0x41, 0x41, 0x3E}},
      {'P', {0x7F, 0x09, 0x09, 0x09, 0x06}}, {'Q', {0x3E, 0x41, 0x51, 0x21, 0x5E}},
      {'R', {0x7F, 0x09, 0x19, 0x29, 0x46}}, {'S', {0x46, 0x49, 0x49, 0x49, 0x31}},
      {'T', {0x01, 0x01, 0x7F, 0x01, 0x01}}, {'U', {0x3F, 0x40, 0x40, 0x40, 0x3F}},
      {'V', {0x1F, 0x20, 0x40, 0x20, 0x1F}}, {'W', {0x3F, 0x40, 0x38, 0x40, 0x3F}},
      {'X', {0x63, 0x14, 0x08, 0x14, 0x63}}, {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}},
      {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}}, {'_', {0x40, 0x40, 0x40, 0x40, 0x40}},
  };
  static const uint8_t box[5] = {0x7F, 0x41, 0x41, 0x41, 0x7F};
  if (ch >= 'a' && ch <= 'z') ch = (char)(ch - 'a' + 'A');
  for (const auto& g : table)
    if (g.c == ch) return g.col;
  return box;
}

struct Canvas {
  int w = 0, h = 0;
  std::vector<uint8_t> px;  // RGB, HWC

  Canvas(int w_, int h_, Rgb bg = {255, 255, 255}) : w(w_), h(h_) {
    px.resize((size_t)w * h * 3);
    for (int64_t i = 0; i < (int64_t)w * h; ++i) {
      px[(size_t)(3 * i) + 0] = bg.r;
      px[(size_t)(3 * i) + 1] = bg.g;
      px[(size_t)(3 * i) + 2] = bg.b;
    }
  }

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    size_t i = 3 * ((size_t)y * w + x);
    px[i] = c.r;
    px[i + 1] = c.g;
    px[i + 2] = c.b;
  }

  void hline(int x0, int x1, int y, Rgb c) {
    for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, c);
  }
  void vline(int x, int y0, int y1, Rgb c) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) set(x, y, c);
  }

  void line(int x0, int y0, int x1, int y1, Rgb c, int thick = 1) {
    int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      for (int ox = 0; ox < thick; ++ox)
        for (int oy = 0; oy < thick; ++oy) set(x0 + ox, y0 + oy, c);
      if (x0 == x1 && y0 == y1) break;
      int e2 = 2 * err;
      if (e2 >= dy) { err += dy; x0 += sx; }
      if (e2 <= dx) { err += dx; y0 += sy; }
    }
  }

  void text(int x, int y, const std::string& s, Rgb c, int scale = 1) {
    for (char ch : s) {
      const uint8_t* g = glyph5x7(ch);
      for (int cx = 0; cx < 5; ++cx)
        for (int cy = 0; cy < 7; ++cy)
          if (g[cx] & (1u << cy))
            for (int ox = 0; ox < scale; ++ox)
              for (int oy = 0; oy < scale; ++oy)
                set(x + cx * scale + ox, y + cy * scale + oy, c);
      x += 6 * scale;
    }
  }
  static int text_width(const std::string& s, int scale = 1) {
    return (int)s.size() * 6 * scale;
  }

  void save(const std::string& path) const { write_bmp(path, px.data(), w, h); }
};

// ---------------------------------------------------------------------------
// Line plots
// ---------------------------------------------------------------------------

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

inline Rgb plot_color(size_t i) {
  static const Rgb palette[] = {
      {31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},
      {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127},
      {188, 189, 34}, {23, 190, 207},
  };
  return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

inline std::string tick_label(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", v);
  return b;
}

/// Render labeled line series to a BMP. Axis limits come from the data (with
/// a small pad); degenerate ranges widen to +-1 around the value.
inline void render_line_plot(const std::string& path, const std::string& title,
                             const std::string& xlabel, const std::string& ylabel,
                             const std::vector<PlotSeries>& series, int W = 720,
                             int H = 480) {
  Canvas cv(W, H);
  const Rgb black{0, 0, 0}, grey{210, 210, 210}, dark{80, 80, 80};
  const int ml = 70, mr = 18, mt = 34, mb = 48;
  const int x0 = ml, x1 = W - mr, y0 = mt, y1 = H - mb;  // plot rect (y down)

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!any) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        any = true;
      } else {
        xmin = std::min(xmin, s.x[i]);
        xmax = std::max(xmax, s.x[i]);
        ymin = std::min(ymin, s.y[i]);
        ymax = std::max(ymax, s.y[i]);
      }
    }
  if (xmax - xmin < 1e-12) { xmin -= 1; xmax += 1; }
  if (ymax - ymin < 1e-12) { ymin -= 1; ymax += 1; }
  double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double v) {
    return x0 + (int)std::lround((v - xmin) / (xmax - xmin) * (x1 - x0));
  };
  auto py = [&](double v) {
    return y1 - (int)std::lround((v - ymin) / (ymax - ymin) * (y1 - y0));
  };

  // grid + ticks
  const int nticks = 5;
  for (int i = 0; i <= nticks; ++i) {
    double tx = xmin + (xmax - xmin) * i / nticks;
    double ty = ymin + (ymax - ymin) * i / nticks;
    cv.vline(px(tx), y0, y1, grey);
    cv.hline(x0, x1, py(ty), grey);
    std::string lx = tick_label(tx), ly = tick_label(ty);
    cv.text(px(tx) - Canvas::text_width(lx) / 2, y1 + 6, lx, dark);
    cv.text(x0 - 6 - Canvas::text_width(ly), py(ty) - 3, ly, dark);
  }
  cv.hline(x0, x1, y1, black);
  cv.vline(x0, y0, y1, black);

  // series
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    Rgb c = plot_color(si);
    int prevx = 0, prevy = 0;
    bool have = false;
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        have = false;
        continue;
      }
      int cx = px(s.x[i]), cy = py(s.y[i]);
      if (have) cv.line(prevx, prevy, cx, cy, c, 2);
      prevx = cx;
      prevy = cy;
      have = true;
    }
    if (s.x.size() == 1) cv.line(prevx - 2, prevy, prevx + 2, prevy, c, 2);
  }

  // legend (top-left inside the plot rect)
  int lx = x0 + 10, ly = y0 + 8;
  for (size_t si = 0; si < series.size(); ++si) {
    cv.line(lx, ly + 3, lx + 16, ly + 3, plot_color(si), 2);
    cv.text(lx + 22, ly, series[si].label, black);
    ly += 12;
  }

  cv.text((W - Canvas::text_width(title, 2)) / 2, 8, title, black, 2);
  cv.text((x0 + x1 - Canvas::text_width(xlabel)) / 2, H - 14, xlabel, dark);
  // y label along the top of the axis (no rotated text in a 5x7 font)
  cv.text(4, y0 - 12, ylabel, dark);

  cv.save(path);
}

}  // namespace s2p
