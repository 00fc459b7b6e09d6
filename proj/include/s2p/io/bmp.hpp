#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "s2p/io/bytes.hpp"

namespace s2p {

/// 24-bit uncompressed BMP from RGB u8 HWC pixels.
inline void write_bmp(const std::string& path, const uint8_t* rgb, int w, int h) {
  int row = (3 * w + 3) & ~3;
  uint32_t image_size = (uint32_t)row * h;
  uint32_t file_size = 54 + image_size;
  auto f = open_out(path);
  const uint8_t hdr0[2] = {'B', 'M'};
  write_bytes(f, hdr0, 2);
  write_pod<uint32_t>(f, file_size);
  write_pod<uint32_t>(f, 0);
  write_pod<uint32_t>(f, 54);
  write_pod<uint32_t>(f, 40);
  write_pod<int32_t>(f, w);
  write_pod<int32_t>(f, h);
  write_pod<uint16_t>(f, 1);
  write_pod<uint16_t>(f, 24);
  write_pod<uint32_t>(f, 0);
  write_pod<uint32_t>(f, image_size);
  write_pod<int32_t>(f, 2835);
  write_pod<int32_t>(f, 2835);
  write_pod<uint32_t>(f, 0);
  write_pod<uint32_t>(f, 0);
  std::vector<uint8_t> line((size_t)row, 0);
  for (int y = h - 1; y >= 0; --y) {  // BMP rows run bottom-up
    for (int x = 0; x < w; ++x) {
      const uint8_t* p = rgb + 3 * ((int64_t)y * w + x);
      line[(size_t)(3 * x) + 0] = p[2];
      line[(size_t)(3 * x) + 1] = p[1];
      line[(size_t)(3 * x) + 2] = p[0];
    }
    write_bytes(f, line.data(), line.size());
  }
}

/// Tile a list of same-size RGB frames into one image, `cols` per row.
inline void write_bmp_grid(const std::string& path, const std::vector<const uint8_t*>& frames,
                           int fw, int fh, int cols, int gap = 2) {
  int n = (int)frames.size();
  int rows = (n + cols - 1) / cols;
  int W = cols * fw + (cols - 1) * gap;
  int H = rows * fh + (rows - 1) * gap;
  std::vector<uint8_t> img((size_t)W * H * 3, 32);
  for (int i = 0; i < n; ++i) {
    int r = i / cols, c = i % cols;
    int oy = r * (fh + gap), ox = c * (fw + gap);
    for (int y = 0; y < fh; ++y)
      std::copy_n(frames[(size_t)i] + 3 * (int64_t)y * fw, (size_t)3 * fw,
                  img.data() + 3 * ((int64_t)(oy + y) * W + ox));
  }
  write_bmp(path, img.data(), W, H);
}

/// Minimal line-plot rasterizer for run reports.
struct LinePlot {
  int w = 640, h = 360;
  std::vector<uint8_t> img;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  int ml = 48, mr = 12, mt = 12, mb = 28;  // margins

  LinePlot(int w_, int h_) : w(w_), h(h_), img((size_t)w * h * 3, 255) {}

  void set_range(double xa, double xb, double ya, double yb) {
    x0 = xa; x1 = xb == xa ? xa + 1 : xb;
    y0 = ya; y1 = yb == ya ? ya + 1 : yb;
  }
  int px(double x) const {
    return ml + (int)((x - x0) / (x1 - x0) * (w - ml - mr - 1) + 0.5);
  }
  int py(double y) const {
    return h - mb - 1 - (int)((y - y0) / (y1 - y0) * (h - mt - mb - 1) + 0.5);
  }
  void put(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || x >= w || y < 0 || y >= h) return;
    uint8_t* p = img.data() + 3 * ((size_t)y * w + x);
    p[0] = r; p[1] = g; p[2] = b;
  }
  void line(int xa, int ya, int xb, int yb, uint8_t r, uint8_t g, uint8_t b) {
    int dx = std::abs(xb - xa), dy = -std::abs(yb - ya);
    int sx = xa < xb ? 1 : -1, sy = ya < yb ? 1 : -1, err = dx + dy;
    for (;;) {
      put(xa, ya, r, g, b);
      if (xa == xb && ya == yb) break;
      int e2 = 2 * err;
      if (e2 >= dy) { err += dy; xa += sx; }
      if (e2 <= dx) { err += dx; ya += sy; }
    }
  }
  void axes() {
    for (int x = ml; x < w - mr; ++x) put(x, h - mb, 0, 0, 0);
    for (int y = mt; y <= h - mb; ++y) put(ml, y, 0, 0, 0);
  }
  void curve(const std::vector<double>& xs, const std::vector<double>& ys, uint8_t r,
             uint8_t g, uint8_t b) {
    for (size_t i = 1; i < xs.size(); ++i)
      line(px(xs[i - 1]), py(ys[i - 1]), px(xs[i]), py(ys[i]), r, g, b);
  }
  void save(const std::string& path) const { write_bmp(path, img.data(), w, h); }
};

}  // namespace s2p
