#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "s2p/data/dataset.hpp"

namespace s2p {

constexpr double kPsnrCap = 100.0;

/// PSNR between two images given in [-1,1]; computed on the [0,1] scale.
/// Identical inputs hit the 100 dB cap instead of +inf.
inline double psnr(const float* a, const float* b, int64_t n) {
  double mse = 0;
  for (int64_t i = 0; i < n; ++i) {
    double d = ((double)a[i] - (double)b[i]) * 0.5;  // [-1,1] -> [0,1] difference
    mse += d * d;
  }
  mse /= (double)n;
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

inline double psnr_frames(const uint8_t* a, const uint8_t* b, int64_t n) {
  double mse = 0;
  for (int64_t i = 0; i < n; ++i) {
    double d = ((double)a[i] - (double)b[i]) / 255.0;
    mse += d * d;
  }
  mse /= (double)n;
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace detail {

inline std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k((size_t)size);
  double sum = 0;
  int c = size / 2;
  for (int i = 0; i < size; ++i) {
    double d = i - c;
    k[(size_t)i] = std::exp(-d * d / (2 * sigma * sigma));
    sum += k[(size_t)i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable valid-mode Gaussian filtering: rows then columns.
inline std::vector<double> gauss_valid(const std::vector<double>& img, int H, int W,
                                       const std::vector<double>& k) {
  int n = (int)k.size();
  int Wo = W - n + 1, Ho = H - n + 1;
  std::vector<double> tmp((size_t)H * Wo, 0.0), out((size_t)Ho * Wo, 0.0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < Wo; ++x) {
      double acc = 0;
      for (int i = 0; i < n; ++i) acc += k[(size_t)i] * img[(size_t)y * W + x + i];
      tmp[(size_t)y * Wo + x] = acc;
    }
  for (int y = 0; y < Ho; ++y)
    for (int x = 0; x < Wo; ++x) {
      double acc = 0;
      for (int i = 0; i < n; ++i) acc += k[(size_t)i] * tmp[(size_t)(y + i) * Wo + x];
      out[(size_t)y * Wo + x] = acc;
    }
  return out;
}

}  // namespace detail

/// SSIM between two CHW images in [-1,1]. Channel-mean grayscale on [0,1],
/// 11x11 Gaussian window (sigma 1.5), C1=0.01^2, C2=0.03^2, valid windows.
inline double ssim(const float* a, const float* b, int C, int H, int W) {
  const int win = 11;
  const double sigma = 1.5, C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  if (H < win || W < win) throw std::invalid_argument("ssim: image smaller than window");
  std::vector<double> ga((size_t)H * W, 0.0), gb((size_t)H * W, 0.0);
  for (int c = 0; c < C; ++c)
    for (int64_t i = 0; i < (int64_t)H * W; ++i) {
      ga[(size_t)i] += ((double)a[(int64_t)c * H * W + i] + 1.0) * 0.5 / C;
      gb[(size_t)i] += ((double)b[(int64_t)c * H * W + i] + 1.0) * 0.5 / C;
    }
  auto k = detail::gaussian_kernel(win, sigma);
  std::vector<double> aa((size_t)H * W), bb((size_t)H * W), ab((size_t)H * W);
  for (int64_t i = 0; i < (int64_t)H * W; ++i) {
    aa[(size_t)i] = ga[(size_t)i] * ga[(size_t)i];
    bb[(size_t)i] = gb[(size_t)i] * gb[(size_t)i];
    ab[(size_t)i] = ga[(size_t)i] * gb[(size_t)i];
  }
  auto mu1 = detail::gauss_valid(ga, H, W, k);
  auto mu2 = detail::gauss_valid(gb, H, W, k);
  auto s11 = detail::gauss_valid(aa, H, W, k);
  auto s22 = detail::gauss_valid(bb, H, W, k);
  auto s12 = detail::gauss_valid(ab, H, W, k);
  double acc = 0;
  for (size_t i = 0; i < mu1.size(); ++i) {
    double m1 = mu1[i], m2 = mu2[i];
    double v1 = s11[i] - m1 * m1, v2 = s22[i] - m2 * m2, cv = s12[i] - m1 * m2;
    acc += ((2 * m1 * m2 + C1) * (2 * cv + C2)) /
           ((m1 * m1 + m2 * m2 + C1) * (v1 + v2 + C2));
  }
  return acc / (double)mu1.size();
}

inline double ssim_frames(const uint8_t* a, const uint8_t* b, int H, int W) {
  std::vector<float> fa((size_t)3 * H * W), fb((size_t)3 * H * W);
  frame_to_chw(a, H, fa.data());
  frame_to_chw(b, H, fb.data());
  (void)W;
  return ssim(fa.data(), fb.data(), 3, H, W);
}

// ---- dataset-support coverage ----

namespace detail {
// Mean over queries of the average distance to the k nearest pool points.
inline double mean_knn_dist(const std::vector<float>& queries, const std::vector<float>& pool,
                            int dim, int k) {
  int64_t nq = (int64_t)queries.size() / dim;
  int64_t np = (int64_t)pool.size() / dim;
  if (np < k) throw std::invalid_argument("support_coverage: k exceeds pool size");
  double total = 0;
  std::vector<double> best((size_t)k);
  for (int64_t q = 0; q < nq; ++q) {
    for (auto& b : best) b = 1e300;
    const float* qp = queries.data() + q * dim;
    for (int64_t p = 0; p < np; ++p) {
      const float* pp = pool.data() + p * dim;
      double d2 = 0;
      for (int i = 0; i < dim; ++i) {
        double d = (double)qp[i] - (double)pp[i];
        d2 += d * d;
      }
      // insert into the running top-k (k is tiny)
      if (d2 < best[(size_t)k - 1]) {
        int j = k - 1;
        while (j > 0 && best[(size_t)j - 1] > d2) {
          best[(size_t)j] = best[(size_t)j - 1];
          --j;
        }
        best[(size_t)j] = d2;
      }
    }
    for (int i = 0; i < k; ++i) total += std::sqrt(best[(size_t)i]);
  }
  return total / ((double)nq * k);
}
}  // namespace detail

/// Ratio of held-out k-NN distance against (base ∪ extra) vs base alone.
/// < 1 means the synthetic data extends the dataset's support.
inline double support_coverage(const std::vector<float>& heldout,
                               const std::vector<float>& base,
                               const std::vector<float>& extra, int dim, int k) {
  if (heldout.empty() || base.empty())
    throw std::invalid_argument("support_coverage: empty input");
  std::vector<float> pool = base;
  pool.insert(pool.end(), extra.begin(), extra.end());
  double with = detail::mean_knn_dist(heldout, pool, dim, k);
  double without = detail::mean_knn_dist(heldout, base, dim, k);
  if (without <= 0) return 1.0;
  return with / without;
}

}  // namespace s2p
