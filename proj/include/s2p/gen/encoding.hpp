#pragma once

#include <cmath>
#include <stdexcept>

#include "s2p/core/tensor.hpp"

namespace s2p {

/// Per-component frequency encoding: each input x becomes the (2L+1)-block
/// (x, sin 2^0 pi x, cos 2^0 pi x, ..., sin 2^{L-1} pi x, cos 2^{L-1} pi x).
template <typename S>
TensorT<S> positional_encode(const TensorT<S>& s, int L) {
  if (L < 1) throw std::invalid_argument("positional_encode: L must be >= 1");
  int B = s.dim(0), ns = s.dim(1);
  for (int64_t i = 0; i < s.numel(); ++i)
    if (!std::isfinite((double)s[i]))
      throw std::invalid_argument("positional_encode: non-finite input");
  int block = 2 * L + 1;
  TensorT<S> out({B, ns * block});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < ns; ++c) {
      S x = s[(int64_t)b * ns + c];
      S* dst = out.ptr() + (int64_t)b * ns * block + (int64_t)c * block;
      dst[0] = x;
      double freq = M_PI;
      for (int l = 0; l < L; ++l) {
        dst[1 + 2 * l] = (S)std::sin(freq * (double)x);
        dst[2 + 2 * l] = (S)std::cos(freq * (double)x);
        freq *= 2.0;
      }
    }
  return out;
}

inline int encoded_dim(int ns, int L) { return ns * (2 * L + 1); }

}  // namespace s2p
