#pragma once

#include <Eigen/Dense>

#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace s2p {

/// Allocator pinning every tensor buffer to one SIMD-register-width alignment.
/// With mixed alignments, Eigen's vectorized reductions peel differently per
/// allocation and summation order varies run to run; fixing the alignment
/// makes all numeric traversals (and therefore training) bit-reproducible.
template <typename T, std::size_t Align = 64>
struct AlignedAllocT {
  using value_type = T;
  template <typename U>
  struct rebind {
    using other = AlignedAllocT<U, Align>;
  };
  AlignedAllocT() = default;
  template <typename U>
  AlignedAllocT(const AlignedAllocT<U, Align>&) {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align)));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t(Align));
  }
  friend bool operator==(const AlignedAllocT&, const AlignedAllocT&) { return true; }
  friend bool operator!=(const AlignedAllocT&, const AlignedAllocT&) { return false; }
};

template <typename S>
using AlignedVec = std::vector<S, AlignedAllocT<S>>;

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

/// Dense row-major tensor over scalar type S. Rank is dynamic; the autograd
/// layer interprets shapes as [N,C,H,W] for images, [rows,cols] for matrices.
template <typename S>
struct TensorT {
  Shape shape;
  AlignedVec<S> data;

  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatMap = Eigen::Map<Mat>;
  using CMatMap = Eigen::Map<const Mat>;
  using VecMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>;
  using CVecMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>;

  TensorT() = default;
  explicit TensorT(Shape sh) : shape(std::move(sh)), data(shape_numel(shape), S(0)) {}
  TensorT(Shape sh, S fill) : shape(std::move(sh)), data(shape_numel(shape), fill) {}
  TensorT(Shape sh, AlignedVec<S> values) : shape(std::move(sh)), data(std::move(values)) {
    assert((int64_t)data.size() == shape_numel(shape));
  }

  int64_t numel() const { return (int64_t)data.size(); }
  int dim(int i) const { return shape[(size_t)i]; }
  int rank() const { return (int)shape.size(); }

  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }
  S& operator[](int64_t i) { return data[(size_t)i]; }
  S operator[](int64_t i) const { return data[(size_t)i]; }

  /// 2D view as rows x cols; tensor must have exactly rows*cols elements.
  MatMap mat(int rows, int cols) { return MatMap(data.data(), rows, cols); }
  CMatMap mat(int rows, int cols) const { return CMatMap(data.data(), rows, cols); }
  /// Natural 2D view of a rank-2 tensor.
  MatMap mat() { assert(rank() == 2); return mat(shape[0], shape[1]); }
  CMatMap mat() const { assert(rank() == 2); return mat(shape[0], shape[1]); }
  VecMap vec() { return VecMap(data.data(), (Eigen::Index)numel()); }
  CVecMap vec() const { return CVecMap(data.data(), (Eigen::Index)numel()); }

  TensorT reshaped(Shape sh) const {
    if (shape_numel(sh) != numel())
      throw std::invalid_argument("reshape " + shape_str(shape) + " -> " + shape_str(sh));
    TensorT out;
    out.shape = std::move(sh);
    out.data = data;
    return out;
  }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }

  static TensorT zeros(Shape sh) { return TensorT(std::move(sh)); }
  static TensorT full(Shape sh, S v) { return TensorT(std::move(sh), v); }

  template <typename T2>
  TensorT<T2> cast() const {
    TensorT<T2> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = (T2)data[i];
    return out;
  }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }
};

using Tensor = TensorT<float>;

template <typename S>
inline bool all_finite(const TensorT<S>& t) {
  for (S v : t.data)
    if (!std::isfinite((double)v)) return false;
  return true;
}

}  // namespace s2p
