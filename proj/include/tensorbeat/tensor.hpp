#pragma once

// Dense third-order tensors and the matrix products used by CP decomposition.
//
// Storage is column-major with the first index fastest:
//   offset(i, j, k) = i + I * (j + J * k)
// so every frontal slice X(:, :, k) is a contiguous I x J column-major block
// and the mode-1 unfolding is a plain reshape of the buffer.

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "tensorbeat/error.hpp"

namespace tensorbeat {

using Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar_>
class Tensor3 {
 public:
  using Scalar = Scalar_;
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;
  using SliceMap = Eigen::Map<Matrix>;
  using ConstSliceMap = Eigen::Map<const Matrix>;

  Tensor3() = default;

  Tensor3(Index rows, Index cols, Index slices)
      : rows_(rows), cols_(cols), slices_(slices), data_(Vector::Zero(rows * cols * slices)) {
    if (rows < 0 || cols < 0 || slices < 0) throw Error("Tensor3: negative dimension");
  }

  static Tensor3 Zero(Index rows, Index cols, Index slices) { return Tensor3(rows, cols, slices); }

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  Index slices() const noexcept { return slices_; }
  Index size() const noexcept { return data_.size(); }

  /// Extent along mode 1, 2 or 3.
  Index dim(int mode) const {
    switch (mode) {
      case 1: return rows_;
      case 2: return cols_;
      case 3: return slices_;
      default: throw Error("Tensor3: mode must be 1, 2 or 3");
    }
  }

  Scalar& operator()(Index i, Index j, Index k) { return data_[i + rows_ * (j + cols_ * k)]; }
  const Scalar& operator()(Index i, Index j, Index k) const {
    return data_[i + rows_ * (j + cols_ * k)];
  }

  SliceMap slice(Index k) { return SliceMap(data_.data() + rows_ * cols_ * k, rows_, cols_); }
  ConstSliceMap slice(Index k) const {
    return ConstSliceMap(data_.data() + rows_ * cols_ * k, rows_, cols_);
  }

  Vector& vec() noexcept { return data_; }
  const Vector& vec() const noexcept { return data_; }

  bool allFinite() const { return data_.allFinite(); }

  Tensor3& operator+=(const Tensor3& other) {
    check_same_shape(other);
    data_ += other.data_;
    return *this;
  }
  Tensor3& operator-=(const Tensor3& other) {
    check_same_shape(other);
    data_ -= other.data_;
    return *this;
  }
  Tensor3& operator*=(Scalar s) {
    data_ *= s;
    return *this;
  }

  friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
  friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
  friend Tensor3 operator*(Scalar s, Tensor3 a) { return a *= s; }

 private:
  void check_same_shape(const Tensor3& other) const {
    if (rows_ != other.rows_ || cols_ != other.cols_ || slices_ != other.slices_)
      throw Error("Tensor3: shape mismatch");
  }

  Index rows_ = 0;
  Index cols_ = 0;
  Index slices_ = 0;
  Vector data_;
};

using Tensor3d = Tensor3<double>;

/// sqrt of the sum of squares of all entries.
template <typename Scalar>
Scalar frobenius_norm(const Tensor3<Scalar>& t) {
  return t.vec().norm();
}

/// Kronecker product: block (i, j) of the result is a(i, j) * b.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> kronecker(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  MatrixX<Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Column-wise Kronecker product. Row index of the result is i * M + m for
/// a of shape I x F and b of shape M x F.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> khatri_rao(const Eigen::MatrixBase<DerivedA>& a,
                                              const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.cols() != b.cols())
    throw Error("khatri_rao: column counts differ (" + std::to_string(a.cols()) + " vs " +
                std::to_string(b.cols()) + ")");
  MatrixX<Scalar> out(a.rows() * b.rows(), a.cols());
  for (Index f = 0; f < a.cols(); ++f)
    for (Index i = 0; i < a.rows(); ++i)
      out.col(f).segment(i * b.rows(), b.rows()) = a(i, f) * b.col(f);
  return out;
}

template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> hadamard(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("hadamard: shape mismatch");
  return a.cwiseProduct(b);
}

/// Mode-n unfolding with the column ordering that makes
///   X_(1) = A (C kr B)^T,  X_(2) = B (C kr A)^T,  X_(3) = C (B kr A)^T
/// hold exactly, where kr is khatri_rao above.
template <typename Scalar>
MatrixX<Scalar> matricize(const Tensor3<Scalar>& t, int mode) {
  const Index I = t.rows(), J = t.cols(), K = t.slices();
  switch (mode) {
    case 1:
      // column k * J + j holds X(:, j, k); that is the raw buffer layout.
      return Eigen::Map<const MatrixX<Scalar>>(t.vec().data(), I, J * K);
    case 2: {
      MatrixX<Scalar> out(J, I * K);
      for (Index k = 0; k < K; ++k) out.middleCols(k * I, I) = t.slice(k).transpose();
      return out;
    }
    case 3:
      return Eigen::Map<const MatrixX<Scalar>>(t.vec().data(), I * J, K).transpose();
    default:
      throw Error("matricize: mode must be 1, 2 or 3, got " + std::to_string(mode));
  }
}

/// Sum of rank-one terms a_f o b_f o c_f.
template <typename DerivedA, typename DerivedB, typename DerivedC>
Tensor3<typename DerivedA::Scalar> outer_sum(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b,
                                             const Eigen::MatrixBase<DerivedC>& c) {
  using Scalar = typename DerivedA::Scalar;
  if (a.cols() != b.cols() || a.cols() != c.cols())
    throw Error("outer_sum: factor column counts differ");
  Tensor3<Scalar> out(a.rows(), b.rows(), c.rows());
  // X_(3)^T = (B kr A) C^T, written slice by slice as A diag(c_k) B^T.
  for (Index k = 0; k < c.rows(); ++k)
    out.slice(k).noalias() = a * c.row(k).asDiagonal() * b.transpose();
  return out;
}

}  // namespace tensorbeat
