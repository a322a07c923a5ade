#pragma once

// CP decomposition by alternating least squares, and the Kruskal k-rank
// uniqueness diagnostic.
//
// Each ALS step solves one factor in closed form through the Khatri-Rao
// pseudoinverse identity, e.g. for A:
//   A = X_(1) (C kr B) (C^T C * B^T B)^+
// so only an F x F Gram matrix is ever pseudo-inverted. The product
// X_(n) (. kr .) (the MTTKRP) is supplied by a source object, which lets the
// Hankel-structured CSI tensor skip forming the unfoldings altogether.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "tensorbeat/error.hpp"
#include "tensorbeat/preprocess.hpp"
#include "tensorbeat/tensor.hpp"

namespace tensorbeat {

template <typename Scalar>
struct FactorSet {
  MatrixX<Scalar> A;  // I x F
  MatrixX<Scalar> B;  // J x F
  MatrixX<Scalar> C;  // K x F
  std::vector<Scalar> fit_history;  // relative reconstruction error per sweep
  int sweeps = 0;
  bool converged = false;

  Index rank() const noexcept { return A.cols(); }
  Scalar final_error() const { return fit_history.empty() ? Scalar(0) : fit_history.back(); }
};

struct CpAlsOptions {
  int max_sweeps = 500;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  int restarts = 1;  // independent random starts; the lowest final error wins
};

/// Moore-Penrose pseudoinverse via SVD; singular values below
/// rcond * sigma_max are treated as zero.
template <typename Derived>
MatrixX<typename Derived::Scalar> pinv(const Eigen::MatrixBase<Derived>& m, double rcond = 1e-12) {
  using Scalar = typename Derived::Scalar;
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const Scalar cutoff = s.size() ? Scalar(rcond) * s[0] : Scalar(0);
  VectorX<Scalar> inv = VectorX<Scalar>::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i)
    if (s[i] > cutoff) inv[i] = Scalar(1) / s[i];
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

template <typename Scalar>
Tensor3<Scalar> reconstruct(const FactorSet<Scalar>& factors) {
  return outer_sum(factors.A, factors.B, factors.C);
}

namespace detail {

std::uint64_t als_restart_seed(std::uint64_t seed, int restart);

/// Dense tensors: MTTKRP through the explicit unfoldings, exact residual.
template <typename Scalar>
class DenseAlsSource {
 public:
  using Matrix = MatrixX<Scalar>;

  explicit DenseAlsSource(const Tensor3<Scalar>& x)
      : x_(x), x1_(matricize(x, 1)), x2_(matricize(x, 2)), x3_(matricize(x, 3)),
        norm_sq_(x.vec().squaredNorm()) {}

  Index dim(int mode) const { return x_.dim(mode); }
  Scalar squared_norm() const { return norm_sq_; }

  Matrix mttkrp(int mode, const Matrix& a, const Matrix& b, const Matrix& c) const {
    switch (mode) {
      case 1: return x1_ * khatri_rao(c, b);
      case 2: return x2_ * khatri_rao(c, a);
      default: return x3_ * khatri_rao(b, a);
    }
  }

  Scalar residual_sq(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix&) const {
    Scalar total = 0;
    for (Index k = 0; k < x_.slices(); ++k)
      total += (x_.slice(k) - a * c.row(k).asDiagonal() * b.transpose()).squaredNorm();
    return total;
  }

 private:
  const Tensor3<Scalar>& x_;
  Matrix x1_, x2_, x3_;
  Scalar norm_sq_;
};

/// Hankel-structured CSI tensor: MTTKRP through correlations of the
/// generating series; residual from the norm expansion
///   ||X - Xhat||^2 = ||X||^2 - 2 <X, Xhat> + ||Xhat||^2.
class HankelAlsSource {
 public:
  using Matrix = Eigen::MatrixXd;

  explicit HankelAlsSource(const CsiTensor& x);

  Index dim(int mode) const { return x_.dim(mode); }
  double squared_norm() const { return norm_sq_; }

  Matrix mttkrp(int mode, const Matrix& a, const Matrix& b, const Matrix& c) const;
  double residual_sq(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& m3) const;

 private:
  const CsiTensor& x_;
  double norm_sq_;
};

template <typename Source>
FactorSet<typename Source::Matrix::Scalar> als_single_start(const Source& src, Index rank,
                                                           const CpAlsOptions& opts,
                                                           std::uint64_t seed) {
  using Scalar = typename Source::Matrix::Scalar;
  using Matrix = MatrixX<Scalar>;
  const Scalar norm = std::sqrt(src.squared_norm());

  FactorSet<Scalar> fs;
  std::mt19937_64 gen(seed);
  std::normal_distribution<Scalar> gauss(0, 1);
  fs.A = Matrix::NullaryExpr(src.dim(1), rank, [&] { return gauss(gen); });
  fs.B = Matrix::NullaryExpr(src.dim(2), rank, [&] { return gauss(gen); });
  fs.C = Matrix::Zero(src.dim(3), rank);
  if (norm == Scalar(0)) {
    fs.A.setZero();
    fs.fit_history.push_back(0);
    fs.converged = true;
    return fs;
  }
  // C starts from its least-squares fit to A, B: no random draw along mode 3.
  Matrix m3 = src.mttkrp(3, fs.A, fs.B, fs.C);
  fs.C = m3 * pinv(hadamard(fs.B.transpose() * fs.B, fs.A.transpose() * fs.A));

  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    fs.A = src.mttkrp(1, fs.A, fs.B, fs.C) *
           pinv(hadamard(fs.C.transpose() * fs.C, fs.B.transpose() * fs.B));
    fs.B = src.mttkrp(2, fs.A, fs.B, fs.C) *
           pinv(hadamard(fs.C.transpose() * fs.C, fs.A.transpose() * fs.A));
    m3 = src.mttkrp(3, fs.A, fs.B, fs.C);
    fs.C = m3 * pinv(hadamard(fs.B.transpose() * fs.B, fs.A.transpose() * fs.A));

    const Scalar err = std::sqrt(std::max(Scalar(0), src.residual_sq(fs.A, fs.B, fs.C, m3))) / norm;
    fs.sweeps = sweep;
    const bool settled = !fs.fit_history.empty() && std::abs(fs.fit_history.back() - err) < opts.tol;
    fs.fit_history.push_back(err);
    if (settled) {
      fs.converged = true;
      break;
    }
  }
  return fs;
}

/// Unit columns in B and C with the scale moved into A; each column of B and
/// then C flipped (with A) so its largest-magnitude entry is positive;
/// components sorted by descending norm of A.
template <typename Scalar>
void canonicalize(FactorSet<Scalar>& fs) {
  const Index F = fs.rank();
  for (Index f = 0; f < F; ++f) {
    for (auto* m : {&fs.B, &fs.C}) {
      const Scalar n = m->col(f).norm();
      if (n > Scalar(0)) {
        m->col(f) /= n;
        fs.A.col(f) *= n;
      }
      Index arg = 0;
      m->col(f).cwiseAbs().maxCoeff(&arg);
      if ((*m)(arg, f) < Scalar(0)) {
        m->col(f) = -m->col(f);
        fs.A.col(f) = -fs.A.col(f);
      }
    }
  }
  std::vector<Index> order(static_cast<std::size_t>(F));
  std::iota(order.begin(), order.end(), Index(0));
  const VectorX<Scalar> norms = fs.A.colwise().norm().transpose();
  std::stable_sort(order.begin(), order.end(),
                   [&](Index l, Index r) { return norms[l] > norms[r]; });
  MatrixX<Scalar> a(fs.A.rows(), F), b(fs.B.rows(), F), c(fs.C.rows(), F);
  for (Index f = 0; f < F; ++f) {
    a.col(f) = fs.A.col(order[std::size_t(f)]);
    b.col(f) = fs.B.col(order[std::size_t(f)]);
    c.col(f) = fs.C.col(order[std::size_t(f)]);
  }
  fs.A = std::move(a);
  fs.B = std::move(b);
  fs.C = std::move(c);
}

template <typename Source>
FactorSet<typename Source::Matrix::Scalar> als(const Source& src, Index rank,
                                              const CpAlsOptions& opts) {
  if (rank < 1) throw Error("cp_als: rank must be >= 1");
  if (opts.max_sweeps < 1) throw Error("cp_als: max_sweeps must be >= 1");
  if (!(opts.tol > 0.0)) throw Error("cp_als: tol must be positive");
  if (opts.restarts < 1) throw Error("cp_als: restarts must be >= 1");
  const Index I = src.dim(1), J = src.dim(2), K = src.dim(3);
  if (rank > std::min({I * J, J * K, I * K}))
    throw Error("cp_als: rank " + std::to_string(rank) + " exceeds min(IJ, JK, IK)");

  auto best = als_single_start(src, rank, opts, als_restart_seed(opts.seed, 0));
  for (int r = 1; r < opts.restarts; ++r) {
    auto candidate = als_single_start(src, rank, opts, als_restart_seed(opts.seed, r));
    if (candidate.final_error() < best.final_error()) best = std::move(candidate);
  }
  canonicalize(best);
  return best;
}

}  // namespace detail

/// Rank-F CP decomposition of a dense tensor.
template <typename Scalar>
FactorSet<Scalar> cp_als(const Tensor3<Scalar>& tensor, Index rank, const CpAlsOptions& opts = {}) {
  if (!tensor.allFinite()) throw Error("cp_als: tensor has non-finite entries");
  return detail::als(detail::DenseAlsSource<Scalar>(tensor), rank, opts);
}

/// Rank-F CP decomposition of the Hankel CSI tensor.
FactorSet<double> cp_als(const CsiTensor& tensor, Index rank, const CpAlsOptions& opts = {});

/// Largest k such that every k-column subset has full column rank, with
/// rank tested at rel_tol * sigma_max of each subset. At most 12 columns:
/// the check visits all 2^F subsets.
template <typename Derived>
int k_rank(const Eigen::MatrixBase<Derived>& m, double rel_tol = 1e-10) {
  using Scalar = typename Derived::Scalar;
  const Index F = m.cols();
  if (F > 12) throw Error("k_rank: at most 12 columns supported");
  if (F == 0) return 0;
  // Column subsets of M and of R (M = QR) share singular values.
  MatrixX<Scalar> r;
  if (m.rows() > F) {
    Eigen::HouseholderQR<MatrixX<Scalar>> qr(m);
    r = qr.matrixQR().topRows(F).template triangularView<Eigen::Upper>();
  } else {
    r = m;
  }
  auto full_rank = [&](std::uint32_t mask, int k) {
    MatrixX<Scalar> sub(r.rows(), k);
    int c = 0;
    for (Index f = 0; f < F; ++f)
      if (mask & (1u << f)) sub.col(c++) = r.col(f);
    if (sub.rows() < k) return false;
    Eigen::JacobiSVD<MatrixX<Scalar>> svd(sub);
    const auto& s = svd.singularValues();
    if (!(s[0] > Scalar(0))) return false;
    return s[k - 1] > Scalar(rel_tol) * s[0];
  };
  for (int k = 1; k <= int(F); ++k) {
    for (std::uint32_t mask = 1; mask < (1u << F); ++mask) {
      if (std::popcount(mask) != k) continue;
      if (!full_rank(mask, k)) return k - 1;
    }
  }
  return int(F);
}

struct KruskalResult {
  int k_A = 0;
  int k_B = 0;
  int k_C = 0;
  bool unique = false;  // k_A + k_B + k_C >= 2F + 2
};

template <typename Scalar>
KruskalResult kruskal_check(const FactorSet<Scalar>& factors) {
  KruskalResult res;
  res.k_A = k_rank(factors.A);
  res.k_B = k_rank(factors.B);
  res.k_C = k_rank(factors.C);
  res.unique = res.k_A + res.k_B + res.k_C >= 2 * int(factors.rank()) + 2;
  return res;
}

}  // namespace tensorbeat
