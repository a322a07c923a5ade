#include "tensorbeat/cpd.hpp"

#include "rng.hpp"

namespace tensorbeat {

namespace detail {

std::uint64_t als_restart_seed(std::uint64_t seed, int restart) {
  return splitmix64(seed ^ splitmix64(kAlsInitStream)) + std::uint64_t(restart);
}

HankelAlsSource::HankelAlsSource(const CsiTensor& x) : x_(x), norm_sq_(x.squared_norm()) {}

// X(i, j, k) = S(i + j, k), S the N x K series matrix.
//   mode 1: M(i, f) = sum_j G(i + j, f) B(j, f),  G = S C
//   mode 2: M(j, f) = sum_i G(i + j, f) A(i, f),  G = S C
//   mode 3: M(k, f) = sum_n S(n, k) D(n, f),      D(:, f) = conv(A(:, f), B(:, f))
HankelAlsSource::Matrix HankelAlsSource::mttkrp(int mode, const Matrix& a, const Matrix& b,
                                                const Matrix& c) const {
  const Index I = x_.rows(), J = x_.cols();
  const Eigen::MatrixXd& s = x_.series();
  const Index F = a.cols();
  if (mode == 1 || mode == 2) {
    const Eigen::MatrixXd g = s * c;
    const Matrix& w = mode == 1 ? b : a;
    const Index out_len = mode == 1 ? I : J;
    Matrix m = Matrix::Zero(out_len, F);
    for (Index f = 0; f < F; ++f)
      for (Index t = 0; t < w.rows(); ++t) m.col(f).noalias() += w(t, f) * g.col(f).segment(t, out_len);
    return m;
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(s.rows(), F);
  for (Index f = 0; f < F; ++f)
    for (Index i = 0; i < I; ++i) d.col(f).segment(i, J).noalias() += a(i, f) * b.col(f);
  return s.transpose() * d;
}

double HankelAlsSource::residual_sq(const Matrix& a, const Matrix& b, const Matrix& c,
                                    const Matrix& m3) const {
  const double inner = c.cwiseProduct(m3).sum();
  const double model_sq =
      ((a.transpose() * a).cwiseProduct(b.transpose() * b).cwiseProduct(c.transpose() * c)).sum();
  return norm_sq_ - 2.0 * inner + model_sq;
}

}  // namespace detail

FactorSet<double> cp_als(const CsiTensor& tensor, Index rank, const CpAlsOptions& opts) {
  if (!tensor.allFinite()) throw Error("cp_als: tensor has non-finite entries");
  return detail::als(detail::HankelAlsSource(tensor), rank, opts);
}

}  // namespace tensorbeat
