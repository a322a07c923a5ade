#include "tensorbeat/preprocess.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "tensorbeat/error.hpp"

namespace tensorbeat {

namespace {

constexpr double kMadScale = 1.4826;

// Median of buf[0, n); reorders buf.
double median_inplace(std::vector<double>& buf, std::size_t n) {
  const auto mid = buf.begin() + std::ptrdiff_t(n / 2);
  std::nth_element(buf.begin(), mid, buf.begin() + std::ptrdiff_t(n));
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(buf.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

Eigen::VectorXd hampel_filter(const Eigen::Ref<const Eigen::VectorXd>& series, int half_window,
                              double threshold) {
  if (half_window < 1) throw Error("hampel_filter: half_window must be >= 1");
  if (!(threshold >= 0.0)) throw Error("hampel_filter: threshold must be >= 0");
  const Index n = series.size();
  if (n <= 2 * Index(half_window))
    throw Error("hampel_filter: series of length " + std::to_string(n) +
                " is too short for half window " + std::to_string(half_window));

  Eigen::VectorXd out = series;
  std::vector<double> window(std::size_t(2 * half_window + 1));
  for (Index t = 0; t < n; ++t) {
    const Index lo = std::max<Index>(0, t - half_window);
    const Index hi = std::min<Index>(n - 1, t + half_window);
    const auto len = std::size_t(hi - lo + 1);
    std::copy(series.data() + lo, series.data() + hi + 1, window.begin());
    const double med = median_inplace(window, len);
    for (std::size_t m = 0; m < len; ++m) window[m] = std::abs(series[lo + Index(m)] - med);
    const double mad = median_inplace(window, len);
    if (std::abs(series[t] - med) > threshold * kMadScale * mad) out[t] = med;
  }
  return out;
}

CalibrationParams CalibrationParams::for_sampling_rate(double sampling_rate_hz) {
  if (!(sampling_rate_hz > 0.0)) throw Error("calibration: sampling rate must be positive");
  CalibrationParams p;
  const double scale = sampling_rate_hz / 20.0;
  p.trend_half_window = std::max(1, int(std::lround(75.0 * scale)));
  p.denoise_half_window = std::max(1, int(std::lround(3.0 * scale)));
  return p;
}

Eigen::VectorXd calibrate(const Eigen::Ref<const Eigen::VectorXd>& series,
                          const CalibrationParams& params) {
  const Eigen::VectorXd trend =
      hampel_filter(series, params.trend_half_window, params.trend_threshold);
  const Eigen::VectorXd detrended = series - trend;
  return hampel_filter(detrended, params.denoise_half_window, params.denoise_threshold);
}

HankelMatrix hankelize(const Eigen::Ref<const Eigen::VectorXd>& series, Index rows, Index cols,
                       int source_subcarrier) {
  if (rows < 1 || cols < 1 || rows + cols - 1 != series.size())
    throw Error("hankelize: need I + J - 1 = N, got I=" + std::to_string(rows) +
                " J=" + std::to_string(cols) + " N=" + std::to_string(series.size()));
  HankelMatrix h;
  h.source_subcarrier = source_subcarrier;
  h.data.resize(rows, cols);
  for (Index j = 0; j < cols; ++j) h.data.col(j) = series.segment(j, rows);
  return h;
}

CsiTensor::CsiTensor(Eigen::MatrixXd series, Index rows) : series_(std::move(series)), rows_(rows) {
  if (rows_ < 1 || rows_ > series_.rows())
    throw Error("CsiTensor: row count must lie in [1, N]");
}

Index CsiTensor::dim(int mode) const {
  switch (mode) {
    case 1: return rows();
    case 2: return cols();
    case 3: return slices();
    default: throw Error("CsiTensor: mode must be 1, 2 or 3");
  }
}

HankelMatrix CsiTensor::slice(Index k) const {
  return hankelize(series_.col(k), rows(), cols(), int(k));
}

Tensor3d CsiTensor::to_dense() const {
  Tensor3d t(rows(), cols(), slices());
  for (Index k = 0; k < slices(); ++k)
    for (Index j = 0; j < cols(); ++j) t.slice(k).col(j) = series_.col(k).segment(j, rows());
  return t;
}

double CsiTensor::squared_norm() const {
  // h(n) appears once for every (i, j) with i + j = n.
  const Index I = rows(), J = cols();
  double total = 0.0;
  for (Index n = 0; n < series_.rows(); ++n) {
    const Index multiplicity = std::min({n + 1, I, J, I + J - 1 - n});
    total += double(multiplicity) * series_.row(n).squaredNorm();
  }
  return total;
}

CsiTensor hankel_tensor(const Eigen::Ref<const Eigen::MatrixXd>& series) {
  if (series.cols() < 2) throw Error("csi tensor: need at least 2 subcarriers");
  Index n = series.rows();
  if (n % 2 == 0) --n;
  if (n < 3) throw Error("csi tensor: need at least 3 packets");
  return CsiTensor(series.topRows(n), (n + 1) / 2);
}

CsiTensor build_csi_tensor(const PhaseDifferenceMatrix& matrix, const CalibrationParams& params) {
  if (matrix.subcarriers() < 2) throw Error("build_csi_tensor: need at least 2 subcarriers");
  matrix.validate();
  Index n = matrix.packets();
  if (n % 2 == 0) --n;
  Eigen::MatrixXd calibrated(n, matrix.subcarriers());
  for (Index k = 0; k < matrix.subcarriers(); ++k)
    calibrated.col(k) = calibrate(matrix.data.col(k).head(n), params);
  return CsiTensor(std::move(calibrated), (n + 1) / 2);
}

ComponentEstimate estimate_component_count(const CsiTensor& tensor, double energy_threshold) {
  if (!(energy_threshold > 0.0 && energy_threshold < 1.0))
    throw Error("estimate_component_count: threshold must lie in (0, 1)");
  const Eigen::VectorXd mean_series = tensor.series().rowwise().mean();
  const Eigen::MatrixXd mean_slice = hankelize(mean_series, tensor.rows(), tensor.cols()).data;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(mean_slice);

  ComponentEstimate est;
  est.singular_values = svd.singularValues();
  const Eigen::VectorXd energy = est.singular_values.array().square();
  const double total = energy.sum();
  const Index n_sv = energy.size();
  if (total <= 0.0) {
    est.count = 2;
    est.low_confidence = true;
    est.gap_ratio = 1.0;
    return est;
  }
  Index count = 2;
  double captured = energy.head(std::min<Index>(2, n_sv)).sum();
  while (captured < energy_threshold * total && count + 2 <= n_sv) {
    captured += energy[count] + energy[count + 1];
    count += 2;
  }
  est.count = int(count);
  const double sigma_last = est.singular_values[std::min(count, n_sv) - 1];
  const double sigma_next = count < n_sv ? est.singular_values[count] : 0.0;
  est.gap_ratio = sigma_last > 0.0 ? sigma_next / sigma_last : 1.0;
  est.low_confidence = est.gap_ratio > 0.9;
  return est;
}

void write_tensor_binary(std::ostream& out, const Tensor3d& tensor) {
  static_assert(std::endian::native == std::endian::little, "binary dump assumes little endian");
  out.write("TB3D", 4);
  const std::int64_t dims[3] = {tensor.rows(), tensor.cols(), tensor.slices()};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  for (Index i = 0; i < tensor.rows(); ++i)
    for (Index j = 0; j < tensor.cols(); ++j)
      for (Index k = 0; k < tensor.slices(); ++k) {
        const double v = tensor(i, j, k);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
  if (!out) throw Error("write_tensor_binary: write failed");
}

Tensor3d read_tensor_binary(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "TB3D", 4) != 0) throw Error("read_tensor_binary: bad magic");
  std::int64_t dims[3] = {};
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in || dims[0] < 0 || dims[1] < 0 || dims[2] < 0)
    throw Error("read_tensor_binary: bad header");
  Tensor3d t(dims[0], dims[1], dims[2]);
  for (Index i = 0; i < t.rows(); ++i)
    for (Index j = 0; j < t.cols(); ++j)
      for (Index k = 0; k < t.slices(); ++k) {
        double v = 0.0;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        t(i, j, k) = v;
      }
  if (!in) throw Error("read_tensor_binary: truncated data");
  return t;
}

}  // namespace tensorbeat
