#pragma once

// Calibration (detrend + denoise with Hampel filters) and Hankel embedding of
// the phase-difference series into the third-order CSI tensor.

#include <Eigen/Dense>

#include <iosfwd>

#include "tensorbeat/model.hpp"
#include "tensorbeat/tensor.hpp"

namespace tensorbeat {

/// Sample t is replaced by the median of its window whenever
/// |x_t - median| > threshold * 1.4826 * MAD. Windows are [t - h, t + h]
/// truncated at the series ends.
Eigen::VectorXd hampel_filter(const Eigen::Ref<const Eigen::VectorXd>& series, int half_window,
                              double threshold);

/// Window parameters of the two Hampel passes in calibrate().
struct CalibrationParams {
  int trend_half_window = 75;  // 151-sample window at 20 Hz
  double trend_threshold = 0.001;
  int denoise_half_window = 3;
  double denoise_threshold = 0.01;

  /// Same window durations in seconds as the 20 Hz defaults.
  static CalibrationParams for_sampling_rate(double sampling_rate_hz);
};

/// trend = hampel(x, 75, 0.001); result = hampel(x - trend, 3, 0.01).
Eigen::VectorXd calibrate(const Eigen::Ref<const Eigen::VectorXd>& series,
                          const CalibrationParams& params = {});

struct HankelMatrix {
  Eigen::MatrixXd data;  // data(i, j) = h(i + j)
  int source_subcarrier = 0;
};

HankelMatrix hankelize(const Eigen::Ref<const Eigen::VectorXd>& series, Index rows, Index cols,
                       int source_subcarrier = 0);

/// I x J x K tensor whose frontal slice k is the Hankel matrix of the k-th
/// calibrated series. Stored as the generating series (N x K, N = I + J - 1)
/// so that every slice is Hankel by construction; to_dense() materialises it.
class CsiTensor {
 public:
  CsiTensor() = default;
  CsiTensor(Eigen::MatrixXd series, Index rows);

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return series_.rows() - rows_ + 1; }
  Index slices() const noexcept { return series_.cols(); }
  Index dim(int mode) const;

  double operator()(Index i, Index j, Index k) const { return series_(i + j, k); }

  /// Calibrated series, one column per subcarrier.
  const Eigen::MatrixXd& series() const noexcept { return series_; }

  HankelMatrix slice(Index k) const;
  Tensor3d to_dense() const;

  double squared_norm() const;
  bool allFinite() const { return series_.allFinite(); }

 private:
  Eigen::MatrixXd series_;
  Index rows_ = 0;
};

/// Calibrates each column and stacks the Hankel slices with I = J = (N+1)/2.
/// An even packet count drops the final packet first.
CsiTensor build_csi_tensor(const PhaseDifferenceMatrix& matrix,
                           const CalibrationParams& params = {});

/// Embeds already-calibrated series (N x K) without further processing.
CsiTensor hankel_tensor(const Eigen::Ref<const Eigen::MatrixXd>& series);

struct ComponentEstimate {
  int count = 2;                  // 2R
  bool low_confidence = false;    // sigma_{2R+1} / sigma_{2R} > 0.9
  double gap_ratio = 0.0;
  Eigen::VectorXd singular_values;
};

/// Smallest even 2R >= 2 whose leading singular values of the mean frontal
/// slice hold at least energy_threshold of the squared spectrum.
ComponentEstimate estimate_component_count(const CsiTensor& tensor, double energy_threshold);

// Debug dump: magic "TB3D", three little-endian int64 dims (I, J, K), then
// I*J*K little-endian float64 values in row-major (i, j, k) order.
void write_tensor_binary(std::ostream& out, const Tensor3d& tensor);
Tensor3d read_tensor_binary(std::istream& in);

}  // namespace tensorbeat
