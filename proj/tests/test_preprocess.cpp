#include <doctest.h>

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "tensorbeat/error.hpp"
#include "tensorbeat/experiment.hpp"
#include "tensorbeat/preprocess.hpp"
#include "test_support.hpp"

using namespace tensorbeat;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd cosine(Index n, double period, double amplitude = 1.0, double phase = 0.0) {
  VectorXd x(n);
  for (Index t = 0; t < n; ++t) x[t] = amplitude * std::cos(2.0 * std::numbers::pi * t / period + phase);
  return x;
}

std::vector<double> magnitude_spectrum(const VectorXd& x) {
  Eigen::FFT<double> fft;
  std::vector<double> in(x.data(), x.data() + x.size());
  std::vector<std::complex<double>> out;
  fft.fwd(out, in);
  std::vector<double> mag;
  for (std::size_t b = 0; b <= in.size() / 2; ++b) mag.push_back(std::abs(out[b]));
  return mag;
}

}  // namespace

TEST_CASE("hampel_filter") {
  const VectorXd flat = VectorXd::Constant(20, 2.5);
  CHECK(hampel_filter(flat, 3, 0.01) == flat);

  VectorXd spike(7);
  spike << 0, 0, 0, 10, 0, 0, 0;
  CHECK(hampel_filter(spike, 3, 0.01) == VectorXd::Zero(7));

  const VectorXd wave = cosine(200, 37.0);
  CHECK(hampel_filter(wave, 5, 1e9) == wave);

  CHECK_THROWS_AS(hampel_filter(VectorXd::Zero(6), 3, 0.01), Error);
  CHECK_THROWS_AS(hampel_filter(VectorXd::Zero(20), 0, 0.01), Error);
  CHECK_THROWS_AS(hampel_filter(VectorXd::Zero(20), 3, -1.0), Error);
}

TEST_CASE("hampel_filter truncates windows at the ends") {
  VectorXd x(9);
  x << 50, 1, 2, 3, 4, 5, 6, 7, -40;
  const VectorXd y = hampel_filter(x, 2, 3.0);
  CHECK(y[0] == 2.0);   // median of {50, 1, 2}
  CHECK(y[8] == 6.0);   // median of {6, 7, -40}
  CHECK(y.segment(1, 7) == x.segment(1, 7));
}

TEST_CASE("calibrate removes offsets and trends") {
  const VectorXd wave = cosine(599, 100.0, 0.3);
  const VectorXd out = calibrate(wave.array() + 40.0);
  CHECK((out - calibrate(wave)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(std::abs(out.mean()) < 0.01 * 0.3);

  CHECK(calibrate(VectorXd::Zero(599)) == VectorXd::Zero(599));
  CHECK_THROWS_AS(calibrate(VectorXd::Zero(150)), Error);

  SceneConfig scene;
  scene.persons = {{12.0, 0.5, 0.3}, {21.0, 1.5, 0.3}};
  scene.duration_packets = 600;
  scene.seed = 8;
  const auto trace = synth_phase_difference_matrix(scene);
  const VectorXd raw = trace.matrix.data.col(3);
  const auto before = magnitude_spectrum(raw);
  const auto after = magnitude_spectrum(calibrate(raw));
  CHECK(20.0 * std::log10(before[0] / after[0]) >= 20.0);
  // Dominant in-band bins are the breathing rates (2 bpm bins: 12 -> 6, 21 -> 10.5).
  std::vector<std::size_t> order(after.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return after[a] > after[b]; });
  CHECK(order[0] == 6);
  CHECK((order[1] == 10 || order[1] == 11));
}

TEST_CASE("calibration params scale with sampling rate") {
  const auto p20 = CalibrationParams::for_sampling_rate(20.0);
  CHECK(p20.trend_half_window == 75);
  CHECK(p20.denoise_half_window == 3);
  const auto p5 = CalibrationParams::for_sampling_rate(5.0);
  CHECK(p5.trend_half_window == 19);
  CHECK(p5.denoise_half_window == 1);
  CHECK(p5.trend_threshold == p20.trend_threshold);
}

TEST_CASE("hankelize") {
  VectorXd h(5);
  h << 0, 1, 2, 3, 4;
  MatrixXd expect(3, 3);
  expect << 0, 1, 2, 1, 2, 3, 2, 3, 4;
  const auto m = hankelize(h, 3, 3, 7);
  CHECK(m.data == expect);
  CHECK(m.source_subcarrier == 7);
  CHECK_THROWS_AS(hankelize(h, 3, 2), Error);

  const auto big = hankelize(cosine(599, 80.0), 300, 300);
  CHECK(big.data.rows() == 300);
  const VectorXd sv = Eigen::BDCSVD<MatrixXd>(big.data).singularValues();
  CHECK(sv[2] / sv[0] < 1e-8);
  CHECK(sv[1] / sv[0] > 1e-3);
}

TEST_CASE("hankelize is linear") {
  std::mt19937_64 gen(5);
  const VectorXd x = test_support::gaussian(gen, 21, 1), y = test_support::gaussian(gen, 21, 1);
  const double a = 0.75, b = -2.0;
  CHECK(hankelize(a * x + b * y, 11, 11).data == a * hankelize(x, 11, 11).data + b * hankelize(y, 11, 11).data);
}

TEST_CASE("build_csi_tensor") {
  SceneConfig scene;
  scene.persons = {{15.0}};
  scene.noise_std_rad = 0.05;
  const auto trace = synth_phase_difference_matrix(scene);
  const CsiTensor t = build_csi_tensor(trace.matrix);
  CHECK(t.rows() == 300);
  CHECK(t.cols() == 300);
  CHECK(t.slices() == 60);
  for (Index k : {Index(0), Index(59)}) {
    const MatrixXd s = t.slice(k).data;
    for (Index i = 1; i < 300; i += 37)
      for (Index j = 0; j + 1 < 300; j += 41) CHECK(s(i, j) == s(i - 1, j + 1));
    CHECK(s.col(0) == calibrate(trace.matrix.data.col(k)).head(300));
  }

  PhaseDifferenceMatrix even;
  even.data = trace.matrix.data.topRows(598);
  const CsiTensor te = build_csi_tensor(even);
  CHECK(te.rows() == 299);
  CHECK(te.series().rows() == 597);

  PhaseDifferenceMatrix single;
  single.data = trace.matrix.data.leftCols(1);
  CHECK_THROWS_AS(build_csi_tensor(single), Error);
}

TEST_CASE("CsiTensor dense view agrees with element access") {
  MatrixXd series(5, 2);
  series << 1, 10, 2, 20, 3, 30, 4, 40, 5, 50;
  const CsiTensor t(series, 3);
  const Tensor3d d = t.to_dense();
  CHECK(d.rows() == 3);
  CHECK(d.cols() == 3);
  CHECK(d(2, 2, 1) == 50.0);
  CHECK(d(1, 0, 0) == 2.0);
  CHECK(t.squared_norm() == doctest::Approx(d.vec().squaredNorm()));
}

TEST_CASE("estimate_component_count") {
  SceneConfig scene;
  scene.dc_trend = TrendSpec::none();
  scene.seed = 2;
  scene.persons = {{15.0}};
  CHECK(estimate_component_count(hankel_tensor(clean_breathing_signal(scene)), 0.99).count == 2);
  scene.persons = {{12.0, 0.0}, {17.0, 1.0}, {25.0, 2.0}};
  const auto three = estimate_component_count(hankel_tensor(clean_breathing_signal(scene)), 0.99);
  CHECK(three.count == 6);
  CHECK_FALSE(three.low_confidence);

  std::mt19937_64 gen(3);
  const auto noise = estimate_component_count(hankel_tensor(test_support::gaussian(gen, 599, 60)), 0.5);
  CHECK(noise.count >= 2);
  CHECK(noise.count % 2 == 0);
  const auto& sv = noise.singular_values;
  CHECK(noise.gap_ratio == doctest::Approx(sv[noise.count] / sv[noise.count - 1]));
  CHECK(noise.low_confidence == (noise.gap_ratio > 0.9));

  CHECK_THROWS_AS(estimate_component_count(hankel_tensor(clean_breathing_signal(scene)), 1.0), Error);
}

TEST_CASE("tensor binary dump round trip") {
  Tensor3d t(3, 2, 2);
  for (Index i = 0; i < t.size(); ++i) t.vec()[i] = 0.5 * double(i) - 1.0;
  std::stringstream io;
  write_tensor_binary(io, t);
  CHECK(io.str().size() == 4 + 3 * 8 + 12 * 8);
  CHECK(io.str().substr(0, 4) == "TB3D");
  const Tensor3d back = read_tensor_binary(io);
  CHECK(back.rows() == 3);
  CHECK(back.vec() == t.vec());

  std::istringstream bad("XXXX");
  CHECK_THROWS_AS(read_tensor_binary(bad), Error);
}
