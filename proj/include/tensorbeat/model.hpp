#pragma once

// Domain types and the synthetic multi-person breathing scene.
//
// The generator stands in for the WiFi link: each subcarrier observes a
// positive mixture of the persons' breathing cosines, plus an optional slow
// DC trend and i.i.d. Gaussian noise. Everything is a pure function of the
// SceneConfig, seed included.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <span>
#include <vector>

namespace tensorbeat {

struct PersonSource {
  double rate_bpm = 15.0;
  double phase_rad = 0.0;
  double amplitude = 0.3;

  /// w = 2 pi f / 60 in rad/s for f in breaths per minute.
  double angular_freq() const noexcept { return 2.0 * std::numbers::pi * rate_bpm / 60.0; }
};

enum class TrendKind { kNone, kLinear, kSinusoid };

/// Slow baseline drift added to every subcarrier.
///
/// For kSinusoid, a nonpositive amplitude or period selects the scene default:
/// period 10x the longest breathing period, amplitude 5x the largest breathing
/// amplitude.
struct TrendSpec {
  TrendKind kind = TrendKind::kSinusoid;
  double slope_rad_per_packet = 0.0;
  double amplitude_rad = 0.0;
  double period_s = 0.0;

  static TrendSpec none() { return {TrendKind::kNone}; }
  static TrendSpec linear(double slope) { return {TrendKind::kLinear, slope}; }
  static TrendSpec sinusoid(double amplitude = 0.0, double period_s = 0.0) {
    return {TrendKind::kSinusoid, 0.0, amplitude, period_s};
  }
};

struct SceneConfig {
  std::vector<PersonSource> persons;
  double sampling_rate_hz = 20.0;
  int duration_packets = 599;
  int subcarriers = 60;
  double noise_std_rad = 0.0;
  TrendSpec dc_trend;
  std::uint64_t seed = 0;

  /// Throws tensorbeat::Error naming the offending field.
  void validate() const;
};

/// Calibrated observable: packets x subcarriers, radians.
struct PhaseDifferenceMatrix {
  Eigen::MatrixXd data;
  double sampling_rate_hz = 20.0;

  Eigen::Index packets() const noexcept { return data.rows(); }
  Eigen::Index subcarriers() const noexcept { return data.cols(); }
  double window_seconds() const noexcept { return double(packets()) / sampling_rate_hz; }

  void validate() const;
};

/// Raw per-antenna phases of one subcarrier.
///
/// phase_a = true_phase_a + (lambda_p + lambda_s) * m + lambda_c + beta_a + noise_a
/// phase_b = true_phase_b + (lambda_p + lambda_s) * m + lambda_c + beta_b + noise_b
/// with the lambda terms shared per packet by both antennas. Values are left
/// unwrapped so the cancellation in phase_a - phase_b is exact.
struct RawPhasePair {
  Eigen::VectorXd phase_a;
  Eigen::VectorXd phase_b;

  Eigen::VectorXd true_phase_a;
  Eigen::VectorXd true_phase_b;
  Eigen::VectorXd lambda_p;
  Eigen::VectorXd lambda_s;
  Eigen::VectorXd lambda_c;
  Eigen::VectorXd noise_a;
  Eigen::VectorXd noise_b;
  double beta_a = 0.0;
  double beta_b = 0.0;
  int subcarrier_offset = 0;  // m_i

  Eigen::VectorXd difference() const { return phase_a - phase_b; }
};

struct SyntheticTrace {
  PhaseDifferenceMatrix matrix;
  std::vector<double> truth_bpm;  // ascending
  Eigen::MatrixXd mixing;         // persons x subcarriers, K_{i,r}
  Eigen::VectorXd trend;          // per packet, shared by all subcarriers
};

RawPhasePair synth_raw_phase_pair(const SceneConfig& cfg, int subcarrier_index);

SyntheticTrace synth_phase_difference_matrix(const SceneConfig& cfg);

/// Noise-free, trend-free breathing mixture (packets x subcarriers).
Eigen::MatrixXd clean_breathing_signal(const SceneConfig& cfg);

/// Mean per-subcarrier power of the breathing mixture.
double breathing_signal_power(const SceneConfig& cfg);

/// noise_std_rad giving signal power / noise variance = snr_db.
double noise_std_for_snr(const SceneConfig& cfg, double snr_db);

/// Circular standard deviation sqrt(-2 ln R) of a set of angles.
double circular_std(std::span<const double> angles_rad);

// Trace CSV: header `packet,sc_0,...,sc_{K-1}`, one row per packet.
void write_trace_csv(std::ostream& out, const PhaseDifferenceMatrix& m);
PhaseDifferenceMatrix read_trace_csv(std::istream& in, double sampling_rate_hz);

// Flat `key = value` scene file. Keys match the SceneConfig field names.
void write_scene_config(std::ostream& out, const SceneConfig& cfg);
SceneConfig read_scene_config(std::istream& in);

}  // namespace tensorbeat
