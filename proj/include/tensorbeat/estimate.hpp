#pragma once

// Per-person breathing rates from matched CP components, the FFT baseline,
// scoring against ground truth, and the end-to-end pipeline.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tensorbeat/cpd.hpp"
#include "tensorbeat/matching.hpp"
#include "tensorbeat/model.hpp"
#include "tensorbeat/preprocess.hpp"

namespace tensorbeat {

/// Success threshold on the largest per-person error.
inline constexpr double kSuccessThresholdBpm = 2.0;

Eigen::VectorXd fuse_pair(const Eigen::Ref<const Eigen::VectorXd>& s1,
                          const Eigen::Ref<const Eigen::VectorXd>& s2);

/// Returns (s1, s2) with s2 negated when <s1, s2> < 0.
std::pair<Eigen::VectorXd, Eigen::VectorXd> align_sign(const Eigen::Ref<const Eigen::VectorXd>& s1,
                                                       const Eigen::Ref<const Eigen::VectorXd>& s2);

/// Index t is a peak when series[t] is the maximum of [t-3, t+3], strictly
/// above the left neighbours (so a plateau reports its leftmost sample).
/// The first and last three samples are never peaks.
std::vector<Eigen::Index> detect_peaks(const Eigen::Ref<const Eigen::VectorXd>& series);

/// 60 / T with T the median peak-to-peak interval in seconds. Peaks before
/// autocorr_offset (the negative-lag half of an autocorrelation) are ignored.
/// Throws RateUndetectable with fewer than two usable peaks.
double breathing_rate(const std::vector<Eigen::Index>& peaks, double sampling_rate_hz,
                      Eigen::Index autocorr_offset = 0);

/// Rate of a periodic trace by autocorrelation peak spacing.
double autocorrelation_rate(const Eigen::Ref<const Eigen::VectorXd>& series, double sampling_rate_hz);

struct SpectralPeak {
  double rate_bpm = 0.0;
  double magnitude = 0.0;
};

struct FftBaselineOptions {
  double min_bpm = 6.0;
  double max_bpm = 60.0;
  /// Local maxima weaker than this fraction of the strongest in-band bin are
  /// not counted as resolvable.
  double min_relative_magnitude = 0.25;
  /// Hann taper before the transform; keeps leakage sidelobes from posing as
  /// extra rates. Maxima within two bins of a stronger one are then merged.
  bool hann_window = true;
};

/// Magnitude spectrum of the mean calibrated subcarrier; in-band local
/// maxima, strongest first. Bin spacing is sampling_rate / N.
std::vector<SpectralPeak> fft_spectral_peaks(const PhaseDifferenceMatrix& matrix,
                                             const FftBaselineOptions& opts = {});
std::vector<double> fft_baseline(const PhaseDifferenceMatrix& matrix,
                                 const FftBaselineOptions& opts = {});

struct Evaluation {
  std::vector<double> errors_bpm;  // |sorted estimate - sorted truth|
  bool success = false;            // max error < 2 bpm
};

Evaluation evaluate(std::vector<double> estimated, std::vector<double> truth);

struct PipelineOptions {
  std::optional<int> persons;  // R; empty selects estimate_component_count
  double auto_energy_threshold = 0.99;
  CpAlsOptions als{500, 1e-8, 0, 1};
  /// Defaults to CalibrationParams::for_sampling_rate(fs) when unset.
  std::optional<CalibrationParams> calibration;
  int downsample_factor = 10;
  /// sigma_{2R} over the median singular value of the mean slice below which
  /// the R-person subspace is not distinguishable from the noise floor.
  double min_floor_ratio = 25.0;
};

struct PersonEstimate {
  std::pair<int, int> components{0, 0};
  std::optional<double> rate_bpm;
};

struct BreathingReport {
  std::vector<double> rates_bpm;  // detected persons, ascending
  std::optional<std::vector<double>> errors_bpm;
  std::optional<bool> success;

  struct Diagnostics {
    int persons = 0;
    int components = 0;
    bool auto_persons = false;
    double gap_ratio = 0.0;    // sigma_{2R+1} / sigma_{2R}
    double floor_ratio = 0.0;  // sigma_{2R} / median sigma
    bool low_confidence = false;
    std::vector<double> fit_history_tail;
    double final_error = 0.0;
    int sweeps = 0;
    bool converged = false;
    KruskalResult kruskal;
    MatchStability stability = MatchStability::kStable;
    std::vector<PersonEstimate> people;
    int undetected = 0;
  } diagnostics;
};

/// calibrate -> Hankel tensor -> CP-ALS (F = 2R) -> match columns of A ->
/// sign-align and fuse each pair -> autocorrelate -> peaks -> rate.
/// Stage failures raise StageError; undetectable persons leave success false.
/// Without ground truth, a low-confidence spectrum also leaves success false.
BreathingReport run_pipeline(const PhaseDifferenceMatrix& matrix, const PipelineOptions& opts = {},
                             const std::vector<double>* truth_bpm = nullptr);

/// Fills errors_bpm and success from ground truth.
void score_report(BreathingReport& report, const std::vector<double>& truth_bpm);

std::string report_to_json(const BreathingReport& report, int indent = 2);

}  // namespace tensorbeat
