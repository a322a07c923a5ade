#include "tensorbeat/estimate.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <json.hpp>

#include "tensorbeat/error.hpp"

namespace tensorbeat {

using Eigen::Index;

Eigen::VectorXd fuse_pair(const Eigen::Ref<const Eigen::VectorXd>& s1,
                          const Eigen::Ref<const Eigen::VectorXd>& s2) {
  if (s1.size() != s2.size()) throw Error("fuse_pair: length mismatch");
  return 0.5 * (s1 + s2);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> align_sign(const Eigen::Ref<const Eigen::VectorXd>& s1,
                                                       const Eigen::Ref<const Eigen::VectorXd>& s2) {
  if (s1.size() != s2.size()) throw Error("align_sign: length mismatch");
  if (s1.dot(s2) < 0.0) return {s1, -s2};
  return {s1, s2};
}

std::vector<Index> detect_peaks(const Eigen::Ref<const Eigen::VectorXd>& series) {
  constexpr Index kHalf = 3;
  std::vector<Index> peaks;
  const Index n = series.size();
  for (Index t = kHalf; t + kHalf < n; ++t) {
    bool peak = true;
    for (Index d = 1; d <= kHalf && peak; ++d)
      peak = series[t] > series[t - d] && series[t] >= series[t + d];
    if (peak) peaks.push_back(t);
  }
  return peaks;
}

double breathing_rate(const std::vector<Index>& peaks, double sampling_rate_hz, Index autocorr_offset) {
  if (!(sampling_rate_hz > 0.0)) throw Error("breathing_rate: sampling rate must be positive");
  std::vector<Index> usable;
  for (Index p : peaks)
    if (p >= autocorr_offset) usable.push_back(p);
  if (usable.size() < 2)
    throw RateUndetectable(std::to_string(usable.size()) + " usable peak(s)");
  std::sort(usable.begin(), usable.end());
  std::vector<double> gaps;
  for (std::size_t i = 1; i < usable.size(); ++i) gaps.push_back(double(usable[i] - usable[i - 1]));
  std::sort(gaps.begin(), gaps.end());
  const std::size_t m = gaps.size();
  const double median = m % 2 ? gaps[m / 2] : 0.5 * (gaps[m / 2 - 1] + gaps[m / 2]);
  return 60.0 / (median / sampling_rate_hz);
}

double autocorrelation_rate(const Eigen::Ref<const Eigen::VectorXd>& series, double sampling_rate_hz) {
  const Autocorrelation ac = autocorrelate(series);
  if (ac.zero_input) throw RateUndetectable("zero signal");
  return breathing_rate(detect_peaks(ac.values), sampling_rate_hz, ac.zero_lag_index());
}

std::vector<SpectralPeak> fft_spectral_peaks(const PhaseDifferenceMatrix& matrix,
                                             const FftBaselineOptions& opts) {
  const Index n = matrix.packets();
  if (n < 2) throw Error("fft_baseline: need at least 2 packets");
  const CalibrationParams params = CalibrationParams::for_sampling_rate(matrix.sampling_rate_hz);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (Index k = 0; k < matrix.subcarriers(); ++k) {
    if (n > 2 * Index(params.trend_half_window))
      mean += calibrate(matrix.data.col(k), params);
    else
      mean.array() += matrix.data.col(k).array() - matrix.data.col(k).mean();
  }
  mean /= double(std::max<Index>(1, matrix.subcarriers()));
  if (opts.hann_window && n > 1) {
    for (Index t = 0; t < n; ++t)
      mean[t] *= 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(t) / double(n - 1));
  }

  Eigen::FFT<double> fft;
  std::vector<double> input(mean.data(), mean.data() + n);
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, input);

  const double bin_bpm = 60.0 * matrix.sampling_rate_hz / double(n);
  std::vector<double> mag(std::size_t(n / 2 + 1));
  for (std::size_t b = 0; b < mag.size(); ++b) mag[b] = std::abs(spectrum[b]);

  std::vector<SpectralPeak> peaks;
  double strongest = 0.0;
  for (std::size_t b = 1; b + 1 < mag.size(); ++b) {
    const double rate = double(b) * bin_bpm;
    if (rate < opts.min_bpm || rate > opts.max_bpm) continue;
    strongest = std::max(strongest, mag[b]);
    if (mag[b] > mag[b - 1] && mag[b] > mag[b + 1]) peaks.push_back({rate, mag[b]});
  }
  if (!(strongest > 0.0)) return {};
  std::erase_if(peaks, [&](const SpectralPeak& p) {
    return p.magnitude < opts.min_relative_magnitude * strongest;
  });
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const SpectralPeak& l, const SpectralPeak& r) { return l.magnitude > r.magnitude; });
  if (!opts.hann_window) return peaks;
  // A Hann main lobe spans two bins either side; maxima inside a stronger
  // peak's lobe are not separate rates.
  std::vector<SpectralPeak> resolved;
  for (const auto& p : peaks) {
    const bool inside = std::any_of(resolved.begin(), resolved.end(), [&](const SpectralPeak& q) {
      return std::abs(p.rate_bpm - q.rate_bpm) < 2.5 * bin_bpm;
    });
    if (!inside) resolved.push_back(p);
  }
  return resolved;
}

std::vector<double> fft_baseline(const PhaseDifferenceMatrix& matrix, const FftBaselineOptions& opts) {
  std::vector<double> rates;
  for (const auto& p : fft_spectral_peaks(matrix, opts)) rates.push_back(p.rate_bpm);
  return rates;
}

Evaluation evaluate(std::vector<double> estimated, std::vector<double> truth) {
  if (estimated.size() != truth.size())
    throw Error("evaluate: " + std::to_string(estimated.size()) + " estimates for " +
                std::to_string(truth.size()) + " true rates");
  std::sort(estimated.begin(), estimated.end());
  std::sort(truth.begin(), truth.end());
  Evaluation ev;
  double worst = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ev.errors_bpm.push_back(std::abs(estimated[i] - truth[i]));
    worst = std::max(worst, ev.errors_bpm.back());
  }
  ev.success = worst < kSuccessThresholdBpm;
  return ev;
}

void score_report(BreathingReport& report, const std::vector<double>& truth_bpm) {
  if (report.diagnostics.undetected > 0 || report.rates_bpm.size() != truth_bpm.size()) {
    report.errors_bpm.reset();
    report.success = false;
    return;
  }
  Evaluation ev = evaluate(report.rates_bpm, truth_bpm);
  report.errors_bpm = std::move(ev.errors_bpm);
  report.success = ev.success;
}

namespace {

template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

BreathingReport run_pipeline(const PhaseDifferenceMatrix& matrix, const PipelineOptions& opts,
                             const std::vector<double>* truth_bpm) {
  in_stage("input", [&] { matrix.validate(); });
  if (opts.persons && *opts.persons < 1) throw StageError("input", "persons must be >= 1");

  const CalibrationParams params =
      opts.calibration ? *opts.calibration : CalibrationParams::for_sampling_rate(matrix.sampling_rate_hz);
  const CsiTensor tensor = in_stage("calibrate", [&] { return build_csi_tensor(matrix, params); });

  BreathingReport report;
  auto& diag = report.diagnostics;

  const ComponentEstimate spectrum = in_stage("component_count", [&] {
    return estimate_component_count(tensor, opts.auto_energy_threshold);
  });
  diag.auto_persons = !opts.persons.has_value();
  diag.persons = opts.persons ? *opts.persons : spectrum.count / 2;
  diag.components = 2 * diag.persons;
  {
    const auto& sv = spectrum.singular_values;
    const Index f = diag.components;
    const double last = f <= sv.size() ? sv[f - 1] : 0.0;
    const double next = f < sv.size() ? sv[f] : 0.0;
    const double floor = sv.size() > 0 ? sv[sv.size() / 2] : 0.0;
    diag.gap_ratio = last > 0.0 ? next / last : 1.0;
    diag.floor_ratio = floor > 0.0 ? last / floor : (last > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    diag.low_confidence = !(diag.floor_ratio >= opts.min_floor_ratio);
  }

  const FactorSet<double> factors =
      in_stage("cp_als", [&] { return cp_als(tensor, diag.components, opts.als); });
  const std::size_t tail = std::min<std::size_t>(5, factors.fit_history.size());
  diag.fit_history_tail.assign(factors.fit_history.end() - std::ptrdiff_t(tail), factors.fit_history.end());
  diag.final_error = factors.final_error();
  diag.sweeps = factors.sweeps;
  diag.converged = factors.converged;
  diag.kruskal = kruskal_check(factors);

  std::vector<Eigen::VectorXd> signals;
  for (Index f = 0; f < factors.rank(); ++f) signals.emplace_back(factors.A.col(f));
  const Matching matching = in_stage("matching", [&] {
    return stable_roommate_match(build_preferences(signals, opts.downsample_factor));
  });
  diag.stability = matching.stability;

  in_stage("estimate", [&] {
    for (const auto& [a, b] : matching.pairs) {
      PersonEstimate person;
      person.components = {a, b};
      const auto [s1, s2] = align_sign(signals[std::size_t(a)], signals[std::size_t(b)]);
      try {
        person.rate_bpm = autocorrelation_rate(fuse_pair(s1, s2), matrix.sampling_rate_hz);
      } catch (const RateUndetectable&) {
      }
      if (person.rate_bpm) report.rates_bpm.push_back(*person.rate_bpm);
      else ++diag.undetected;
      diag.people.push_back(person);
    }
  });
  std::sort(report.rates_bpm.begin(), report.rates_bpm.end());

  if (truth_bpm) score_report(report, *truth_bpm);
  else if (diag.undetected > 0 || diag.low_confidence) report.success = false;
  return report;
}

std::string report_to_json(const BreathingReport& report, int indent) {
  using nlohmann::json;
  const auto& d = report.diagnostics;
  json people = json::array();
  for (const auto& p : d.people)
    people.push_back({{"components", {p.components.first, p.components.second}},
                      {"rate_bpm", p.rate_bpm ? json(*p.rate_bpm) : json(nullptr)}});
  json doc = {
      {"rates_bpm", report.rates_bpm},
      {"errors_bpm", report.errors_bpm ? json(*report.errors_bpm) : json(nullptr)},
      {"success", report.success ? json(*report.success) : json(nullptr)},
      {"diagnostics",
       {{"persons", d.persons},
        {"components", d.components},
        {"auto_persons", d.auto_persons},
        {"gap_ratio", d.gap_ratio},
        {"floor_ratio", std::isfinite(d.floor_ratio) ? json(d.floor_ratio) : json(nullptr)},
        {"low_confidence", d.low_confidence},
        {"fit_history_tail", d.fit_history_tail},
        {"final_error", d.final_error},
        {"sweeps", d.sweeps},
        {"converged", d.converged},
        {"kruskal",
         {{"k_A", d.kruskal.k_A}, {"k_B", d.kruskal.k_B}, {"k_C", d.kruskal.k_C}, {"unique", d.kruskal.unique}}},
        {"stability", d.stability == MatchStability::kStable ? "stable" : "fallback"},
        {"people", people},
        {"undetected", d.undetected}}}};
  return doc.dump(indent);
}

}  // namespace tensorbeat
