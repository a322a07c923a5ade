#include "tensorbeat/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rng.hpp"
#include "tensorbeat/error.hpp"

namespace tensorbeat {

std::vector<PersonSource> draw_persons(int count, std::uint64_t seed, const RateDraw& draw) {
  if (count < 1) throw Error("draw_persons: need at least one person");
  if ((count - 1) * draw.min_separation_bpm > draw.max_bpm - draw.min_bpm)
    throw Error("draw_persons: rate band too narrow for the requested separation");
  auto gen = detail::stream(seed, detail::kSceneDrawStream);
  std::uniform_real_distribution<double> rate(draw.min_bpm, draw.max_bpm);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> rates;
  // Rejection sampling; the band check above keeps this finite in practice.
  for (int attempt = 0; int(rates.size()) < count; ++attempt) {
    if (attempt > 100000) throw Error("draw_persons: could not place rates");
    const double r = rate(gen);
    const bool clear = std::all_of(rates.begin(), rates.end(), [&](double o) {
      return std::abs(o - r) >= draw.min_separation_bpm;
    });
    if (clear) rates.push_back(r);
  }
  std::vector<PersonSource> persons;
  for (double r : rates) persons.push_back({r, phase(gen), draw.amplitude});
  return persons;
}

SceneConfig with_snr(SceneConfig scene, std::optional<double> snr_db) {
  if (snr_db) scene.noise_std_rad = noise_std_for_snr(scene, *snr_db);
  return scene;
}

TrialOutcome run_trial(const SceneConfig& scene, const PipelineOptions& opts) {
  TrialOutcome out;
  const SyntheticTrace trace = synth_phase_difference_matrix(scene);
  out.truth_bpm = trace.truth_bpm;
  PipelineOptions run_opts = opts;
  run_opts.persons = int(scene.persons.size());
  try {
    const BreathingReport report = run_pipeline(trace.matrix, run_opts, &out.truth_bpm);
    out.rates_bpm = report.rates_bpm;
    if (report.errors_bpm) out.errors_bpm = *report.errors_bpm;
    out.success = report.success.value_or(false);
  } catch (const Error& e) {
    out.error = e.what();
    out.success = false;
  }
  return out;
}

std::string axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kNoiseStd: return "noise_std";
    case SweepAxis::kSamplingRate: return "sampling_rate";
    case SweepAxis::kWindowPackets: return "window_packets";
    case SweepAxis::kPersons: return "persons";
  }
  return "?";
}

SweepSpec parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw Error("sweep: expected axis=v1,v2,...");
  const std::string axis = text.substr(0, eq);
  SweepSpec spec;
  if (axis == "noise_std") spec.axis = SweepAxis::kNoiseStd;
  else if (axis == "sampling_rate") spec.axis = SweepAxis::kSamplingRate;
  else if (axis == "window_packets") spec.axis = SweepAxis::kWindowPackets;
  else if (axis == "persons") spec.axis = SweepAxis::kPersons;
  else throw Error("sweep: unknown axis '" + axis + "'");
  std::stringstream values(text.substr(eq + 1));
  std::string item;
  while (std::getline(values, item, ',')) {
    try {
      std::size_t used = 0;
      spec.values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error("sweep: bad value '" + item + "'");
    }
  }
  if (spec.values.empty()) throw Error("sweep: axis has no values");
  return spec;
}

SceneConfig sweep_scene(const SceneConfig& base, SweepAxis axis, double value, int trial,
                        std::optional<double> snr_db, const RateDraw& draw) {
  SceneConfig scene = base;
  scene.seed = base.seed + std::uint64_t(trial);
  int persons = int(base.persons.size());
  switch (axis) {
    case SweepAxis::kNoiseStd:
      scene.noise_std_rad = value;
      snr_db.reset();
      break;
    case SweepAxis::kSamplingRate: {
      const double window_s = double(base.duration_packets) / base.sampling_rate_hz;
      scene.sampling_rate_hz = value;
      scene.duration_packets = int(std::lround(window_s * value));
      break;
    }
    case SweepAxis::kWindowPackets:
      scene.duration_packets = int(std::lround(value));
      break;
    case SweepAxis::kPersons:
      persons = int(std::lround(value));
      break;
  }
  scene.persons = draw_persons(persons, scene.seed, draw);
  return with_snr(scene, snr_db);
}

std::vector<SweepRow> run_sweep(const SceneConfig& base, const SweepSpec& spec,
                                const PipelineOptions& opts, std::optional<double> snr_db,
                                const RateDraw& draw) {
  if (spec.trials < 1) throw Error("sweep: trials must be >= 1");
  if (spec.values.empty()) throw Error("sweep: axis has no values");
  std::vector<SweepRow> rows;
  for (double value : spec.values) {
    int successes = 0;
    double error_sum = 0.0;
    int error_count = 0;
    for (int t = 0; t < spec.trials; ++t) {
      const SceneConfig scene = sweep_scene(base, spec.axis, value, t, snr_db, draw);
      PipelineOptions trial_opts = opts;
      trial_opts.als.seed = opts.als.seed + std::uint64_t(t);
      const TrialOutcome outcome = run_trial(scene, trial_opts);
      successes += outcome.success ? 1 : 0;
      if (!outcome.errors_bpm.empty()) {
        error_sum += std::accumulate(outcome.errors_bpm.begin(), outcome.errors_bpm.end(), 0.0) /
                     double(outcome.errors_bpm.size());
        ++error_count;
      }
    }
    rows.push_back({axis_name(spec.axis), value, double(successes) / spec.trials,
                    error_count ? error_sum / error_count : std::numeric_limits<double>::quiet_NaN()});
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "param,value,success_rate,mean_error_bpm\n";
  const auto old_precision = out.precision(10);
  for (const auto& r : rows)
    out << r.param << ',' << r.value << ',' << r.success_rate << ',' << r.mean_error_bpm << '\n';
  out.precision(old_precision);
}

}  // namespace tensorbeat
