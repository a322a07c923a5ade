#pragma once

// Seeded synthetic trials and parameter sweeps shared by the CLI and the
// acceptance suite.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tensorbeat/estimate.hpp"
#include "tensorbeat/model.hpp"

namespace tensorbeat {

struct RateDraw {
  double min_bpm = 10.0;
  double max_bpm = 30.0;
  double min_separation_bpm = 2.0;
  double amplitude = 0.3;
};

/// R persons with rates uniform in [min, max] at least min_separation apart,
/// phases uniform in [0, 2 pi).
std::vector<PersonSource> draw_persons(int count, std::uint64_t seed, const RateDraw& draw = {});

/// Copy of `scene` with noise set from snr_db (when given).
SceneConfig with_snr(SceneConfig scene, std::optional<double> snr_db);

struct TrialOutcome {
  std::vector<double> truth_bpm;
  std::vector<double> rates_bpm;
  std::vector<double> errors_bpm;  // empty unless every person was detected
  bool success = false;
  std::string error;  // pipeline error message, empty on a clean run
};

/// Synthesise `scene`, run the pipeline with R = number of persons, score it.
TrialOutcome run_trial(const SceneConfig& scene, const PipelineOptions& opts);

enum class SweepAxis { kNoiseStd, kSamplingRate, kWindowPackets, kPersons };

struct SweepSpec {
  SweepAxis axis = SweepAxis::kNoiseStd;
  std::vector<double> values;
  int trials = 1;
};

/// "axis=v1,v2,..." with axis one of noise_std, sampling_rate,
/// window_packets, persons.
SweepSpec parse_sweep(const std::string& text);
std::string axis_name(SweepAxis axis);

struct SweepRow {
  std::string param;
  double value = 0.0;
  double success_rate = 0.0;
  double mean_error_bpm = 0.0;  // NaN when no trial produced a full estimate
};

/// Scene for one trial of one grid point: seed = base.seed + trial, persons
/// redrawn from that seed. A sampling-rate point keeps the base window
/// duration in seconds.
SceneConfig sweep_scene(const SceneConfig& base, SweepAxis axis, double value, int trial,
                        std::optional<double> snr_db, const RateDraw& draw = {});

std::vector<SweepRow> run_sweep(const SceneConfig& base, const SweepSpec& spec,
                                const PipelineOptions& opts, std::optional<double> snr_db,
                                const RateDraw& draw = {});

/// Header `param,value,success_rate,mean_error_bpm`.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace tensorbeat
