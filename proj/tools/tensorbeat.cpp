// tensorbeat: synthesise phase-difference traces, estimate breathing rates,
// and sweep success rates over scene parameters.
//
//   tensorbeat synth --scene config/scene.txt --output trace.csv
//   tensorbeat run --input trace.csv --truth trace.truth.json --output report.json
//   tensorbeat sweep --scene config/scene.txt --sweep sampling_rate=5,10,20,30 --trials 20

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tensorbeat/error.hpp"
#include "tensorbeat/estimate.hpp"
#include "tensorbeat/experiment.hpp"
#include "tensorbeat/model.hpp"

namespace tb = tensorbeat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitError = 2;

struct Options {
  std::string input;
  std::string scene;
  std::string persons = "auto";
  std::string output;
  std::string truth;
  std::string sweep;
  std::optional<std::uint64_t> seed;
  std::optional<double> snr_db;
  double sampling_rate_hz = 20.0;
  int trials = 1;
  int restarts = 1;
  int max_sweeps = 500;
};

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tb::Error("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw tb::Error("cannot open '" + path + "' for writing");
  return out;
}

// Writes to `path`, or stdout when path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out = open_out(path);
  out << text;
  if (!out) throw tb::Error("write to '" + path + "' failed");
}

std::optional<int> parse_persons(const std::string& text) {
  if (text == "auto") return std::nullopt;
  std::size_t used = 0;
  int r = 0;
  try {
    r = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw tb::Error("--persons must be an integer or 'auto'");
  return r;
}

// Scene from --scene, or persons drawn from --persons and --seed.
tb::SceneConfig load_scene(const Options& o) {
  tb::SceneConfig scene;
  if (!o.scene.empty()) {
    std::ifstream in = open_in(o.scene);
    scene = tb::read_scene_config(in);
    if (o.seed) scene.seed = *o.seed;
    return tb::with_snr(scene, o.snr_db);
  }
  const std::optional<int> r = parse_persons(o.persons);
  if (!r) throw tb::Error("synthetic scene needs --scene or an integer --persons");
  if (*r < 1) throw tb::Error("scene: persons must be >= 1");
  scene.seed = o.seed.value_or(0);
  scene.persons = tb::draw_persons(*r, scene.seed);
  return tb::with_snr(scene, o.snr_db);
}

std::string truth_json(const std::vector<double>& rates) {
  return nlohmann::json{{"rates_bpm", rates}}.dump(2) + "\n";
}

std::vector<double> read_truth(const std::string& path) {
  std::ifstream in = open_in(path);
  nlohmann::json doc;
  try {
    in >> doc;
    return doc.at("rates_bpm").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw tb::Error("truth file '" + path + "': " + e.what());
  }
}

std::string default_truth_path(const std::string& trace_path) {
  std::filesystem::path p(trace_path);
  p.replace_extension(".truth.json");
  return p.string();
}

tb::PipelineOptions pipeline_options(const Options& o) {
  tb::PipelineOptions opts;
  opts.als.seed = o.seed.value_or(0);
  opts.als.restarts = o.restarts;
  opts.als.max_sweeps = o.max_sweeps;
  return opts;
}

int cmd_synth(const Options& o) {
  if (o.output.empty() || o.output == "-") throw tb::Error("synth needs --output <trace.csv>");
  const tb::SceneConfig scene = load_scene(o);
  const tb::SyntheticTrace trace = tb::synth_phase_difference_matrix(scene);
  std::ostringstream csv;
  tb::write_trace_csv(csv, trace.matrix);
  emit(o.output, csv.str());
  emit(o.truth.empty() ? default_truth_path(o.output) : o.truth, truth_json(trace.truth_bpm));
  return kExitOk;
}

int cmd_run(const Options& o) {
  tb::PhaseDifferenceMatrix matrix;
  std::optional<std::vector<double>> truth;
  if (o.input == "synth") {
    const tb::SyntheticTrace trace = tb::synth_phase_difference_matrix(load_scene(o));
    matrix = trace.matrix;
    truth = trace.truth_bpm;
  } else {
    if (o.input.empty()) throw tb::Error("run needs --input <trace.csv|synth>");
    std::ifstream in = open_in(o.input);
    matrix = tb::read_trace_csv(in, o.sampling_rate_hz);
  }
  if (!o.truth.empty()) truth = read_truth(o.truth);

  tb::PipelineOptions opts = pipeline_options(o);
  opts.persons = parse_persons(o.persons);
  const tb::BreathingReport report = tb::run_pipeline(matrix, opts, truth ? &*truth : nullptr);
  emit(o.output, tb::report_to_json(report) + "\n");
  return report.success.value_or(true) ? kExitOk : kExitFailed;
}

int cmd_sweep(const Options& o) {
  if (o.sweep.empty()) throw tb::Error("sweep needs --sweep axis=v1,v2,...");
  if (o.trials < 1) throw tb::Error("--trials must be >= 1");
  tb::SweepSpec spec = tb::parse_sweep(o.sweep);
  spec.trials = o.trials;

  tb::SceneConfig base;
  if (!o.scene.empty()) {
    std::ifstream in = open_in(o.scene);
    base = tb::read_scene_config(in);
  } else {
    const std::optional<int> r = parse_persons(o.persons);
    if (!r || *r < 1) throw tb::Error("sweep needs --scene or an integer --persons >= 1");
    base.persons = tb::draw_persons(*r, 0);
  }
  if (o.seed) base.seed = *o.seed;

  const auto rows = tb::run_sweep(base, spec, pipeline_options(o), o.snr_db);
  std::ostringstream csv;
  tb::write_sweep_csv(csv, rows);
  emit(o.output, csv.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-person breathing-rate estimation from CSI phase differences"};
  app.require_subcommand(1);
  Options o;

  auto add_scene = [&](CLI::App* cmd) {
    cmd->add_option("--scene", o.scene, "Scene config file (key = value)");
    cmd->add_option("--seed", o.seed, "Seed for scene synthesis and ALS starts");
    cmd->add_option("--snr-db", o.snr_db, "Override noise_std_rad from a target SNR in dB");
  };
  auto add_als = [&](CLI::App* cmd) {
    cmd->add_option("--restarts", o.restarts, "Random ALS starts per fit")->check(CLI::PositiveNumber);
    cmd->add_option("--max-sweeps", o.max_sweeps, "ALS sweep limit")->check(CLI::PositiveNumber);
  };

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic trace CSV and its truth JSON");
  add_scene(synth);
  synth->add_option("--persons", o.persons, "Person count drawn at random when --scene is absent");
  synth->add_option("--output", o.output, "Trace CSV path")->required();
  synth->add_option("--truth", o.truth, "Truth JSON path (default: <output>.truth.json)");

  CLI::App* run = app.add_subcommand("run", "Estimate breathing rates from a trace");
  add_scene(run);
  add_als(run);
  run->add_option("--input", o.input, "Trace CSV path, or 'synth' to generate from --scene")->required();
  run->add_option("--persons", o.persons, "Number of persons R, or 'auto'");
  run->add_option("--truth", o.truth, "Truth JSON; enables errors_bpm and success");
  run->add_option("--fs", o.sampling_rate_hz, "Sampling rate of the trace in Hz")->check(CLI::PositiveNumber);
  run->add_option("--output", o.output, "Report JSON path (default: stdout)");

  CLI::App* sweep = app.add_subcommand("sweep", "Success rate over a parameter grid");
  add_scene(sweep);
  add_als(sweep);
  sweep->add_option("--persons", o.persons, "Person count when --scene is absent");
  sweep->add_option("--sweep", o.sweep, "axis=v1,v2,... (noise_std|sampling_rate|window_packets|persons)")
      ->required();
  sweep->add_option("--trials", o.trials, "Seeded trials per grid point");
  sweep->add_option("--output", o.output, "Sweep CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (synth->parsed()) return cmd_synth(o);
    if (run->parsed()) return cmd_run(o);
    return cmd_sweep(o);
  } catch (const std::exception& e) {
    std::cerr << "tensorbeat: " << e.what() << '\n';
  }
  return kExitError;
}
