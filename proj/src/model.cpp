#include "tensorbeat/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "rng.hpp"
#include "tensorbeat/error.hpp"

namespace tensorbeat {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Intel 5300 style grouping reports 30 subcarriers spread over [-28, 28].
constexpr int kMaxSubcarrierOffset = 28;
constexpr double kFftSize = 64.0;

double trend_at(const SceneConfig& cfg, Eigen::Index n) {
  const TrendSpec& tr = cfg.dc_trend;
  switch (tr.kind) {
    case TrendKind::kNone:
      return 0.0;
    case TrendKind::kLinear:
      return tr.slope_rad_per_packet * double(n);
    case TrendKind::kSinusoid: {
      double slowest = cfg.persons.front().rate_bpm;
      double largest = cfg.persons.front().amplitude;
      for (const auto& p : cfg.persons) {
        slowest = std::min(slowest, p.rate_bpm);
        largest = std::max(largest, p.amplitude);
      }
      const double period = tr.period_s > 0.0 ? tr.period_s : 10.0 * 60.0 / slowest;
      const double amplitude = tr.amplitude_rad > 0.0 ? tr.amplitude_rad : 5.0 * largest;
      return amplitude * std::sin(kTwoPi * (double(n) / cfg.sampling_rate_hz) / period);
    }
  }
  return 0.0;
}

Eigen::MatrixXd draw_mixing(const SceneConfig& cfg) {
  auto gen = detail::stream(cfg.seed, detail::kMixingStream);
  std::uniform_real_distribution<double> gain(0.5, 1.5);
  Eigen::MatrixXd k(cfg.persons.size(), cfg.subcarriers);
  for (Eigen::Index r = 0; r < k.cols(); ++r)
    for (Eigen::Index i = 0; i < k.rows(); ++i) k(i, r) = gain(gen);
  return k;
}

Eigen::MatrixXd mix(const SceneConfig& cfg, const Eigen::MatrixXd& mixing) {
  const Eigen::Index n_packets = cfg.duration_packets;
  // sources(n, i) = A_i cos(w_i t_n + phi_i)
  Eigen::MatrixXd sources(n_packets, Eigen::Index(cfg.persons.size()));
  for (Eigen::Index i = 0; i < sources.cols(); ++i) {
    const PersonSource& p = cfg.persons[std::size_t(i)];
    const double w = p.angular_freq();
    for (Eigen::Index n = 0; n < n_packets; ++n)
      sources(n, i) = p.amplitude * std::cos(w * double(n) / cfg.sampling_rate_hz + p.phase_rad);
  }
  return sources * mixing;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_double(std::string_view text, const std::string& where) {
  const std::string t = trim(text);
  double v = 0.0;
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (t.empty() || ec != std::errc() || ptr != end)
    throw Error(where + ": not a number: '" + t + "'");
  return v;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

void SceneConfig::validate() const {
  if (persons.empty()) throw Error("scene: persons must be nonempty");
  for (const auto& p : persons) {
    if (!(p.rate_bpm >= 6.0 && p.rate_bpm <= 60.0))
      throw Error("scene: rate_bpm must lie in [6, 60], got " + std::to_string(p.rate_bpm));
    if (!(p.amplitude > 0.0) || !std::isfinite(p.amplitude))
      throw Error("scene: amplitude must be positive");
    if (!std::isfinite(p.phase_rad)) throw Error("scene: phase_rad must be finite");
  }
  if (!(sampling_rate_hz > 0.0) || !std::isfinite(sampling_rate_hz))
    throw Error("scene: sampling_rate_hz must be positive");
  if (duration_packets < 3) throw Error("scene: duration_packets must be >= 3");
  if (subcarriers < 2) throw Error("scene: subcarriers must be >= 2");
  if (!(noise_std_rad >= 0.0) || !std::isfinite(noise_std_rad))
    throw Error("scene: noise_std_rad must be nonnegative");
}

void PhaseDifferenceMatrix::validate() const {
  if (data.rows() < 3) throw Error("phase difference matrix: need at least 3 packets");
  if (data.cols() < 2) throw Error("phase difference matrix: need at least 2 subcarriers");
  if (!data.allFinite()) throw Error("phase difference matrix: non-finite entry");
  if (!(sampling_rate_hz > 0.0)) throw Error("phase difference matrix: sampling rate must be positive");
}

Eigen::MatrixXd clean_breathing_signal(const SceneConfig& cfg) {
  cfg.validate();
  return mix(cfg, draw_mixing(cfg));
}

double breathing_signal_power(const SceneConfig& cfg) {
  return clean_breathing_signal(cfg).squaredNorm() /
         double(cfg.duration_packets * cfg.subcarriers);
}

double noise_std_for_snr(const SceneConfig& cfg, double snr_db) {
  return std::sqrt(breathing_signal_power(cfg) / std::pow(10.0, snr_db / 10.0));
}

SyntheticTrace synth_phase_difference_matrix(const SceneConfig& cfg) {
  cfg.validate();
  SyntheticTrace out;
  out.mixing = draw_mixing(cfg);
  out.trend.resize(cfg.duration_packets);
  for (Eigen::Index n = 0; n < out.trend.size(); ++n) out.trend[n] = trend_at(cfg, n);

  Eigen::MatrixXd data = mix(cfg, out.mixing);
  data.colwise() += out.trend;
  if (cfg.noise_std_rad > 0.0) {
    auto gen = detail::stream(cfg.seed, detail::kNoiseStream);
    std::normal_distribution<double> noise(0.0, cfg.noise_std_rad);
    for (Eigen::Index r = 0; r < data.cols(); ++r)
      for (Eigen::Index n = 0; n < data.rows(); ++n) data(n, r) += noise(gen);
  }
  out.matrix = PhaseDifferenceMatrix{std::move(data), cfg.sampling_rate_hz};

  for (const auto& p : cfg.persons) out.truth_bpm.push_back(p.rate_bpm);
  std::sort(out.truth_bpm.begin(), out.truth_bpm.end());
  return out;
}

RawPhasePair synth_raw_phase_pair(const SceneConfig& cfg, int subcarrier_index) {
  cfg.validate();
  if (subcarrier_index < 0 || subcarrier_index >= cfg.subcarriers)
    throw Error("synth_raw_phase_pair: subcarrier index out of range");

  const Eigen::Index n_packets = cfg.duration_packets;
  const Eigen::MatrixXd mixing = draw_mixing(cfg);
  Eigen::VectorXd clean_difference = mix(cfg, mixing).col(subcarrier_index);
  for (Eigen::Index n = 0; n < n_packets; ++n) clean_difference[n] += trend_at(cfg, n);

  RawPhasePair pair;
  pair.subcarrier_offset =
      -kMaxSubcarrierOffset +
      int(std::lround(2.0 * kMaxSubcarrierOffset * subcarrier_index / double(cfg.subcarriers - 1)));

  // Antenna offsets are per radio, shared by all subcarriers.
  auto radio_gen = detail::stream(cfg.seed, detail::kRawPhaseStream);
  std::uniform_real_distribution<double> circle(0.0, kTwoPi);
  pair.beta_a = circle(radio_gen);
  pair.beta_b = circle(radio_gen);

  auto gen = detail::stream(cfg.seed, detail::kRawPhaseStream, 1 + std::uint64_t(subcarrier_index));
  const double channel_phase = circle(gen);
  std::uniform_real_distribution<double> boundary_delay(0.0, 8.0);   // samples
  std::uniform_real_distribution<double> clock_offset(-40e-6, 40e-6);
  std::uniform_int_distribution<int> sample_offset(0, 1023);
  std::normal_distribution<double> antenna_noise(0.0, cfg.noise_std_rad / std::sqrt(2.0));
  constexpr double kSymbolRatio = 80.0 / 64.0;  // T_s / T_u with an 800 ns guard interval

  pair.true_phase_a.resize(n_packets);
  pair.true_phase_b.resize(n_packets);
  pair.lambda_p.resize(n_packets);
  pair.lambda_s.resize(n_packets);
  pair.lambda_c.resize(n_packets);
  pair.noise_a.resize(n_packets);
  pair.noise_b.resize(n_packets);
  for (Eigen::Index n = 0; n < n_packets; ++n) {
    pair.true_phase_b[n] = channel_phase;
    pair.true_phase_a[n] = channel_phase + clean_difference[n];
    pair.lambda_p[n] = kTwoPi * boundary_delay(gen) / kFftSize;
    pair.lambda_s[n] = kTwoPi * clock_offset(gen) * kSymbolRatio * double(sample_offset(gen));
    pair.lambda_c[n] = circle(gen);
    if (cfg.noise_std_rad > 0.0) {
      pair.noise_a[n] = antenna_noise(gen);
      pair.noise_b[n] = antenna_noise(gen);
    } else {
      pair.noise_a[n] = pair.noise_b[n] = 0.0;
    }
  }
  const Eigen::VectorXd shared =
      (pair.lambda_p + pair.lambda_s) * double(pair.subcarrier_offset) + pair.lambda_c;
  pair.phase_a = pair.true_phase_a + shared + pair.noise_a;
  pair.phase_a.array() += pair.beta_a;
  pair.phase_b = pair.true_phase_b + shared + pair.noise_b;
  pair.phase_b.array() += pair.beta_b;
  return pair;
}

double circular_std(std::span<const double> angles_rad) {
  if (angles_rad.empty()) throw Error("circular_std: empty input");
  std::complex<double> sum{0.0, 0.0};
  for (double a : angles_rad) sum += std::polar(1.0, a);
  const double resultant = std::abs(sum) / double(angles_rad.size());
  if (resultant <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(-2.0 * std::log(std::min(1.0, resultant)));
}

void write_trace_csv(std::ostream& out, const PhaseDifferenceMatrix& m) {
  out << "packet";
  for (Eigen::Index r = 0; r < m.subcarriers(); ++r) out << ",sc_" << r;
  out << '\n';
  const auto old_precision = out.precision(17);
  for (Eigen::Index n = 0; n < m.packets(); ++n) {
    out << n;
    for (Eigen::Index r = 0; r < m.subcarriers(); ++r) out << ',' << m.data(n, r);
    out << '\n';
  }
  out.precision(old_precision);
}

PhaseDifferenceMatrix read_trace_csv(std::istream& in, double sampling_rate_hz) {
  std::string line;
  if (!std::getline(in, line)) throw Error("trace csv: empty input");
  const auto header = split(trim(line), ',');
  if (header.size() < 3 || trim(header[0]) != "packet")
    throw Error("trace csv: header must be packet,sc_0,...,sc_{K-1}");
  const std::size_t n_sc = header.size() - 1;
  for (std::size_t r = 0; r < n_sc; ++r)
    if (trim(header[r + 1]) != "sc_" + std::to_string(r))
      throw Error("trace csv: header column " + std::to_string(r + 1) + " must be sc_" +
                  std::to_string(r) + ", got '" + trim(header[r + 1]) + "'");

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    const std::string row_tag = "trace csv: row " + std::to_string(line_no);
    if (cells.size() != header.size())
      throw Error(row_tag + ": expected " + std::to_string(header.size()) + " columns, got " +
                  std::to_string(cells.size()));
    const double packet = parse_double(cells[0], row_tag + ", column packet");
    if (packet != double(rows))
      throw Error(row_tag + ", column packet: expected index " + std::to_string(rows));
    for (std::size_t r = 0; r < n_sc; ++r)
      values.push_back(parse_double(cells[r + 1], row_tag + ", column sc_" + std::to_string(r)));
    ++rows;
  }
  PhaseDifferenceMatrix m;
  m.sampling_rate_hz = sampling_rate_hz;
  m.data = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), Eigen::Index(rows), Eigen::Index(n_sc));
  m.validate();
  return m;
}

void write_scene_config(std::ostream& out, const SceneConfig& cfg) {
  const auto old_precision = out.precision(17);
  out << "persons = ";
  for (std::size_t i = 0; i < cfg.persons.size(); ++i) {
    const auto& p = cfg.persons[i];
    out << (i ? ", " : "") << p.rate_bpm << ':' << p.phase_rad << ':' << p.amplitude;
  }
  out << "\nsampling_rate_hz = " << cfg.sampling_rate_hz
      << "\nduration_packets = " << cfg.duration_packets
      << "\nsubcarriers = " << cfg.subcarriers
      << "\nnoise_std_rad = " << cfg.noise_std_rad << "\ndc_trend = ";
  switch (cfg.dc_trend.kind) {
    case TrendKind::kNone: out << "none"; break;
    case TrendKind::kLinear: out << "linear:" << cfg.dc_trend.slope_rad_per_packet; break;
    case TrendKind::kSinusoid:
      out << "sinusoid";
      if (cfg.dc_trend.amplitude_rad > 0.0 || cfg.dc_trend.period_s > 0.0)
        out << ':' << cfg.dc_trend.amplitude_rad << ':' << cfg.dc_trend.period_s;
      break;
  }
  out << "\nseed = " << cfg.seed << '\n';
  out.precision(old_precision);
}

SceneConfig read_scene_config(std::istream& in) {
  SceneConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = "scene config line " + std::to_string(line_no);
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw Error(where + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (seen[key]++) throw Error(where + ": duplicate key '" + key + "'");

    if (key == "persons") {
      cfg.persons.clear();
      if (value.empty()) continue;
      for (const auto& item : split(value, ',')) {
        const auto parts = split(trim(item), ':');
        if (parts.size() > 3) throw Error(where + ": person is rate[:phase[:amplitude]]");
        PersonSource p;
        p.rate_bpm = parse_double(parts[0], where + " (rate_bpm)");
        if (parts.size() > 1) p.phase_rad = parse_double(parts[1], where + " (phase_rad)");
        if (parts.size() > 2) p.amplitude = parse_double(parts[2], where + " (amplitude)");
        cfg.persons.push_back(p);
      }
    } else if (key == "sampling_rate_hz") {
      cfg.sampling_rate_hz = parse_double(value, where);
    } else if (key == "duration_packets") {
      cfg.duration_packets = int(parse_double(value, where));
    } else if (key == "subcarriers") {
      cfg.subcarriers = int(parse_double(value, where));
    } else if (key == "noise_std_rad") {
      cfg.noise_std_rad = parse_double(value, where);
    } else if (key == "dc_trend") {
      const auto parts = split(value, ':');
      const std::string kind = trim(parts[0]);
      if (kind == "none" && parts.size() == 1) {
        cfg.dc_trend = TrendSpec::none();
      } else if (kind == "linear" && parts.size() == 2) {
        cfg.dc_trend = TrendSpec::linear(parse_double(parts[1], where + " (slope)"));
      } else if (kind == "sinusoid" && (parts.size() == 1 || parts.size() == 3)) {
        cfg.dc_trend = parts.size() == 1
                           ? TrendSpec::sinusoid()
                           : TrendSpec::sinusoid(parse_double(parts[1], where + " (amplitude)"),
                                                 parse_double(parts[2], where + " (period)"));
      } else {
        throw Error(where + ": dc_trend must be none | linear:<slope> | sinusoid[:<amp>:<period_s>]");
      }
    } else if (key == "seed") {
      const std::string t = trim(value);
      std::uint64_t seed = 0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), seed);
      if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw Error(where + ": seed must be an unsigned integer");
      cfg.seed = seed;
    } else {
      throw Error(where + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace tensorbeat
