#include <doctest.h>

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "tensorbeat/error.hpp"
#include "tensorbeat/experiment.hpp"
#include "tensorbeat/model.hpp"

using namespace tensorbeat;
using Eigen::VectorXd;

namespace {

SceneConfig quiet_scene(std::vector<PersonSource> persons) {
  SceneConfig scene;
  scene.persons = std::move(persons);
  scene.dc_trend = TrendSpec::none();
  scene.seed = 42;
  return scene;
}

double spread(const VectorXd& v) { return circular_std({v.data(), std::size_t(v.size())}); }

}  // namespace

TEST_CASE("one person at 12 bpm gives an exact cosine of period 100 packets") {
  const auto trace = synth_phase_difference_matrix(quiet_scene({{12.0, 0.7, 0.3}}));
  REQUIRE(trace.matrix.packets() == 599);
  REQUIRE(trace.matrix.subcarriers() == 60);
  CHECK(trace.truth_bpm == std::vector<double>{12.0});
  for (Index k = 0; k < 60; ++k) {
    const double gain = trace.mixing(0, k) * 0.3;
    for (Index n = 0; n < 599; ++n)
      CHECK(trace.matrix.data(n, k) ==
            doctest::Approx(gain * std::cos(2.0 * std::numbers::pi * n / 100.0 + 0.7)).epsilon(1e-12));
  }
}

TEST_CASE("columns are the mixed sum of the persons' cosines") {
  const std::vector<PersonSource> persons = {{25.0, 0.1, 0.2}, {12.0, 1.0, 0.3}, {17.0, 2.0, 0.4}};
  const auto trace = synth_phase_difference_matrix(quiet_scene(persons));
  CHECK(trace.truth_bpm == std::vector<double>{12.0, 17.0, 25.0});
  CHECK((trace.mixing.array() >= 0.5).all());
  CHECK((trace.mixing.array() <= 1.5).all());
  for (Index k = 0; k < 60; k += 7) {
    for (Index n = 0; n < 599; n += 13) {
      double expect = 0.0;
      for (std::size_t i = 0; i < persons.size(); ++i)
        expect += trace.mixing(Index(i), k) * persons[i].amplitude *
                  std::cos(persons[i].angular_freq() * n / 20.0 + persons[i].phase_rad);
      CHECK(trace.matrix.data(n, k) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("synthesis is deterministic per seed") {
  SceneConfig scene = quiet_scene({{14.0, 0.0, 0.3}, {22.0, 1.0, 0.3}});
  scene.noise_std_rad = 0.1;
  scene.dc_trend = TrendSpec::sinusoid();
  const auto a = synth_phase_difference_matrix(scene);
  const auto b = synth_phase_difference_matrix(scene);
  CHECK(a.matrix.data == b.matrix.data);
  scene.seed += 1;
  CHECK(synth_phase_difference_matrix(scene).matrix.data != a.matrix.data);
}

TEST_CASE("noiseless trend-free spectrum has energy only at the persons' bins") {
  SceneConfig scene = quiet_scene({{12.0, 0.3, 0.3}, {18.0, 2.0, 0.2}});
  scene.duration_packets = 600;  // 2 bpm bins
  const auto trace = synth_phase_difference_matrix(scene);
  Eigen::FFT<double> fft;
  for (Index k : {Index(0), Index(31)}) {
    std::vector<double> col(trace.matrix.data.col(k).data(), trace.matrix.data.col(k).data() + 600);
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, col);
    double peak = 0.0;
    for (const auto& c : spec) peak = std::max(peak, std::abs(c));
    for (std::size_t b = 0; b <= 300; ++b) {
      if (b == 6 || b == 9) continue;
      CHECK(std::abs(spec[b]) < 1e-9 * peak);
    }
  }
}

TEST_CASE("raw phase pair: shared errors cancel in the difference") {
  SceneConfig scene = quiet_scene({{15.0, 0.2, 0.3}, {21.0, 1.3, 0.3}});
  scene.noise_std_rad = 0.02;
  for (int k : {0, 17, 59}) {
    const auto pair = synth_raw_phase_pair(scene, k);
    const VectorXd clean = pair.true_phase_a - pair.true_phase_b;
    const VectorXd expect =
        clean.array() + (pair.beta_a - pair.beta_b) + (pair.noise_a - pair.noise_b).array();
    CHECK((pair.difference() - expect).cwiseAbs().maxCoeff() < 1e-12);
  }

  scene.noise_std_rad = 0.0;
  const auto pair = synth_raw_phase_pair(scene, 5);
  const VectorXd offset = pair.difference() - (pair.true_phase_a - pair.true_phase_b);
  CHECK((offset.array() - offset[0]).abs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(synth_raw_phase_pair(scene, 60), Error);
  CHECK_THROWS_AS(synth_raw_phase_pair(scene, -1), Error);
}

TEST_CASE("single-antenna phase spans the circle, the difference does not") {
  SceneConfig scene = quiet_scene({{15.0, 0.0, 0.001}});
  scene.duration_packets = 500;
  scene.noise_std_rad = 0.01;
  const auto pair = synth_raw_phase_pair(scene, 10);
  const double single = spread(pair.phase_a);
  const VectorXd diff = pair.difference();
  CHECK(single > 2.0);
  CHECK(single >= 100.0 * spread(diff));
}

TEST_CASE("circular_std") {
  const std::vector<double> same(10, 1.3);
  CHECK(circular_std(same) == doctest::Approx(0.0).epsilon(1e-7));
  std::vector<double> uniform;
  for (int i = 0; i < 8; ++i) uniform.push_back(2.0 * std::numbers::pi * i / 8.0);
  CHECK(circular_std(uniform) > 5.0);
}

TEST_CASE("noise level from SNR") {
  SceneConfig scene = quiet_scene({{15.0, 0.0, 0.3}});
  const double power = breathing_signal_power(scene);
  CHECK(noise_std_for_snr(scene, 10.0) == doctest::Approx(std::sqrt(power / 10.0)));
  CHECK(noise_std_for_snr(scene, 0.0) == doctest::Approx(std::sqrt(power)));
}

TEST_CASE("scene validation") {
  SceneConfig scene;
  CHECK_THROWS_AS(scene.validate(), Error);  // no persons
  scene.persons = {{15.0}};
  CHECK_NOTHROW(scene.validate());
  scene.sampling_rate_hz = 0.0;
  CHECK_THROWS_AS(synth_phase_difference_matrix(scene), Error);
  scene.sampling_rate_hz = 20.0;
  scene.duration_packets = 2;
  CHECK_THROWS_AS(scene.validate(), Error);
  scene.duration_packets = 599;
  scene.subcarriers = 1;
  CHECK_THROWS_AS(scene.validate(), Error);
  scene.subcarriers = 60;
  scene.persons = {{70.0}};
  CHECK_THROWS_AS(scene.validate(), Error);
}

TEST_CASE("trace CSV round trip") {
  SceneConfig scene = quiet_scene({{15.0, 0.0, 0.3}});
  scene.subcarriers = 4;
  scene.duration_packets = 11;
  scene.noise_std_rad = 0.1;
  const auto trace = synth_phase_difference_matrix(scene);
  std::stringstream io;
  write_trace_csv(io, trace.matrix);
  const std::string text = io.str();
  CHECK(text.rfind("packet,sc_0,sc_1,sc_2,sc_3\n0,", 0) == 0);
  const auto back = read_trace_csv(io, 20.0);
  CHECK(back.data == trace.matrix.data);
  CHECK(back.sampling_rate_hz == 20.0);
}

TEST_CASE("malformed CSV diagnostics name the row and column") {
  auto error_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_trace_csv(in, 20.0);
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(error_of("time,sc_0,sc_1\n0,1,2\n").find("header") != std::string::npos);
  CHECK(error_of("packet,sc_0,sc_2\n0,1,2\n").find("column 2") != std::string::npos);
  const std::string bad_cell = error_of("packet,sc_0,sc_1\n0,1,2\n1,1,x\n2,1,2\n");
  // Rows are counted as file lines, header included.
  CHECK(bad_cell.find("row 3") != std::string::npos);
  CHECK(bad_cell.find("sc_1") != std::string::npos);
  const std::string ragged = error_of("packet,sc_0,sc_1\n0,1,2\n1,1\n2,1,2\n");
  CHECK(ragged.find("row 3") != std::string::npos);
  CHECK(error_of("").find("empty") != std::string::npos);
}

TEST_CASE("scene config round trip and errors") {
  SceneConfig scene;
  scene.persons = {{12.5, 0.25, 0.3}, {19.0, 1.0, 0.2}};
  scene.sampling_rate_hz = 10.0;
  scene.duration_packets = 301;
  scene.subcarriers = 30;
  scene.noise_std_rad = 0.05;
  scene.dc_trend = TrendSpec::linear(0.001);
  scene.seed = 99;
  std::stringstream io;
  write_scene_config(io, scene);
  const SceneConfig back = read_scene_config(io);
  REQUIRE(back.persons.size() == 2);
  CHECK(back.persons[0].rate_bpm == 12.5);
  CHECK(back.persons[1].amplitude == 0.2);
  CHECK(back.sampling_rate_hz == 10.0);
  CHECK(back.duration_packets == 301);
  CHECK(back.subcarriers == 30);
  CHECK(back.noise_std_rad == 0.05);
  CHECK(back.dc_trend.kind == TrendKind::kLinear);
  CHECK(back.dc_trend.slope_rad_per_packet == 0.001);
  CHECK(back.seed == 99);

  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return read_scene_config(in);
  };
  CHECK(parse("persons = 15 # one person\n").persons[0].amplitude == 0.3);
  CHECK_THROWS_AS(parse("persons = 15\nwat = 1\n"), Error);
  CHECK_THROWS_AS(parse("persons = 15\npersons = 16\n"), Error);
  CHECK_THROWS_AS(parse("persons = \n"), Error);
  CHECK_THROWS_AS(parse("sampling_rate_hz = 20\n"), Error);  // zero persons
  CHECK_THROWS_AS(parse("persons = 15\ndc_trend = wobble\n"), Error);
}
