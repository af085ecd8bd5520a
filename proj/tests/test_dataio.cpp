#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "srmtl/dataio.hpp"
#include "srmtl/errors.hpp"

using namespace srmtl;
namespace fs = std::filesystem;

namespace {

void write_manifest(const fs::path& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

// Single-bin DFT power of one channel, summed over channels.
double bin_power(const Matrix& trial, Index k) {
  double total = 0;
  const Index p = trial.cols();
  for (Index c = 0; c < trial.rows(); ++c) {
    double re = 0, im = 0;
    for (Index t = 0; t < p; ++t) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) *
                           static_cast<double>(t) / static_cast<double>(p);
      re += trial(c, t) * std::cos(phase);
      im += trial(c, t) * std::sin(phase);
    }
    total += re * re + im * im;
  }
  return total;
}

}  // namespace

TEST_CASE("raw trial files round-trip bit-exactly") {
  const fs::path dir = oracle::fresh_dir("srmtl_dataio_raw");
  Matrix m(3, 5);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 5; ++j) m(i, j) = static_cast<float>(0.37 * (i + 1) - 1.21 * j);
  dataio::write_raw_trial(dir / "t.f32", m);
  const Matrix back = dataio::read_raw_trial(dir / "t.f32", 3);
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("raw trial read rejects truncated files") {
  const fs::path dir = oracle::fresh_dir("srmtl_dataio_trunc");
  std::ofstream(dir / "bad.f32", std::ios::binary).write("\0\0\0\0\0\0", 6);
  CHECK_THROWS_AS(dataio::read_raw_trial(dir / "bad.f32", 3), ShapeMismatch);
}

TEST_CASE("manifest with zero trials is rejected") {
  const fs::path dir = oracle::fresh_dir("srmtl_dataio_empty");
  write_manifest(dir / "m.json",
                 R"({"name":"x","fs_hz":250,"channels":["C3","Cz","C4"],"trials":[]})");
  CHECK_THROWS_AS(dataio::load_dataset(dir / "m.json"), SchemaViolation);
}

TEST_CASE("missing manifest and missing trial files are reported") {
  const fs::path dir = oracle::fresh_dir("srmtl_dataio_missing");
  CHECK_THROWS_AS(dataio::load_dataset(dir / "nope.json"), MissingFile);
  write_manifest(dir / "m.json",
                 R"({"name":"x","fs_hz":250,"channels":["C3"],"trials":[{"file":"gone.f32","label":1}]})");
  CHECK_THROWS_AS(dataio::load_dataset(dir / "m.json"), MissingFile);
}

TEST_CASE("single 3x1000 trial loads with the declared shape") {
  const fs::path dir = oracle::fresh_dir("srmtl_dataio_single");
  Matrix m(3, 1000);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 1000; ++j) m(i, j) = static_cast<float>(std::sin(0.01 * j + i));
  dataio::write_raw_trial(dir / "t0.f32", m);
  write_manifest(dir / "m.json",
                 R"({"name":"x","fs_hz":250,"channels":["C3","Cz","C4"],"trials":[{"file":"t0.f32","label":1}]})");
  const TrialSet set = dataio::load_dataset(dir / "m.json");
  CHECK(set.size() == 1);
  CHECK(set.channels() == 3);
  CHECK(set.samples() == 1000);
  CHECK(set.trials[0].label == 1);
  CHECK(set.trials[0].fs == 250.0);
  CHECK((set.trials[0].data - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("labels outside {1,2} are rejected") {
  const fs::path dir = oracle::fresh_dir("srmtl_dataio_label");
  dataio::write_raw_trial(dir / "t0.f32", Matrix::Ones(2, 8));
  write_manifest(dir / "m.json",
                 R"({"name":"x","fs_hz":100,"channels":["a","b"],"trials":[{"file":"t0.f32","label":3}]})");
  CHECK_THROWS_AS(dataio::load_dataset(dir / "m.json"), SchemaViolation);
}

TEST_CASE("trials of differing length are rejected") {
  const fs::path dir = oracle::fresh_dir("srmtl_dataio_shape");
  dataio::write_raw_trial(dir / "a.f32", Matrix::Ones(2, 10));
  dataio::write_raw_trial(dir / "b.f32", Matrix::Ones(2, 12));
  write_manifest(
      dir / "m.json",
      R"({"name":"x","fs_hz":100,"channels":["a","b"],"trials":[{"file":"a.f32","label":1},{"file":"b.f32","label":2}]})");
  CHECK_THROWS_AS(dataio::load_dataset(dir / "m.json"), ShapeMismatch);
}

TEST_CASE("non-finite samples are rejected at load") {
  const fs::path dir = oracle::fresh_dir("srmtl_dataio_nan");
  Matrix m = Matrix::Ones(2, 8);
  m(1, 3) = std::numeric_limits<double>::quiet_NaN();
  dataio::write_raw_trial(dir / "t.f32", m);
  write_manifest(dir / "m.json",
                 R"({"name":"x","fs_hz":100,"channels":["a","b"],"trials":[{"file":"t.f32","label":1}]})");
  CHECK_THROWS_AS(dataio::load_dataset(dir / "m.json"), NonFiniteSample);
}

TEST_CASE("manifest window cuts the requested epoch") {
  const fs::path dir = oracle::fresh_dir("srmtl_dataio_window");
  Matrix m(2, 100);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 100; ++j) m(i, j) = static_cast<float>(100 * i + j);
  dataio::write_raw_trial(dir / "t.f32", m);
  write_manifest(dir / "m.json",
                 R"({"name":"x","fs_hz":10,"channels":["a","b"],)"
                 R"("window":{"offset_s":2.0,"length_s":5.0},)"
                 R"("trials":[{"file":"t.f32","label":2}]})");
  const TrialSet set = dataio::load_dataset(dir / "m.json");
  CHECK(set.samples() == 50);
  CHECK(set.trials[0].data(0, 0) == 20.0);
  CHECK(set.trials[0].data(1, 49) == 169.0);
}

TEST_CASE("window past the end of the file is rejected") {
  const fs::path dir = oracle::fresh_dir("srmtl_dataio_window_bad");
  dataio::write_raw_trial(dir / "t.f32", Matrix::Ones(1, 100));
  write_manifest(dir / "m.json",
                 R"({"name":"x","fs_hz":10,"channels":["a"],)"
                 R"("window":{"offset_s":5.0,"length_s":6.0},)"
                 R"("trials":[{"file":"t.f32","label":1}]})");
  CHECK_THROWS_AS(dataio::load_dataset(dir / "m.json"), ShapeMismatch);
}

TEST_CASE("synthetic generation is a pure function of its config") {
  dataio::SynthConfig cfg;
  cfg.n_per_class = 6;
  cfg.channels = 4;
  cfg.samples = 200;
  cfg.seed = 7;
  const TrialSet a = dataio::synth_dataset(cfg);
  const TrialSet b = dataio::synth_dataset(cfg);
  REQUIRE(a.size() == 12);
  for (Index i = 0; i < a.size(); ++i) {
    CHECK(a.trials[i].label == b.trials[i].label);
    CHECK((a.trials[i].data - b.trials[i].data).cwiseAbs().maxCoeff() == 0.0);
  }
  cfg.seed = 8;
  const TrialSet c = dataio::synth_dataset(cfg);
  CHECK((a.trials[0].data - c.trials[0].data).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("synthetic trials come out class 1 first, then class 2") {
  dataio::SynthConfig cfg;
  cfg.n_per_class = 5;
  cfg.channels = 2;
  cfg.samples = 64;
  const TrialSet set = dataio::synth_dataset(cfg);
  for (Index i = 0; i < set.size(); ++i) CHECK(set.trials[i].label == (i < 5 ? 1 : 2));
}

TEST_CASE("save followed by load reproduces every sample bit-exactly") {
  dataio::SynthConfig cfg;
  cfg.n_per_class = 4;
  cfg.channels = 3;
  cfg.samples = 128;
  cfg.seed = 11;
  const TrialSet set = dataio::synth_dataset(cfg);
  const fs::path dir = oracle::fresh_dir("srmtl_dataio_roundtrip");
  const fs::path manifest = dataio::save_dataset(set, dir, "roundtrip");
  const TrialSet back = dataio::load_dataset(manifest);
  REQUIRE(back.size() == set.size());
  for (Index i = 0; i < set.size(); ++i) {
    CHECK(back.trials[i].label == set.trials[i].label);
    CHECK((back.trials[i].data - set.trials[i].data).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("invalid synth configs are rejected") {
  dataio::SynthConfig cfg;
  cfg.subclasses_per_class = 3;
  cfg.band_centers = {10.0, 22.0};  // counts disagree
  CHECK_THROWS_AS(dataio::validate(cfg), InvalidConfig);
  cfg = {};
  cfg.n_per_class = 1;
  cfg.subclasses_per_class = 2;
  CHECK_THROWS_AS(dataio::validate(cfg), InvalidConfig);
  cfg = {};
  cfg.band_centers = {10.0, 200.0};  // beyond Nyquist at fs=250
  CHECK_THROWS_AS(dataio::validate(cfg), InvalidConfig);
}

TEST_CASE("planted generator ids cycle within each class") {
  dataio::SynthConfig cfg;
  cfg.n_per_class = 5;
  cfg.subclasses_per_class = 2;
  const std::vector<int> expected = {0, 1, 0, 1, 0, 0, 1, 0, 1, 0};
  for (int i = 0; i < 10; ++i) CHECK(dataio::planted_generator(cfg, i) == expected[i]);
}

TEST_CASE("at high SNR the mean spectrum peaks at the configured frequency") {
  dataio::SynthConfig cfg;
  cfg.n_per_class = 8;
  cfg.channels = 3;
  cfg.samples = 500;
  cfg.fs = 250.0;
  cfg.subclasses_per_class = 1;
  cfg.band_centers = {10.0};
  cfg.snr_db = 60.0;
  cfg.seed = 3;
  const TrialSet set = dataio::synth_dataset(cfg);
  for (int label = 1; label <= 2; ++label) {
    std::vector<double> mean_power(static_cast<std::size_t>(cfg.samples / 2 + 1), 0.0);
    for (const Trial& trial : set.trials) {
      if (trial.label != label) continue;
      for (Index c = 0; c < trial.data.rows(); ++c) {
        const auto spec = oracle::power_spectrum(trial.data.row(c).transpose());
        for (std::size_t k = 0; k < spec.size(); ++k) mean_power[k] += spec[k];
      }
    }
    std::size_t peak = 1;
    for (std::size_t k = 1; k < mean_power.size(); ++k)
      if (mean_power[k] > mean_power[peak]) peak = k;
    // 10 Hz at fs=250, P=500 falls exactly on bin 20.
    const double expected_bin = cfg.band_centers[0] * cfg.samples / cfg.fs;
    CHECK(std::abs(static_cast<double>(peak) - expected_bin) <= 1.0);
  }
}

TEST_CASE("band-power k-means recovers the planted generators at snr>=20") {
  dataio::SynthConfig cfg;
  cfg.n_per_class = 30;
  cfg.channels = 4;
  cfg.samples = 500;
  cfg.fs = 250.0;
  cfg.subclasses_per_class = 2;
  cfg.band_centers = {10.0, 22.0};
  cfg.snr_db = 20.0;
  cfg.seed = 5;
  const TrialSet set = dataio::synth_dataset(cfg);

  // Class-1 trials: log band power at the two planted frequencies (exact DFT
  // bins: f * P / fs).
  Matrix features(cfg.n_per_class, 2);
  std::vector<int> truth;
  for (int j = 0; j < cfg.n_per_class; ++j) {
    const Matrix& data = set.trials[j].data;
    features(j, 0) = std::log(bin_power(data, static_cast<Index>(10.0 * 500 / 250)));
    features(j, 1) = std::log(bin_power(data, static_cast<Index>(22.0 * 500 / 250)));
    truth.push_back(dataio::planted_generator(cfg, j));
  }
  const std::vector<int> found = oracle::kmeans(features, 2, 17);
  CHECK(oracle::two_way_agreement(found, truth) >= 0.9);
}
