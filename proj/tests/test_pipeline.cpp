#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "srmtl/dataio.hpp"
#include "srmtl/errors.hpp"
#include "srmtl/pipeline.hpp"

using namespace srmtl;

namespace {

// Small, fast configuration: 3 wide bands, 3x3-fold, no repeats, coarse grid.
pipeline::PipelineConfig small_config() {
  pipeline::PipelineConfig cfg;
  cfg.bands = signal::BandSpec::sweep(4, 40, 12, 12);
  cfg.lambda1_grid = {0.1, 1.0, 10.0};
  cfg.lambda2_grid = {0.1, 1.0, 10.0};
  cfg.outer_folds = 3;
  cfg.inner_folds = 3;
  cfg.repeats = 1;
  cfg.seed = 5;
  return cfg;
}

TrialSet small_set(std::uint64_t seed = 2, int n_per_class = 15, double snr = 15.0) {
  dataio::SynthConfig synth;
  synth.n_per_class = n_per_class;
  synth.channels = 6;
  synth.samples = 400;
  synth.snr_db = snr;
  synth.seed = seed;
  return dataio::synth_dataset(synth);
}

std::vector<int> labels_of(const TrialSet& set) {
  std::vector<int> labels;
  for (const Trial& t : set.trials) labels.push_back(t.label);
  return labels;
}

}  // namespace

TEST_CASE("method names round-trip") {
  for (const auto m : {pipeline::Method::CspOnly, pipeline::Method::Sfbcsp,
                       pipeline::Method::Mtl, pipeline::Method::Srmtl})
    CHECK(pipeline::method_from_string(pipeline::to_string(m)) == m);
  CHECK_THROWS_AS(pipeline::method_from_string("svm"), InvalidConfig);
}

TEST_CASE("the default hyperparameter grid has the 17 published values") {
  const auto grid = pipeline::default_lambda_grid();
  REQUIRE(grid.size() == 17);
  CHECK(grid.front() == 0.01);
  CHECK(grid[1] == 0.05);
  CHECK(grid[2] == 0.1);
  CHECK(grid[3] == 0.5);
  CHECK(grid[4] == 1.0);
  CHECK(grid[5] == 5.0);
  CHECK(grid[6] == 10.0);
  CHECK(grid.back() == 60.0);
  CHECK(std::is_sorted(grid.begin(), grid.end()));
}

TEST_CASE("stratified folds partition each class round-robin") {
  std::vector<int> labels;
  for (int i = 0; i < 23; ++i) labels.push_back(1);
  for (int i = 0; i < 19; ++i) labels.push_back(2);
  const auto folds = pipeline::stratified_folds(labels, 5, 99);
  REQUIRE(folds.size() == 5);

  std::set<int> seen;
  for (const auto& fold : folds) {
    int n1 = 0, n2 = 0;
    for (const int idx : fold) {
      CHECK(seen.insert(idx).second);  // disjoint
      (labels[static_cast<std::size_t>(idx)] == 1 ? n1 : n2)++;
    }
    // 23 = 5*4+3, 19 = 5*3+4: class counts differ by at most one per fold.
    CHECK(n1 >= 4);
    CHECK(n1 <= 5);
    CHECK(n2 >= 3);
    CHECK(n2 <= 4);
    CHECK(std::is_sorted(fold.begin(), fold.end()));
  }
  CHECK(seen.size() == labels.size());

  const auto again = pipeline::stratified_folds(labels, 5, 99);
  CHECK(folds == again);
  const auto other_seed = pipeline::stratified_folds(labels, 5, 100);
  CHECK(folds != other_seed);
}

TEST_CASE("r-square is exactly 1 when the feature equals the label") {
  Vector f(6);
  std::vector<int> labels;
  for (int i = 0; i < 6; ++i) {
    const int label = i % 2 == 0 ? 1 : -1;
    labels.push_back(label);
    f(i) = label;
  }
  CHECK(pipeline::r_square(f, labels) == 1.0);
}

TEST_CASE("constant features raise ZeroVariance and single classes are rejected") {
  CHECK_THROWS_AS(pipeline::r_square(Vector::Ones(8), {1, -1, 1, -1, 1, -1, 1, -1}),
                  ZeroVariance);
  CHECK_THROWS_AS(pipeline::r_square(Vector::Random(8), {1, 1, 1, 1, 1, 1, 1, 1}), SingleClass);
  CHECK_THROWS_AS(pipeline::r_square(Vector::Random(4), {1, 2, 1, 2}), InvalidConfig);
  CHECK_THROWS_AS(pipeline::r_square(Vector::Random(4), {1, -1, 1}), ShapeMismatch);
}

TEST_CASE("r-square matches the closed-form point-biserial oracle") {
  Rng rng(81);
  for (int rep = 0; rep < 5; ++rep) {
    const int n = 400;
    Vector f(n);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      const int label = i % 2 == 0 ? 1 : -1;
      labels.push_back(label);
      f(i) = (label == 1 ? 0.8 : -0.8) + rng.normal();
    }
    const double got = pipeline::r_square(f, labels);
    const double want = oracle::point_biserial_sq(f, labels);
    CHECK(got == doctest::Approx(want).epsilon(1e-6));
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("canonical config excludes the thread count but tracks every knob") {
  pipeline::PipelineConfig a = small_config();
  pipeline::PipelineConfig b = a;
  b.threads = 7;
  CHECK(pipeline::canonical_config(a) == pipeline::canonical_config(b));
  b.lambda1_grid = {0.2, 1.0};
  CHECK(pipeline::canonical_config(a) != pipeline::canonical_config(b));
  b = a;
  b.seed = 6;
  CHECK(pipeline::canonical_config(a) != pipeline::canonical_config(b));
  b = a;
  b.ap.damping = 0.8;
  CHECK(pipeline::canonical_config(a) != pipeline::canonical_config(b));
}

TEST_CASE("config validation rejects empty grids and bad fold counts") {
  pipeline::PipelineConfig cfg = small_config();
  cfg.lambda1_grid.clear();
  CHECK_THROWS_AS(pipeline::validate(cfg), InvalidConfig);
  cfg = small_config();
  cfg.outer_folds = 1;
  CHECK_THROWS_AS(pipeline::validate(cfg), InvalidConfig);
  cfg = small_config();
  cfg.repeats = 0;
  CHECK_THROWS_AS(pipeline::validate(cfg), InvalidConfig);
  cfg = small_config();
  cfg.lambda1_grid = {0.1, -0.5};
  CHECK_THROWS_AS(pipeline::validate(cfg), InvalidConfig);
}

TEST_CASE("cross-validation runs are byte-identical for a fixed seed") {
  const TrialSet set = small_set();
  pipeline::PipelineConfig cfg = small_config();
  cfg.method = pipeline::Method::Srmtl;
  const pipeline::CvReport a = pipeline::run_crossval(set, cfg);
  const pipeline::CvReport b = pipeline::run_crossval(set, cfg);
  CHECK(a.canonical_csv() == b.canonical_csv());
  REQUIRE(a.folds.size() == 3);
  for (const auto& fold : a.folds) {
    CHECK(fold.accuracy >= 0.0);
    CHECK(fold.accuracy <= 1.0);
    CHECK(!fold.selected_features.empty());
    CHECK(fold.num_clusters >= 2);
  }
}

TEST_CASE("fold results carry the held-out indices they scored") {
  const TrialSet set = small_set();
  pipeline::PipelineConfig cfg = small_config();
  cfg.method = pipeline::Method::Mtl;
  const pipeline::CvReport report = pipeline::run_crossval(set, cfg);
  // Outer folds of repeat 0 are seeded from mix_seed(cfg.seed, 2^32 + 0).
  const auto folds = pipeline::stratified_folds(labels_of(set), cfg.outer_folds,
                                                mix_seed(cfg.seed, 0x100000000ULL));
  REQUIRE(report.folds.size() == folds.size());
  std::set<int> seen;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    CHECK(report.folds[f].test_indices == folds[f]);
    CHECK(report.folds[f].predictions.size() == folds[f].size());
    for (const int p : report.folds[f].predictions) CHECK(std::abs(p) == 1);
    seen.insert(folds[f].begin(), folds[f].end());
  }
  CHECK(seen.size() == static_cast<std::size_t>(set.size()));
}

TEST_CASE("the signal-present fixture beats the 3-sigma chance band") {
  const TrialSet set = small_set(3, 15, 15.0);
  pipeline::PipelineConfig cfg = small_config();
  cfg.method = pipeline::Method::Srmtl;
  const pipeline::CvReport report = pipeline::run_crossval(set, cfg);
  const double n = static_cast<double>(set.size());
  const double band = 3.0 * std::sqrt(0.25 / n);
  CHECK(report.mean_accuracy > 0.5 + band);
}

TEST_CASE("scrambling test labels after training changes no prediction") {
  // Leakage canary: predictions may depend on test features only.
  const TrialSet set = small_set(4);
  pipeline::PipelineConfig cfg = small_config();
  cfg.method = pipeline::Method::Srmtl;

  const auto folds =
      pipeline::stratified_folds(labels_of(set), 3, mix_seed(cfg.seed, 0x100000000ULL));
  std::vector<int> train_idx;
  for (std::size_t f = 1; f < folds.size(); ++f)
    train_idx.insert(train_idx.end(), folds[f].begin(), folds[f].end());

  const pipeline::FoldResult honest = pipeline::evaluate_fold(set, train_idx, folds[0], cfg);
  TrialSet scrambled = set;
  for (const int idx : folds[0])
    scrambled.trials[idx].label = 3 - scrambled.trials[idx].label;  // flip 1<->2
  const pipeline::FoldResult flipped =
      pipeline::evaluate_fold(scrambled, train_idx, folds[0], cfg);
  CHECK(honest.predictions == flipped.predictions);
  CHECK(honest.accuracy == doctest::Approx(1.0 - flipped.accuracy));
}

TEST_CASE("evaluate_fold rejects malformed index sets") {
  const TrialSet set = small_set(6, 8);
  const pipeline::PipelineConfig cfg = small_config();
  std::vector<int> train_idx, test_idx;
  for (int i = 0; i < 12; ++i) train_idx.push_back(i);
  for (int i = 12; i < 16; ++i) test_idx.push_back(i);
  CHECK_THROWS_AS(pipeline::evaluate_fold(set, {0, 1, 99}, test_idx, cfg), IndexOutOfRange);
  CHECK_THROWS_AS(pipeline::evaluate_fold(set, {}, test_idx, cfg), InvalidConfig);
}

TEST_CASE("srmtl with a zero lambda2 grid reproduces the mtl report") {
  const TrialSet set = small_set(7);
  pipeline::PipelineConfig cfg = small_config();
  cfg.method = pipeline::Method::Srmtl;
  cfg.lambda2_grid = {0.0};
  const pipeline::CvReport degenerate = pipeline::run_crossval(set, cfg);
  cfg.method = pipeline::Method::Mtl;
  const pipeline::CvReport mtl_report = pipeline::run_crossval(set, cfg);
  REQUIRE(degenerate.folds.size() == mtl_report.folds.size());
  for (std::size_t f = 0; f < mtl_report.folds.size(); ++f) {
    CHECK(degenerate.folds[f].predictions == mtl_report.folds[f].predictions);
    CHECK(degenerate.folds[f].lambda1 == mtl_report.folds[f].lambda1);
    CHECK(degenerate.folds[f].selected_features == mtl_report.folds[f].selected_features);
  }
  CHECK(degenerate.mean_accuracy == mtl_report.mean_accuracy);
}

TEST_CASE("method comparison shares fold assignments across methods") {
  const TrialSet set = small_set(8);
  pipeline::PipelineConfig cfg = small_config();
  const auto reports = pipeline::run_method_comparison(set, cfg);
  REQUIRE(reports.size() == 4);
  CHECK(reports[0].method == pipeline::Method::CspOnly);
  CHECK(reports[1].method == pipeline::Method::Sfbcsp);
  CHECK(reports[2].method == pipeline::Method::Mtl);
  CHECK(reports[3].method == pipeline::Method::Srmtl);
  for (std::size_t m = 1; m < reports.size(); ++m) {
    REQUIRE(reports[m].folds.size() == reports[0].folds.size());
    for (std::size_t f = 0; f < reports[m].folds.size(); ++f)
      CHECK(reports[m].folds[f].test_indices == reports[0].folds[f].test_indices);
  }
}

TEST_CASE("an absurd lambda1 grid triggers the flagged selection fallback") {
  const TrialSet set = small_set(9);
  pipeline::PipelineConfig cfg = small_config();
  cfg.method = pipeline::Method::Srmtl;
  cfg.lambda1_grid = {1e6};
  cfg.lambda2_grid = {0.1};
  const pipeline::CvReport report = pipeline::run_crossval(set, cfg);
  const Index d = 4 * 3;  // 2 pairs x 2 filters-per-pair x 3 bands
  for (const auto& fold : report.folds) {
    CHECK(fold.selection_fallback);
    CHECK(fold.selected_features.size() ==
          static_cast<std::size_t>((d + 9) / 10));  // ceil(D/10)
    CHECK(std::is_sorted(fold.selected_features.begin(), fold.selected_features.end()));
  }
}

TEST_CASE("canonical CSV has the documented layout and a provenance block") {
  const TrialSet set = small_set(10, 9);
  pipeline::PipelineConfig cfg = small_config();
  cfg.method = pipeline::Method::Sfbcsp;
  const pipeline::CvReport report = pipeline::run_crossval(set, cfg);
  const std::string csv = report.canonical_csv();
  CHECK(csv.find("# config_hash=") != std::string::npos);
  CHECK(csv.find("# seed=5") != std::string::npos);
  CHECK(csv.find("# versions=") != std::string::npos);
  CHECK(csv.find("method,repeat,fold,accuracy,lambda1,lambda2,num_selected,selected,"
                 "num_clusters,solver_iterations,selection_fallback") != std::string::npos);
  CHECK(csv.find("# mean_accuracy=") != std::string::npos);
  CHECK(csv.find("sfbcsp,0,0,") != std::string::npos);
  CHECK(csv.find("seconds") == std::string::npos);  // timing never enters the canonical form

  const std::string json = report.to_json();
  CHECK(json.find("\"mean_accuracy\"") != std::string::npos);
  CHECK(json.find("\"total_seconds\"") != std::string::npos);
}

TEST_CASE("subject tables have one row per dataset plus an average row") {
  const auto dir = oracle::fresh_dir("srmtl_pipeline_subjects");
  std::vector<std::filesystem::path> manifests;
  for (int s = 0; s < 2; ++s) {
    const TrialSet set = small_set(20 + static_cast<std::uint64_t>(s), 9);
    manifests.push_back(dataio::save_dataset(set, dir / ("s" + std::to_string(s)),
                                             "subject-" + std::to_string(s)));
  }
  pipeline::PipelineConfig cfg = small_config();
  cfg.lambda1_grid = {1.0};
  cfg.lambda2_grid = {1.0};
  const pipeline::SubjectTable table = pipeline::run_subject_table(manifests, cfg);
  REQUIRE(table.subjects.size() == 2);
  REQUIRE(table.methods.size() == 4);
  CHECK(table.accuracy.rows() == 2);
  CHECK(table.accuracy.cols() == 4);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 4; ++j) {
      CHECK(table.accuracy(i, j) >= 0.0);
      CHECK(table.accuracy(i, j) <= 100.0);
    }
  Provenance prov;
  prov.config_hash = "deadbeef";
  prov.seed = cfg.seed;
  const std::string csv = table.csv(prov);
  CHECK(csv.find("subject,csp-only,sfbcsp,mtl,srmtl") != std::string::npos);
  CHECK(csv.find("subject-0,") != std::string::npos);
  CHECK(csv.find("average,") != std::string::npos);
  CHECK(csv.find("+-") != std::string::npos);
}
