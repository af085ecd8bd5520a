#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "srmtl/csp.hpp"
#include "srmtl/mtl.hpp"
#include "srmtl/provenance.hpp"
#include "srmtl/signal.hpp"
#include "srmtl/subclass.hpp"
#include "srmtl/types.hpp"

namespace srmtl::pipeline {

enum class Method { CspOnly, Sfbcsp, Mtl, Srmtl };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

// The 17-value hyperparameter grid swept by the inner loop.
std::vector<double> default_lambda_grid();

struct PipelineConfig {
  signal::BandSpec bands = signal::BandSpec::sweep(4, 40, 4, 2);
  double single_band_lo = 4, single_band_hi = 40;  // Method::CspOnly
  int filter_order = 4;
  int csp_pairs = 2;
  csp::CovarianceOptions covariance;
  subclass::ApConfig ap;
  std::vector<double> lambda1_grid = default_lambda_grid();
  std::vector<double> lambda2_grid = default_lambda_grid();
  double svm_c = 1.0;
  int outer_folds = 5;
  int repeats = 5;
  int inner_folds = 5;
  std::uint64_t seed = 1;
  Method method = Method::Srmtl;
  mtl::SolverOptions solver;
  double selection_floor = 1e-12;
  int threads = 0;  // 0 = max_workers()
};

void validate(const PipelineConfig& cfg);

// Sorted "key = value" dump of every field that influences results (thread
// count excluded: it is logged separately). Input for the config hash.
std::string canonical_config(const PipelineConfig& cfg);

struct FoldResult {
  int repeat = 0, fold = 0;
  std::vector<int> test_indices;     // trial indices of the held-out fold
  std::vector<int> predictions;      // +-1 per test trial
  double accuracy = 0;
  double lambda1 = 0, lambda2 = 0;   // chosen by the inner loop
  std::vector<int> selected_features;
  int num_clusters = 0;
  int solver_iterations = 0;         // final refit
  bool selection_fallback = false;   // empty selection -> top-ceil(D/10) rows
  double seconds = 0;
};

struct CvReport {
  Method method = Method::Srmtl;
  std::vector<FoldResult> folds;
  double mean_accuracy = 0;
  double std_accuracy = 0;  // across folds
  Provenance provenance;
  double total_seconds = 0;

  // Deterministic serialization: everything except wall-clock timing.
  std::string canonical_csv() const;
  std::string to_json() const;  // full report, timing included
};

// Per-class trial indices dealt round-robin after a seeded shuffle.
std::vector<std::vector<int>> stratified_folds(const std::vector<int>& labels, int folds,
                                               std::uint64_t seed);

// Trains on train_idx only, predicts test_idx. Test labels are read only to
// score the returned predictions.
FoldResult evaluate_fold(const TrialSet& set, const std::vector<int>& train_idx,
                         const std::vector<int>& test_idx, const PipelineConfig& cfg);

// repeats x outer_folds cross-validation with an inner grid search on each
// training split. Fold assignment depends only on labels and cfg.seed, so
// every method sees identical splits for a fixed seed.
CvReport run_crossval(const TrialSet& set, const PipelineConfig& cfg);

// All four methods on identical fold assignments (cfg.method is ignored).
std::vector<CvReport> run_method_comparison(const TrialSet& set, const PipelineConfig& cfg);

// Squared point-biserial correlation between one feature column and the
// binary labels. Throws ZeroVariance on a (numerically) constant feature.
double r_square(const Vector& feature, const std::vector<int>& labels);

// Multi-dataset comparison table: one row per dataset (subject), one column
// per method, plus an Average +- std row. Rendered as CSV.
struct SubjectTable {
  std::vector<std::string> subjects;
  std::vector<Method> methods;
  Matrix accuracy;  // subjects x methods, percent
  std::string csv(const Provenance& p) const;
};

SubjectTable run_subject_table(const std::vector<std::filesystem::path>& manifests,
                               const PipelineConfig& cfg);

}  // namespace srmtl::pipeline
