#pragma once

#include <utility>
#include <vector>

#include "srmtl/signal.hpp"
#include "srmtl/types.hpp"

namespace srmtl::csp {

/// Spatial filters for one band: C x 2M, the M largest generalized
/// eigenvalue columns first (descending), then the M smallest (ascending).
/// Columns are unit norm; eigenvalues store the matching generalized
/// eigenvalue of (sigma1, sigma2).
struct SpatialFilterSet {
  Matrix filters;
  Vector eigenvalues;
  int pairs = 0;
  double band_lo = 0, band_hi = 0;
};

struct CovarianceOptions {
  bool center = true;           // row-mean-center each trial first
  bool trace_normalize = false; // per-trial X X^T / trace, off by default
};

// (1/N_l) sum_i X_i X_i^T over one class's (band-filtered) trials.
Matrix class_covariance(const std::vector<Matrix>& trials, const CovarianceOptions& opts = {});

// Generalized eigensolve of sigma1 u = lambda sigma2 u by whitening
// (Cholesky of the shrunk composite, symmetric eigensolve, back-transform),
// returning the M largest / M smallest eigenvalue columns, unit-normalized.
// Shrinkage: sigma <- (1-gamma) sigma + gamma (tr(sigma)/C) I.
SpatialFilterSet fit_csp(const Matrix& sigma1, const Matrix& sigma2, int pairs,
                         double shrinkage = 1e-6);

// f_m = log(var(u_m^T X)), unbiased sample variance along time.
// Throws DegenerateVariance when a projected variance falls below 1e-12.
Vector csp_features(const Matrix& trial_data, const SpatialFilterSet& filters);

struct ColumnInfo {
  int band = 0;    // band index within the bank
  int filter = 0;  // column within the band's filter set
  double lo = 0, hi = 0;
};

/// N x D augmented filter-bank feature matrix; rows follow trial order,
/// columns are band-major: D = 2 * M * G.
struct FeatureMatrix {
  Matrix values;
  std::vector<ColumnInfo> layout;
};

/// Per-band spatial filters fitted on a training set.
struct CspBankModel {
  std::vector<SpatialFilterSet> per_band;
  int pairs = 0;
};

// Training mode: fits CSP per band on `set` (labels required, both classes
// present). Filtering and feature extraction run through the OpenMP kernel.
std::pair<FeatureMatrix, CspBankModel> fit_feature_matrix(
    const TrialSet& set, const signal::FilterBank& bank, int pairs,
    const CovarianceOptions& cov = {}, int threads = 0);

// Test mode: applies precomputed filters; trial labels are never read.
FeatureMatrix apply_feature_matrix(const TrialSet& set, const signal::FilterBank& bank,
                                   const CspBankModel& model, int threads = 0);

namespace reference {
// Serial reference of the test-mode feature kernel: per trial, per band,
// filter then project then log-variance, in plain loops.
FeatureMatrix apply_feature_matrix(const TrialSet& set, const signal::FilterBank& bank,
                                   const CspBankModel& model);
}  // namespace reference

}  // namespace srmtl::csp
