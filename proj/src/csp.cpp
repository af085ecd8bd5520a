#include "srmtl/csp.hpp"

#include <cmath>
#include <string>

#include "srmtl/errors.hpp"
#include "srmtl/parallel.hpp"

namespace srmtl::csp {

namespace {

Matrix shrink(const Matrix& sigma, double gamma) {
  const double ridge = sigma.trace() / static_cast<double>(sigma.rows());
  return (1.0 - gamma) * sigma + gamma * ridge * Matrix::Identity(sigma.rows(), sigma.cols());
}

// Feature columns for one band of a feature matrix, filled trial by trial.
void band_features(const TrialSet& set, const signal::BandFilter& band,
                   const SpatialFilterSet& filters, Matrix& values, Index col0) {
  for (Index i = 0; i < set.size(); ++i) {
    const Matrix filtered =
        signal::filtfilt(band.b, band.a, set.trials[static_cast<std::size_t>(i)].data);
    values.row(i).segment(col0, filters.filters.cols()) =
        csp_features(filtered, filters).transpose();
  }
}

}  // namespace

Matrix class_covariance(const std::vector<Matrix>& trials, const CovarianceOptions& opts) {
  if (trials.empty()) throw EmptyClass("covariance of an empty class");
  const Index c = trials.front().rows();

  Matrix sigma = Matrix::Zero(c, c);
  for (const Matrix& trial : trials) {
    if (trial.rows() != c)
      throw DimensionMismatch("covariance over trials with differing channel counts");
    Matrix x = trial;
    if (opts.center) x.colwise() -= x.rowwise().mean();
    Matrix outer = x * x.transpose();
    if (opts.trace_normalize) {
      const double tr = outer.trace();
      if (!(tr > 0)) throw SingularCovariance("trial covariance has non-positive trace");
      outer /= tr;
    }
    sigma += outer;
  }
  return sigma / static_cast<double>(trials.size());
}

SpatialFilterSet fit_csp(const Matrix& sigma1, const Matrix& sigma2, int pairs,
                         double shrinkage) {
  const Index c = sigma1.rows();
  if (sigma1.cols() != c || sigma2.rows() != c || sigma2.cols() != c)
    throw DimensionMismatch("covariance matrices must be square and equally sized");
  if (pairs < 1) throw DimensionMismatch("need at least one filter pair");
  if (2 * pairs > c)
    throw DimensionMismatch("2*pairs = " + std::to_string(2 * pairs) + " filters exceed " +
                            std::to_string(c) + " channels");

  const Matrix s1 = shrink(sigma1, shrinkage);
  const Matrix s2 = shrink(sigma2, shrinkage);

  // Whiten by the composite covariance, then a symmetric eigensolve of the
  // whitened class-1 covariance recovers the generalized eigenpairs.
  Eigen::LLT<Matrix> llt(s1 + s2);
  if (llt.info() != Eigen::Success)
    throw SingularCovariance("composite covariance is not positive definite");
  const Matrix whitener = llt.matrixL().solve(Matrix::Identity(c, c));

  Eigen::SelfAdjointEigenSolver<Matrix> eig(whitener * s1 * whitener.transpose());
  if (eig.info() != Eigen::Success)
    throw SingularCovariance("eigensolve of the whitened covariance failed");

  const Matrix back = whitener.transpose() * eig.eigenvectors();

  SpatialFilterSet out;
  out.pairs = pairs;
  out.filters.resize(c, 2 * pairs);
  out.eigenvalues.resize(2 * pairs);
  // Eigenvalues arrive ascending; place the M largest (descending), then the
  // M smallest (ascending). Each ratio lambda/(1-lambda) is the generalized
  // eigenvalue of (sigma1, sigma2).
  for (int m = 0; m < pairs; ++m) {
    const Index hi = c - 1 - m;
    const Index lo = m;
    out.filters.col(m) = back.col(hi).normalized();
    out.filters.col(pairs + m) = back.col(lo).normalized();
    const double ratio_hi = eig.eigenvalues()(hi);
    const double ratio_lo = eig.eigenvalues()(lo);
    out.eigenvalues(m) = ratio_hi / (1.0 - ratio_hi);
    out.eigenvalues(pairs + m) = ratio_lo / (1.0 - ratio_lo);
  }
  return out;
}

Vector csp_features(const Matrix& trial_data, const SpatialFilterSet& filters) {
  if (trial_data.rows() != filters.filters.rows())
    throw DimensionMismatch("trial channel count does not match the spatial filters");
  const Index p = trial_data.cols();
  if (p < 2) throw DimensionMismatch("variance needs at least 2 samples");

  const Matrix projected = filters.filters.transpose() * trial_data;
  Vector features(projected.rows());
  for (Index m = 0; m < projected.rows(); ++m) {
    const double mean = projected.row(m).mean();
    const double var =
        (projected.row(m).array() - mean).square().sum() / static_cast<double>(p - 1);
    if (var < 1e-12)
      throw DegenerateVariance("projected variance " + std::to_string(var) +
                               " below 1e-12 for filter " + std::to_string(m));
    features(m) = std::log(var);
  }
  return features;
}

std::pair<FeatureMatrix, CspBankModel> fit_feature_matrix(const TrialSet& set,
                                                          const signal::FilterBank& bank,
                                                          int pairs,
                                                          const CovarianceOptions& cov,
                                                          int threads) {
  validate(set, /*require_both_classes=*/true);
  if (set.fs() != bank.fs) throw SampleRateMismatch("trial set and filter bank disagree on fs");

  const Index g = static_cast<Index>(bank.bands.size());
  const Index d = g * 2 * pairs;

  FeatureMatrix features;
  features.values.resize(set.size(), d);
  features.layout.resize(static_cast<std::size_t>(d));

  CspBankModel model;
  model.pairs = pairs;
  model.per_band.resize(static_cast<std::size_t>(g));

  parallel_for(
      g,
      [&](std::ptrdiff_t bi) {
        const signal::BandFilter& band = bank.bands[static_cast<std::size_t>(bi)];

        std::vector<Matrix> class1, class2;
        std::vector<Matrix> filtered(static_cast<std::size_t>(set.size()));
        for (Index i = 0; i < set.size(); ++i) {
          const Trial& trial = set.trials[static_cast<std::size_t>(i)];
          filtered[static_cast<std::size_t>(i)] = signal::filtfilt(band.b, band.a, trial.data);
          (trial.label == 1 ? class1 : class2).push_back(filtered[static_cast<std::size_t>(i)]);
        }

        SpatialFilterSet filters =
            fit_csp(class_covariance(class1, cov), class_covariance(class2, cov), pairs);
        filters.band_lo = band.lo;
        filters.band_hi = band.hi;

        const Index col0 = static_cast<Index>(bi) * 2 * pairs;
        for (Index i = 0; i < set.size(); ++i)
          features.values.row(i).segment(col0, 2 * pairs) =
              csp_features(filtered[static_cast<std::size_t>(i)], filters).transpose();
        for (int m = 0; m < 2 * pairs; ++m)
          features.layout[static_cast<std::size_t>(col0 + m)] =
              ColumnInfo{static_cast<int>(bi), m, band.lo, band.hi};

        model.per_band[static_cast<std::size_t>(bi)] = std::move(filters);
      },
      threads);

  return {std::move(features), std::move(model)};
}

FeatureMatrix apply_feature_matrix(const TrialSet& set, const signal::FilterBank& bank,
                                   const CspBankModel& model, int threads) {
  validate(set, /*require_both_classes=*/false);
  if (set.fs() != bank.fs) throw SampleRateMismatch("trial set and filter bank disagree on fs");
  if (model.per_band.size() != bank.bands.size())
    throw DimensionMismatch("model band count does not match the filter bank");

  const Index g = static_cast<Index>(bank.bands.size());
  const Index width = 2 * model.pairs;

  FeatureMatrix features;
  features.values.resize(set.size(), g * width);
  features.layout.resize(static_cast<std::size_t>(g * width));

  parallel_for(
      g,
      [&](std::ptrdiff_t bi) {
        const signal::BandFilter& band = bank.bands[static_cast<std::size_t>(bi)];
        const SpatialFilterSet& filters = model.per_band[static_cast<std::size_t>(bi)];
        band_features(set, band, filters, features.values, static_cast<Index>(bi) * width);
        for (Index m = 0; m < width; ++m)
          features.layout[static_cast<std::size_t>(static_cast<Index>(bi) * width + m)] =
              ColumnInfo{static_cast<int>(bi), static_cast<int>(m), band.lo, band.hi};
      },
      threads);

  return features;
}

namespace reference {

FeatureMatrix apply_feature_matrix(const TrialSet& set, const signal::FilterBank& bank,
                                   const CspBankModel& model) {
  validate(set, /*require_both_classes=*/false);
  if (set.fs() != bank.fs) throw SampleRateMismatch("trial set and filter bank disagree on fs");
  if (model.per_band.size() != bank.bands.size())
    throw DimensionMismatch("model band count does not match the filter bank");

  const Index g = static_cast<Index>(bank.bands.size());
  const Index width = 2 * model.pairs;

  FeatureMatrix features;
  features.values.resize(set.size(), g * width);
  features.layout.resize(static_cast<std::size_t>(g * width));

  for (Index i = 0; i < set.size(); ++i) {
    for (Index bi = 0; bi < g; ++bi) {
      const signal::BandFilter& band = bank.bands[static_cast<std::size_t>(bi)];
      const Matrix filtered =
          signal::filtfilt(band.b, band.a, set.trials[static_cast<std::size_t>(i)].data);
      features.values.row(i).segment(bi * width, width) =
          csp_features(filtered, model.per_band[static_cast<std::size_t>(bi)]).transpose();
    }
  }
  for (Index bi = 0; bi < g; ++bi) {
    const signal::BandFilter& band = bank.bands[static_cast<std::size_t>(bi)];
    for (Index m = 0; m < width; ++m)
      features.layout[static_cast<std::size_t>(bi * width + m)] =
          ColumnInfo{static_cast<int>(bi), static_cast<int>(m), band.lo, band.hi};
  }
  return features;
}

}  // namespace reference

}  // namespace srmtl::csp
