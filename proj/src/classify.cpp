#include "srmtl/classify.hpp"

#include <cmath>
#include <string>

#include <json.hpp>

#include "srmtl/errors.hpp"
#include "srmtl/rng.hpp"

namespace srmtl::classify {

namespace {

constexpr int kMaxEpochs = 20000;
constexpr double kGapTol = 1e-6;

double hinge_primal(const Matrix& x, const std::vector<int>& y, const Vector& w, double c) {
  double loss = 0.0;
  for (Index i = 0; i < x.rows(); ++i)
    loss += std::max(0.0, 1.0 - y[static_cast<std::size_t>(i)] * x.row(i).dot(w));
  return 0.5 * w.squaredNorm() + c * loss;
}

}  // namespace

SvmModel train_svm(const Matrix& features, const std::vector<int>& y_sign, double c,
                   std::uint64_t seed, SvmDiagnostics* diag) {
  const Index n = features.rows();
  const Index d = features.cols();
  if (n < 2) throw SingleClass("training needs at least two trials");
  if (d < 1) throw DimensionMismatch("training needs at least one feature");
  if (static_cast<Index>(y_sign.size()) != n)
    throw DimensionMismatch("label count does not match feature rows");
  if (!(c > 0) || !std::isfinite(c)) throw InvalidConfig("C must be positive and finite");
  if (!features.allFinite()) throw NonFiniteSample("features contain NaN or Inf");

  bool pos = false, neg = false;
  for (int y : y_sign) {
    if (y == 1) pos = true;
    else if (y == -1) neg = true;
    else throw InvalidConfig("labels must be +1 or -1");
  }
  if (!pos || !neg) throw SingleClass("training labels cover only one class");

  SvmModel model;
  model.c = c;
  model.means.resize(d);
  model.scales.resize(d);
  for (Index j = 0; j < d; ++j) {
    const double mean = features.col(j).mean();
    // Population (1/n) std: replicating every sample then leaves the
    // standardized problem, and so the decision function, exactly unchanged.
    const double sd =
        std::sqrt((features.col(j).array() - mean).square().sum() / static_cast<double>(n));
    model.means(j) = mean;
    model.scales(j) = sd > 1e-12 ? sd : 1.0;
  }

  // Standardize and augment with a constant-1 column: the bias rides inside
  // w (and is regularized with it), which keeps the dual box-constrained
  // with no equality constraint.
  Matrix x(n, d + 1);
  for (Index j = 0; j < d; ++j)
    x.col(j) = (features.col(j).array() - model.means(j)) / model.scales(j);
  x.col(d).setOnes();

  Vector q_diag(n);
  for (Index i = 0; i < n; ++i) q_diag(i) = x.row(i).squaredNorm();

  Vector alpha = Vector::Zero(n);
  Vector w = Vector::Zero(d + 1);
  Rng rng(seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);

  double gap = 0, primal = 0;
  int epoch = 0;
  for (; epoch < kMaxEpochs; ++epoch) {
    rng.shuffle(order);
    for (int idx : order) {
      const Index i = idx;
      const double yi = y_sign[static_cast<std::size_t>(i)];
      const double g = yi * x.row(i).dot(w) - 1.0;

      double pg = g;
      if (alpha(i) <= 0.0 && g >= 0.0) pg = 0.0;
      if (alpha(i) >= c && g <= 0.0) pg = 0.0;
      if (pg == 0.0) continue;

      const double old = alpha(i);
      alpha(i) = std::min(std::max(old - g / q_diag(i), 0.0), c);
      if (alpha(i) != old) w += (alpha(i) - old) * yi * x.row(i).transpose();
    }

    primal = hinge_primal(x, y_sign, w, c);
    const double dual = alpha.sum() - 0.5 * w.squaredNorm();
    gap = primal - dual;
    if (gap <= kGapTol * (1.0 + std::abs(primal))) break;
  }
  if (epoch == kMaxEpochs)
    throw NoConvergence("duality gap " + std::to_string(gap) + " after " +
                        std::to_string(kMaxEpochs) + " epochs");

  model.weights = w.head(d);
  model.bias = w(d);
  if (diag) {
    diag->alpha = alpha;
    diag->duality_gap = gap;
    diag->primal = primal;
    diag->epochs = epoch + 1;
  }
  return model;
}

SvmModel with_indices(SvmModel model, std::vector<int> feature_indices) {
  if (static_cast<Index>(feature_indices.size()) != model.weights.size())
    throw DimensionMismatch("selection size does not match the trained weight count");
  model.feature_indices = std::move(feature_indices);
  return model;
}

Prediction predict(const SvmModel& model, const Vector& full_features) {
  Vector selected;
  if (model.feature_indices.empty()) {
    if (full_features.size() != model.weights.size())
      throw DimensionMismatch("feature vector does not match the model");
    selected = full_features;
  } else {
    selected.resize(static_cast<Index>(model.feature_indices.size()));
    for (std::size_t j = 0; j < model.feature_indices.size(); ++j) {
      const int idx = model.feature_indices[j];
      if (idx < 0 || idx >= full_features.size())
        throw IndexOutOfRange("selected feature " + std::to_string(idx) +
                              " outside the feature vector");
      selected(static_cast<Index>(j)) = full_features(idx);
    }
  }

  const Vector z = (selected - model.means).cwiseQuotient(model.scales);
  Prediction out;
  out.margin = model.weights.dot(z) + model.bias;
  out.label = out.margin >= 0.0 ? 1 : -1;
  return out;
}

std::string to_json(const SvmModel& model) {
  nlohmann::json j;
  j["weights"] = std::vector<double>(model.weights.begin(), model.weights.end());
  j["bias"] = model.bias;
  j["c"] = model.c;
  j["feature_indices"] = model.feature_indices;
  j["means"] = std::vector<double>(model.means.begin(), model.means.end());
  j["scales"] = std::vector<double>(model.scales.begin(), model.scales.end());
  return j.dump(2);
}

SvmModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaViolation(std::string("model file is not valid JSON: ") + e.what());
  }
  for (const char* key : {"weights", "bias", "c", "feature_indices", "means", "scales"}) {
    if (!j.contains(key))
      throw SchemaViolation("model file missing key '" + std::string(key) + "'");
  }

  SvmModel model;
  const auto to_vector = [](const nlohmann::json& arr) {
    Vector v(static_cast<Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Index>(i)) = arr[i].get<double>();
    return v;
  };
  model.weights = to_vector(j["weights"]);
  model.bias = j["bias"].get<double>();
  model.c = j["c"].get<double>();
  model.feature_indices = j["feature_indices"].get<std::vector<int>>();
  model.means = to_vector(j["means"]);
  model.scales = to_vector(j["scales"]);
  if (model.means.size() != model.weights.size() || model.scales.size() != model.weights.size())
    throw SchemaViolation("model standardization arrays do not match the weight count");
  return model;
}

}  // namespace srmtl::classify
