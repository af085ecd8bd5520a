#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "srmtl/types.hpp"

namespace srmtl::classify {

/// Linear soft-margin SVM over a feature subset, with the training-fold
/// standardization baked in.
struct SvmModel {
  Vector weights;                    // over selected features
  double bias = 0;
  double c = 1.0;
  std::vector<int> feature_indices;  // columns of the full feature vector
  Vector means, scales;              // per selected feature, from training
};

struct SvmDiagnostics {
  Vector alpha;
  double duality_gap = 0;
  double primal = 0;
  int epochs = 0;
};

// Dual coordinate descent on the L1-loss SVM (bias through an augmented
// constant feature), random permutation per epoch from `seed`. Converges to
// duality gap <= 1e-6 * (1 + |primal|).
SvmModel train_svm(const Matrix& features, const std::vector<int>& y_sign, double c,
                   std::uint64_t seed = 1, SvmDiagnostics* diag = nullptr);

// Attaches the column selection to a trained model so predict() can gather
// from full-length feature vectors.
SvmModel with_indices(SvmModel model, std::vector<int> feature_indices);

struct Prediction {
  int label = 0;      // +-1; an exact zero margin resolves to +1
  double margin = 0;
};

Prediction predict(const SvmModel& model, const Vector& full_features);

std::string to_json(const SvmModel& model);
SvmModel model_from_json(const std::string& text);

}  // namespace srmtl::classify
