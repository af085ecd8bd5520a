#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace srmtl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// One EEG epoch: a channels x samples matrix with its class label.
struct Trial {
  Matrix data;    // C x P, microvolts
  int label = 0;  // class id, 1 or 2
  double fs = 0;  // sampling rate, Hz
};

/// An ordered, shape-consistent collection of trials.
struct TrialSet {
  std::vector<Trial> trials;
  std::vector<std::string> channel_names;

  Index size() const { return static_cast<Index>(trials.size()); }
  Index channels() const { return trials.empty() ? 0 : trials.front().data.rows(); }
  Index samples() const { return trials.empty() ? 0 : trials.front().data.cols(); }
  double fs() const { return trials.empty() ? 0.0 : trials.front().fs; }

  std::vector<int> labels() const;
};

// Checks shared shape, finite samples, label domain and basic dimension
// bounds. When require_both_classes is set, both class ids 1 and 2 must
// occur (training sets).
void validate(const TrialSet& set, bool require_both_classes);

// Subset by trial indices; preserves the given order.
TrialSet subset(const TrialSet& set, const std::vector<int>& indices);

}  // namespace srmtl
