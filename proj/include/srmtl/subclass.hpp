#pragma once

#include <optional>
#include <vector>

#include "srmtl/types.hpp"

namespace srmtl::subclass {

/// Affinity propagation settings. `preference` empty means the median of
/// the off-diagonal similarities. Message passing is damped and fully
/// deterministic: no noise is injected, ties resolve to the lowest index.
struct ApConfig {
  double damping = 0.7;
  int max_iters = 500;
  int convergence_window = 50;
  std::optional<double> preference;  // nullopt = median rule
  // Optional per-class column z-scoring in discover_subclasses, for feature
  // files that were not standardized upstream. ap_cluster itself always
  // works on the points as given. The evaluation pipeline standardizes with
  // training-fold statistics instead, so this stays off there.
  bool zscore_features = false;
};

void validate(const ApConfig& cfg);

struct ApResult {
  std::vector<int> assignment;  // per-point cluster id in [0, K)
  std::vector<int> exemplars;   // point index per cluster, ascending
  bool fallback_single_cluster = false;  // no self-election: medoid fallback
  int iterations = 0;
};

// Exemplar-based clustering by responsibility/availability message passing
// on s(i,k) = -||x_i - x_k||^2. Exemplars are the points with
// r(k,k) + a(k,k) > 0 at convergence; every point joins the exemplar with
// the highest similarity. If no point self-elects, falls back to a single
// cluster around the medoid and flags it.
ApResult ap_cluster(const Matrix& points, const ApConfig& cfg);

/// A per-class clustering merged over both classes. Cluster ids are global:
/// class-1 clusters first, then class-2, each in per-class exemplar order.
struct SubclassPartition {
  std::vector<int> assignment;        // per-trial global cluster id
  std::vector<int> exemplars;         // per-cluster trial index
  std::vector<int> class_of_cluster;  // per-cluster original class id
  int num_clusters = 0;
  bool used_fallback = false;
};

void validate(const SubclassPartition& p, const std::vector<int>& labels);

// Runs ap_cluster independently on each class's rows of `features`.
SubclassPartition discover_subclasses(const Matrix& features, const std::vector<int>& labels,
                                      const ApConfig& cfg);

// One-versus-all label matrix: y_ik = 1 iff trial i is in cluster k.
Matrix encode_labels(const SubclassPartition& partition);

// Binary same-cluster similarity with unit diagonal.
Matrix build_similarity(const SubclassPartition& partition);

// L = D - S with d_ii = sum_j s_ij.
Matrix build_laplacian(const Matrix& similarity);

}  // namespace srmtl::subclass
