#include "srmtl/subclass.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "srmtl/errors.hpp"

namespace srmtl::subclass {

namespace {

Matrix zscore_columns(const Matrix& points) {
  Matrix out = points;
  for (Index j = 0; j < out.cols(); ++j) {
    const double mean = out.col(j).mean();
    double sd = 0.0;
    if (out.rows() > 1)
      sd = std::sqrt((out.col(j).array() - mean).square().sum() /
                     static_cast<double>(out.rows() - 1));
    out.col(j).array() -= mean;
    if (sd > 1e-12) out.col(j) /= sd;  // constant columns stay centered, unscaled
  }
  return out;
}

// -||x_i - x_k||^2 off the diagonal; the diagonal is filled by the caller.
Matrix similarity_matrix(const Matrix& points) {
  const Index n = points.rows();
  Matrix s(n, n);
  for (Index i = 0; i < n; ++i) {
    s(i, i) = 0.0;
    for (Index k = i + 1; k < n; ++k) {
      const double d2 = (points.row(i) - points.row(k)).squaredNorm();
      s(i, k) = -d2;
      s(k, i) = -d2;
    }
  }
  return s;
}

double median_off_diagonal(const Matrix& s) {
  const Index n = s.rows();
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n * (n - 1)));
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < n; ++k)
      if (i != k) values.push_back(s(i, k));
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  return m % 2 == 1 ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
}

int medoid_index(const Matrix& s) {
  const Index n = s.rows();
  int best = 0;
  double best_total = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < n; ++k) {
    double total = 0.0;
    for (Index i = 0; i < n; ++i)
      if (i != k) total += s(i, k);
    if (total > best_total) {  // strict: ties keep the lowest index
      best_total = total;
      best = static_cast<int>(k);
    }
  }
  return best;
}

}  // namespace

void validate(const ApConfig& cfg) {
  if (!(cfg.damping >= 0.5 && cfg.damping < 1.0))
    throw InvalidConfig("damping must lie in [0.5, 1)");
  if (cfg.convergence_window < 1) throw InvalidConfig("convergence_window must be >= 1");
  if (cfg.max_iters < cfg.convergence_window)
    throw InvalidConfig("max_iters must be >= convergence_window");
}

ApResult ap_cluster(const Matrix& points, const ApConfig& cfg) {
  validate(cfg);
  const Index n = points.rows();
  if (n < 1) throw ShapeMismatch("clustering needs at least one point");
  if (!points.allFinite()) throw NonFiniteSample("clustering input contains NaN or Inf");

  ApResult result;
  if (n == 1) {
    result.assignment = {0};
    result.exemplars = {0};
    return result;
  }

  Matrix s = similarity_matrix(points);
  const double preference = cfg.preference ? *cfg.preference : median_off_diagonal(s);
  s.diagonal().setConstant(preference);

  Matrix r = Matrix::Zero(n, n);
  Matrix a = Matrix::Zero(n, n);
  const double keep = cfg.damping;
  const double mix = 1.0 - cfg.damping;

  std::vector<int> exemplars, prev_exemplars;
  int stable = 0;
  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    // responsibilities: r(i,k) = s(i,k) - max_{k' != k} (a + s)(i,k')
    for (Index i = 0; i < n; ++i) {
      double max1 = -std::numeric_limits<double>::infinity();
      double max2 = max1;
      Index arg1 = 0;
      for (Index k = 0; k < n; ++k) {
        const double v = a(i, k) + s(i, k);
        if (v > max1) {  // strict: the earliest maximum wins ties
          max2 = max1;
          max1 = v;
          arg1 = k;
        } else if (v > max2) {
          max2 = v;
        }
      }
      for (Index k = 0; k < n; ++k)
        r(i, k) = keep * r(i, k) + mix * (s(i, k) - (k == arg1 ? max2 : max1));
    }

    // availabilities: a(i,k) = min(0, r(k,k) + sum_{i' not in {i,k}} max(0, r(i',k)))
    // and a(k,k) = sum_{i' != k} max(0, r(i',k))
    for (Index k = 0; k < n; ++k) {
      double positive_sum = 0.0;
      for (Index i = 0; i < n; ++i)
        if (i != k) positive_sum += std::max(0.0, r(i, k));
      for (Index i = 0; i < n; ++i) {
        double value;
        if (i == k) {
          value = positive_sum;
        } else {
          value = std::min(0.0, r(k, k) + positive_sum - std::max(0.0, r(i, k)));
        }
        a(i, k) = keep * a(i, k) + mix * value;
      }
    }

    exemplars.clear();
    for (Index k = 0; k < n; ++k)
      if (r(k, k) + a(k, k) > 0) exemplars.push_back(static_cast<int>(k));

    if (exemplars == prev_exemplars) {
      if (++stable >= cfg.convergence_window) {
        ++iter;
        break;
      }
    } else {
      stable = 0;
      prev_exemplars = exemplars;
    }
  }
  result.iterations = iter;

  if (exemplars.empty()) {
    // No point self-elected; collapse to one cluster around the medoid.
    result.fallback_single_cluster = true;
    result.exemplars = {medoid_index(s)};
    result.assignment.assign(static_cast<std::size_t>(n), 0);
    return result;
  }

  result.exemplars = exemplars;
  result.assignment.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    int best = 0;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < exemplars.size(); ++c) {
      const double sim = s(i, exemplars[c]);
      if (sim > best_sim) {
        best_sim = sim;
        best = static_cast<int>(c);
      }
    }
    result.assignment[static_cast<std::size_t>(i)] = best;
  }
  // Exemplars stay in their own cluster even if another exemplar's
  // similarity (the shared preference) ties.
  for (std::size_t c = 0; c < exemplars.size(); ++c)
    result.assignment[static_cast<std::size_t>(exemplars[c])] = static_cast<int>(c);
  return result;
}

void validate(const SubclassPartition& p, const std::vector<int>& labels) {
  if (p.assignment.size() != labels.size())
    throw ShapeMismatch("partition size does not match label count");
  if (p.num_clusters < 1) throw ShapeMismatch("partition has no clusters");
  if (static_cast<int>(p.exemplars.size()) != p.num_clusters ||
      static_cast<int>(p.class_of_cluster.size()) != p.num_clusters)
    throw ShapeMismatch("per-cluster arrays do not match the cluster count");

  std::vector<int> sizes(static_cast<std::size_t>(p.num_clusters), 0);
  for (std::size_t i = 0; i < p.assignment.size(); ++i) {
    const int k = p.assignment[i];
    if (k < 0 || k >= p.num_clusters)
      throw ShapeMismatch("cluster id out of range at trial " + std::to_string(i));
    if (labels[i] != p.class_of_cluster[static_cast<std::size_t>(k)])
      throw ShapeMismatch("cluster " + std::to_string(k) + " mixes original classes");
    ++sizes[static_cast<std::size_t>(k)];
  }
  for (int k = 0; k < p.num_clusters; ++k) {
    if (sizes[static_cast<std::size_t>(k)] == 0)
      throw ShapeMismatch("cluster " + std::to_string(k) + " is empty");
    const int ex = p.exemplars[static_cast<std::size_t>(k)];
    if (ex < 0 || ex >= static_cast<int>(p.assignment.size()) ||
        p.assignment[static_cast<std::size_t>(ex)] != k)
      throw ShapeMismatch("exemplar of cluster " + std::to_string(k) +
                          " is not a member of it");
  }
}

SubclassPartition discover_subclasses(const Matrix& features, const std::vector<int>& labels,
                                      const ApConfig& cfg) {
  if (features.rows() != static_cast<Index>(labels.size()))
    throw ShapeMismatch("feature rows do not match label count");

  SubclassPartition partition;
  partition.assignment.assign(labels.size(), -1);

  for (int cls : {1, 2}) {
    std::vector<int> rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) rows.push_back(static_cast<int>(i));
    if (rows.empty()) throw EmptyClass("class " + std::to_string(cls) + " has no trials");

    Matrix class_points(static_cast<Index>(rows.size()), features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      class_points.row(static_cast<Index>(i)) = features.row(rows[i]);
    if (cfg.zscore_features) class_points = zscore_columns(class_points);

    const ApResult ap = ap_cluster(class_points, cfg);
    const int base = partition.num_clusters;
    for (std::size_t i = 0; i < rows.size(); ++i)
      partition.assignment[static_cast<std::size_t>(rows[i])] = base + ap.assignment[i];
    for (int ex : ap.exemplars) {
      partition.exemplars.push_back(rows[static_cast<std::size_t>(ex)]);
      partition.class_of_cluster.push_back(cls);
    }
    partition.num_clusters += static_cast<int>(ap.exemplars.size());
    partition.used_fallback = partition.used_fallback || ap.fallback_single_cluster;
  }

  validate(partition, labels);
  return partition;
}

Matrix encode_labels(const SubclassPartition& partition) {
  const Index n = static_cast<Index>(partition.assignment.size());
  Matrix y = Matrix::Zero(n, partition.num_clusters);
  for (Index i = 0; i < n; ++i) y(i, partition.assignment[static_cast<std::size_t>(i)]) = 1.0;
  return y;
}

Matrix build_similarity(const SubclassPartition& partition) {
  const Index n = static_cast<Index>(partition.assignment.size());
  Matrix s(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      s(i, j) = partition.assignment[static_cast<std::size_t>(i)] ==
                        partition.assignment[static_cast<std::size_t>(j)]
                    ? 1.0
                    : 0.0;
  return s;
}

Matrix build_laplacian(const Matrix& similarity) {
  if (similarity.rows() != similarity.cols())
    throw ShapeMismatch("similarity matrix must be square");
  Matrix l = -similarity;
  l.diagonal() += similarity.rowwise().sum();
  return l;
}

}  // namespace srmtl::subclass
