// Independent reference implementations ("oracles") used by the tests.
// Everything here is written from the mathematical definitions with plain
// loops, deliberately avoiding the library's own code paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "srmtl/mtl.hpp"
#include "srmtl/rng.hpp"
#include "srmtl/types.hpp"

namespace oracle {

using srmtl::Index;
using srmtl::Matrix;
using srmtl::Rng;
using srmtl::Vector;

inline Matrix random_matrix(Rng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

inline Matrix random_spd(Rng& rng, Index c) {
  const Matrix a = random_matrix(rng, c, c);
  return a * a.transpose() + 0.1 * Matrix::Identity(c, c);
}

// Loop-summation class covariance: mean over trials of X X^T, with optional
// row-mean centering and per-trial trace normalization.
inline Matrix naive_covariance(const std::vector<Matrix>& trials, bool center,
                               bool trace_normalize) {
  const Index c = trials.front().rows();
  Matrix sum = Matrix::Zero(c, c);
  for (const Matrix& raw : trials) {
    Matrix x = raw;
    if (center) {
      for (Index i = 0; i < x.rows(); ++i) {
        double mean = 0;
        for (Index t = 0; t < x.cols(); ++t) mean += x(i, t);
        mean /= static_cast<double>(x.cols());
        for (Index t = 0; t < x.cols(); ++t) x(i, t) -= mean;
      }
    }
    Matrix outer = Matrix::Zero(c, c);
    for (Index i = 0; i < c; ++i)
      for (Index j = 0; j < c; ++j)
        for (Index t = 0; t < x.cols(); ++t) outer(i, j) += x(i, t) * x(j, t);
    if (trace_normalize) outer /= outer.trace();
    sum += outer;
  }
  return sum / static_cast<double>(trials.size());
}

// Brute-force sweep of the 2-D variance ratio u'S1u / u'S2u over the unit
// circle; the maximum approximates the top generalized eigenvalue.
inline double unit_circle_top_ratio(const Matrix& s1, const Matrix& s2, int points = 3600) {
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < points; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / points;
    Vector u(2);
    u << std::cos(theta), std::sin(theta);
    best = std::max(best, u.dot(s1 * u) / u.dot(s2 * u));
  }
  return best;
}

// Plain O(P^2) DFT power spectrum of a real signal, bins 0..P/2.
inline std::vector<double> power_spectrum(const Vector& x) {
  const Index p = x.size();
  std::vector<double> power(static_cast<std::size_t>(p / 2 + 1));
  for (std::size_t k = 0; k < power.size(); ++k) {
    double re = 0, im = 0;
    for (Index t = 0; t < p; ++t) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) *
                           static_cast<double>(t) / static_cast<double>(p);
      re += x(t) * std::cos(phase);
      im += x(t) * std::sin(phase);
    }
    power[k] = re * re + im * im;
  }
  return power;
}

// Exhaustive 2-medoid partition: the pair of exemplars minimizing total
// squared distance of every point to its nearer exemplar.
inline std::vector<int> two_medoid_partition(const Matrix& points) {
  const Index n = points.rows();
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<int> best(static_cast<std::size_t>(n), 0);
  for (Index a = 0; a < n; ++a) {
    for (Index b = a + 1; b < n; ++b) {
      double cost = 0;
      std::vector<int> assign(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) {
        const double da = (points.row(i) - points.row(a)).squaredNorm();
        const double db = (points.row(i) - points.row(b)).squaredNorm();
        assign[static_cast<std::size_t>(i)] = da <= db ? 0 : 1;
        cost += std::min(da, db);
      }
      if (cost < best_cost) {
        best_cost = cost;
        best = assign;
      }
    }
  }
  return best;
}

// Lloyd k-means with several seeded restarts; returns the assignment of the
// lowest-inertia run. Deterministic for a fixed seed.
inline std::vector<int> kmeans(const Matrix& points, int k, std::uint64_t seed,
                               int restarts = 10, int iters = 100) {
  const Index n = points.rows();
  Rng rng(seed);
  double best_inertia = std::numeric_limits<double>::infinity();
  std::vector<int> best(static_cast<std::size_t>(n), 0);
  for (int r = 0; r < restarts; ++r) {
    Matrix centers(k, points.cols());
    for (int j = 0; j < k; ++j)
      centers.row(j) = points.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    for (int it = 0; it < iters; ++it) {
      bool changed = false;
      for (Index i = 0; i < n; ++i) {
        int arg = 0;
        double bestd = std::numeric_limits<double>::infinity();
        for (int j = 0; j < k; ++j) {
          const double d = (points.row(i) - centers.row(j)).squaredNorm();
          if (d < bestd) {
            bestd = d;
            arg = j;
          }
        }
        if (assign[static_cast<std::size_t>(i)] != arg) changed = true;
        assign[static_cast<std::size_t>(i)] = arg;
      }
      for (int j = 0; j < k; ++j) {
        Vector mean = Vector::Zero(points.cols());
        int count = 0;
        for (Index i = 0; i < n; ++i)
          if (assign[static_cast<std::size_t>(i)] == j) {
            mean += points.row(i).transpose();
            ++count;
          }
        if (count > 0) centers.row(j) = mean.transpose() / count;
      }
      if (!changed) break;
    }
    double inertia = 0;
    for (Index i = 0; i < n; ++i)
      inertia += (points.row(i) - centers.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best = assign;
    }
  }
  return best;
}

// Fraction of points on which two 2-way partitions agree, up to swapping the
// two cluster ids.
inline double two_way_agreement(const std::vector<int>& a, const std::vector<int>& b) {
  int same = 0, swapped = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) ++same;
    if (a[i] == 1 - b[i]) ++swapped;
  }
  return static_cast<double>(std::max(same, swapped)) / static_cast<double>(a.size());
}

inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const auto n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> row_sums, col_sums;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1;
    row_sums[a[i]] += 1;
    col_sums[b[i]] += 1;
  }
  const auto choose2 = [](double m) { return m * (m - 1) / 2; };
  double sum_cells = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& [key, v] : cells) sum_cells += choose2(v);
  for (const auto& [key, v] : row_sums) sum_rows += choose2(v);
  for (const auto& [key, v] : col_sums) sum_cols += choose2(v);
  const double expected = sum_rows * sum_cols / choose2(n);
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;  // both partitions trivial
  return (sum_cells - expected) / (max_index - expected);
}

// ---------------------------------------------------------------------------
// Joint feature-selection objective, written directly from its definition.

inline double l21_norm_direct(const Matrix& w) {
  double sum = 0;
  for (Index i = 0; i < w.rows(); ++i) sum += w.row(i).norm();
  return sum;
}

inline double objective_direct(const srmtl::mtl::SrmtlProblem& p, const Matrix& w) {
  const Matrix fw = p.F * w;
  double value = 0.5 * (p.Y - fw).squaredNorm() + p.lambda1 * l21_norm_direct(w);
  if (p.lambda2 != 0) value += p.lambda2 * (fw.transpose() * p.L * fw).trace();
  return value;
}

inline Matrix smooth_part_grad_direct(const srmtl::mtl::SrmtlProblem& p, const Matrix& w) {
  Matrix g = p.F.transpose() * (p.F * w - p.Y);
  if (p.lambda2 != 0) g += 2.0 * p.lambda2 * p.F.transpose() * (p.L * (p.F * w));
  return g;
}

// Central finite differences of the smooth part.
inline Matrix finite_diff_smooth_grad(const srmtl::mtl::SrmtlProblem& p, const Matrix& w,
                                      double h = 1e-6) {
  const auto smooth = [&](const Matrix& m) {
    const Matrix fw = p.F * m;
    double value = 0.5 * (p.Y - fw).squaredNorm();
    if (p.lambda2 != 0) value += p.lambda2 * (fw.transpose() * p.L * fw).trace();
    return value;
  };
  Matrix g(w.rows(), w.cols());
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = 0; j < w.cols(); ++j) {
      Matrix plus = w, minus = w;
      plus(i, j) += h;
      minus(i, j) -= h;
      g(i, j) = (smooth(plus) - smooth(minus)) / (2 * h);
    }
  }
  return g;
}

// Minimizes the joint objective independently of the library solver:
// subgradient descent with the strongly-convex step schedule 2 / (mu (t+2)),
// tracking the best iterate, then block-coordinate descent over rows until
// the iterates stop moving. Each BCD row update is the closed-form minimizer
// of its one-row subproblem, and BCD converges to the exact optimum of this
// separable nonsmooth convex objective, so the returned value pins the
// optimum far below the comparison tolerances.
inline double min_objective(const srmtl::mtl::SrmtlProblem& p, int subgrad_iters = 100000) {
  const Index d = p.F.cols(), k = p.Y.cols();
  Matrix h = p.F.transpose() * p.F;
  if (p.lambda2 != 0) h += 2.0 * p.lambda2 * p.F.transpose() * (p.L * p.F);
  const Matrix fty = p.F.transpose() * p.Y;
  const double y_sq = p.Y.squaredNorm();
  const auto value = [&](const Matrix& w) {
    return 0.5 * y_sq - (w.cwiseProduct(fty)).sum() + 0.5 * (w.cwiseProduct(h * w)).sum() +
           p.lambda1 * l21_norm_direct(w);
  };

  const double mu = Eigen::SelfAdjointEigenSolver<Matrix>(h).eigenvalues().minCoeff();
  Matrix w = Matrix::Zero(d, k);
  Matrix best_w = w;
  double best = value(w);
  for (int t = 0; t < subgrad_iters; ++t) {
    Matrix g = h * w - fty;
    for (Index i = 0; i < d; ++i) {
      const double norm = w.row(i).norm();
      if (norm > 0) g.row(i) += (p.lambda1 / norm) * w.row(i);
    }
    w -= (2.0 / (mu * (t + 2))) * g;
    const double v = value(w);
    if (v < best) {
      best = v;
      best_w = w;
    }
  }

  // Row-wise coordinate descent from the best subgradient iterate. With all
  // other rows fixed, row i minimizes
  //   1/2 h_ii ||w||^2 - <r, w> + lambda1 ||w||,  r = fty_i - sum_{j!=i} h_ij w_j,
  // whose minimizer is ((||r|| - lambda1) / (h_ii ||r||)) r when ||r|| exceeds
  // lambda1 and zero otherwise.
  w = best_w;
  for (int sweep = 0; sweep < 20000; ++sweep) {
    double moved = 0;
    for (Index i = 0; i < d; ++i) {
      const Eigen::RowVectorXd r = fty.row(i) - h.row(i) * w + h(i, i) * w.row(i);
      const double norm_r = r.norm();
      Eigen::RowVectorXd updated = Eigen::RowVectorXd::Zero(k);
      if (norm_r > p.lambda1) updated = ((norm_r - p.lambda1) / (h(i, i) * norm_r)) * r;
      moved = std::max(moved, (updated - w.row(i)).norm());
      w.row(i) = updated;
    }
    if (moved < 1e-15) break;
  }
  return std::min(best, value(w));
}

inline double soft_threshold(double z, double tau) {
  if (z > tau) return z - tau;
  if (z < -tau) return z + tau;
  return 0;
}

// ---------------------------------------------------------------------------
// Exact small SVM: maximize sum(alpha) - 1/2 alpha'Q alpha over the box
// [0, C]^n by enumerating every {lower, upper, free} face (n <= 8), with
// Q_ij = y_i y_j (x_i'x_j + 1) — the same augmented-bias formulation the
// trainer uses. Returns the optimal primal objective and the weight vector
// (last entry is the bias).
struct SvmOracle {
  double primal = 0;
  Vector w;  // length d+1
};

inline SvmOracle svm_qp_oracle(const Matrix& x, const std::vector<int>& y, double c) {
  const Index n = x.rows(), d = x.cols();
  Matrix aug(n, d + 1);
  aug.leftCols(d) = x;
  aug.col(d).setOnes();
  Matrix q(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      q(i, j) = y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] *
                aug.row(i).dot(aug.row(j));

  double best_dual = -std::numeric_limits<double>::infinity();
  Vector best_alpha = Vector::Zero(n);
  std::vector<int> state(static_cast<std::size_t>(n), 0);  // 0 = at 0, 1 = at C, 2 = free
  const long combos = static_cast<long>(std::pow(3.0, static_cast<double>(n)));
  for (long code = 0; code < combos; ++code) {
    long rest = code;
    std::vector<Index> free;
    Vector alpha = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) {
      const int s = static_cast<int>(rest % 3);
      rest /= 3;
      state[static_cast<std::size_t>(i)] = s;
      if (s == 1) alpha(i) = c;
      if (s == 2) free.push_back(i);
    }
    if (!free.empty()) {
      Matrix qff(static_cast<Index>(free.size()), static_cast<Index>(free.size()));
      Vector rhs(static_cast<Index>(free.size()));
      for (std::size_t a = 0; a < free.size(); ++a) {
        rhs(static_cast<Index>(a)) = 1.0;
        for (Index j = 0; j < n; ++j)
          if (state[static_cast<std::size_t>(j)] == 1)
            rhs(static_cast<Index>(a)) -= q(free[a], j) * c;
        for (std::size_t b = 0; b < free.size(); ++b)
          qff(static_cast<Index>(a), static_cast<Index>(b)) = q(free[a], free[b]);
      }
      const Vector alpha_free = qff.fullPivLu().solve(rhs);
      if ((qff * alpha_free - rhs).norm() > 1e-8 * (1 + rhs.norm())) continue;  // singular face
      bool feasible = true;
      for (Index a = 0; a < alpha_free.size(); ++a)
        if (alpha_free(a) < -1e-9 || alpha_free(a) > c + 1e-9) feasible = false;
      if (!feasible) continue;
      for (std::size_t a = 0; a < free.size(); ++a)
        alpha(free[a]) = std::clamp(alpha_free(static_cast<Index>(a)), 0.0, c);
    }
    const double dual = alpha.sum() - 0.5 * alpha.dot(q * alpha);
    if (dual > best_dual) {
      best_dual = dual;
      best_alpha = alpha;
    }
  }

  SvmOracle result;
  result.w = Vector::Zero(d + 1);
  for (Index i = 0; i < n; ++i)
    result.w += best_alpha(i) * y[static_cast<std::size_t>(i)] * aug.row(i).transpose();
  double loss = 0;
  for (Index i = 0; i < n; ++i)
    loss += std::max(0.0, 1.0 - y[static_cast<std::size_t>(i)] * aug.row(i).dot(result.w));
  result.primal = 0.5 * result.w.squaredNorm() + c * loss;
  return result;
}

// Closed-form squared point-biserial correlation:
// r = (m1 - m2) sqrt(n1 n2) / (n s_n), with s_n the population std.
inline double point_biserial_sq(const Vector& feature, const std::vector<int>& labels) {
  const auto n = static_cast<double>(feature.size());
  double m1 = 0, m2 = 0, n1 = 0, n2 = 0;
  for (Index i = 0; i < feature.size(); ++i) {
    if (labels[static_cast<std::size_t>(i)] == 1) {
      m1 += feature(i);
      ++n1;
    } else {
      m2 += feature(i);
      ++n2;
    }
  }
  m1 /= n1;
  m2 /= n2;
  const double mean = feature.mean();
  const double s_n = std::sqrt((feature.array() - mean).square().sum() / n);
  const double r = (m1 - m2) / s_n * std::sqrt(n1 * n2) / n;
  return r * r;
}

// Removes a directory tree and recreates it empty; for test scratch space.
inline std::filesystem::path fresh_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
