#pragma once

#include <utility>
#include <vector>

#include "srmtl/errors.hpp"
#include "srmtl/types.hpp"

namespace srmtl::mtl {

/// One joint feature-selection problem:
///   min_W 1/2 ||Y - F W||_F^2 + lambda1 ||W||_{2,1} + lambda2 tr(W^T F^T L F W)
/// L may be empty (0 x 0) when lambda2 == 0.
struct SrmtlProblem {
  Matrix F;  // N x D features
  Matrix Y;  // N x K encoded labels
  Matrix L;  // N x N graph Laplacian
  double lambda1 = 0;
  double lambda2 = 0;
};

void validate(const SrmtlProblem& p);

struct SolverOptions {
  int max_iters = 200;
  double tol = 1e-6;  // on |f(t) - f(t+1)| / f(t)
};

/// Accelerated proximal gradient state, kept for traces and diagnostics.
struct SolverState {
  int iterations = 0;
  bool converged = false;
  double alpha = 1.0;  // momentum coefficient at exit
  double mu = 1.0;     // step-size parameter at exit (monotone across iterations)
  std::vector<double> objective;         // full objective after each iteration
  std::vector<double> normalized_error;  // |f(t)-f(t+1)|/f(t)
  std::vector<double> mu_trace;          // accepted mu per iteration
  std::vector<double> majorization_gap;  // G_mu - (f + L) at acceptance, >= 0
};

/// Raised when the objective turns NaN/Inf; carries the trace so far.
struct NonFinite : NumericError {
  NonFinite(const std::string& what, SolverState state_)
      : NumericError(what), state(std::move(state_)) {}
  SolverState state;
};

// Full objective value at W.
double objective(const SrmtlProblem& p, const Matrix& W);

// Gradient of the smooth part: F^T(F W - Y) + 2 lambda2 F^T L F W.
Matrix smooth_grad(const SrmtlProblem& p, const Matrix& W);

// Row-wise group soft-threshold: row_d -> max(0, 1 - tau/||v_d||) v_d.
// Rows at or below the threshold come out exactly zero.
Matrix prox_l21(const Matrix& V, double tau);

// APG with backtracking line search (step doubling, monotone mu) and
// momentum; starts from the all-ones matrix. Stops on max_iters or when the
// normalized objective change drops below tol.
std::pair<Matrix, SolverState> solve_srmtl(const SrmtlProblem& p,
                                           const SolverOptions& opts = {});

// Single-task lasso via the same solver: Y is the single +-1 column, no
// Laplacian. The l2,1 norm of a one-column matrix is the l1 norm.
std::pair<Vector, SolverState> solve_lasso(const Matrix& F, const Vector& y, double lambda,
                                           const SolverOptions& opts = {});

/// Shared Gram-matrix precomputation for sweeping many (lambda1, lambda2)
/// pairs over one fixed (F, Y, L) triple: F'F, F'Y and F'LF are built once,
/// so each grid cell costs only the solver iterations. solve() follows the
/// exact arithmetic of solve_srmtl, so results agree bit for bit.
class GramSweep {
 public:
  // L may be 0 x 0 when no solve will use lambda2 > 0.
  GramSweep(const Matrix& F, const Matrix& Y, const Matrix& L);

  std::pair<Matrix, SolverState> solve(double lambda1, double lambda2,
                                       const SolverOptions& opts = {}) const;

 private:
  Matrix ftf_, fty_, ftlf_;
  double y_sq_ = 0;
};

// Indices d with ||row_d(W)|| > floor, ascending. Throws EmptySelection
// when nothing survives.
std::vector<int> select_features(const Matrix& W, double floor = 1e-12);

}  // namespace srmtl::mtl
