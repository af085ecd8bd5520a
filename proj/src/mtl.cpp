#include "srmtl/mtl.hpp"

#include <cmath>
#include <string>

namespace srmtl::mtl {

namespace {

double l21_norm(const Matrix& w) {
  double total = 0.0;
  for (Index d = 0; d < w.rows(); ++d) total += w.row(d).norm();
  return total;
}

// APG core on the Gram form of the smooth part:
//   f(W) = 1/2 ||Y||^2 - <W, F'Y> + 1/2 <W, H W>,  H = F'F + 2 lambda2 F'LF
// so grad f(W) = H W - F'Y, and each iteration costs D^2 K instead of N D K.
std::pair<Matrix, SolverState> apg(const Matrix& h, const Matrix& fty, double y_sq,
                                   double lambda1, const SolverOptions& opts) {
  if (opts.max_iters < 1) throw InvalidConfig("solver needs at least one iteration");
  if (!(opts.tol >= 0)) throw InvalidConfig("solver tolerance must be >= 0");

  const auto smooth = [&](const Matrix& w) {
    return 0.5 * y_sq - w.cwiseProduct(fty).sum() + 0.5 * w.cwiseProduct(h * w).sum();
  };

  Matrix w_prev = Matrix::Ones(fty.rows(), fty.cols());
  Matrix w_cur = w_prev;
  double alpha_prev = 1.0;
  double mu = 1.0;

  SolverState state;
  double obj_prev = smooth(w_cur) + lambda1 * l21_norm(w_cur);

  for (int t = 1; t <= opts.max_iters; ++t) {
    const double alpha_cur = (1.0 + std::sqrt(1.0 + 4.0 * alpha_prev * alpha_prev)) / 2.0;
    const Matrix search = w_cur + ((alpha_prev - 1.0) / alpha_cur) * (w_cur - w_prev);

    const double f_search = smooth(search);
    const Matrix grad = h * search - fty;

    // Backtracking: double mu until the quadratic model at `search`
    // majorizes the smooth part at the prox step. mu never resets, so it
    // is monotone across iterations.
    Matrix w_next;
    double f_next = 0, gap = 0;
    bool accepted = false;
    for (int doubling = 0; doubling <= 60; ++doubling) {
      w_next = prox_l21(search - grad / mu, lambda1 / mu);
      const Matrix delta = w_next - search;
      const double quad =
          f_search + grad.cwiseProduct(delta).sum() + 0.5 * mu * delta.squaredNorm();
      f_next = smooth(w_next);
      gap = quad - f_next;
      if (gap >= -1e-13 * (1.0 + std::abs(f_next))) {
        accepted = true;
        break;
      }
      mu *= 2.0;
    }
    if (!accepted)
      throw NoProgress("line search exceeded 60 step doublings at iteration " +
                       std::to_string(t));

    const double obj_next = f_next + lambda1 * l21_norm(w_next);
    state.iterations = t;
    state.alpha = alpha_cur;
    state.mu = mu;
    state.mu_trace.push_back(mu);
    state.majorization_gap.push_back(gap);
    state.objective.push_back(obj_next);
    if (!std::isfinite(obj_next))
      throw NonFinite("objective became non-finite at iteration " + std::to_string(t),
                      state);

    const double nerr =
        obj_prev == 0.0 ? std::abs(obj_next) : std::abs(obj_prev - obj_next) / obj_prev;
    state.normalized_error.push_back(nerr);

    w_prev = std::move(w_cur);
    w_cur = std::move(w_next);
    alpha_prev = alpha_cur;
    obj_prev = obj_next;

    if (nerr < opts.tol) {
      state.converged = true;
      break;
    }
  }

  return {std::move(w_cur), std::move(state)};
}

}  // namespace

void validate(const SrmtlProblem& p) {
  const Index n = p.F.rows();
  if (n < 1 || p.F.cols() < 1) throw DimensionMismatch("feature matrix is empty");
  if (p.Y.rows() != n) throw DimensionMismatch("label matrix row count does not match F");
  if (p.Y.cols() < 1) throw DimensionMismatch("label matrix has no columns");
  if (!p.F.allFinite() || !p.Y.allFinite())
    throw NonFiniteSample("problem data contains NaN or Inf");
  if (!(p.lambda1 >= 0) || !std::isfinite(p.lambda1) || !(p.lambda2 >= 0) ||
      !std::isfinite(p.lambda2))
    throw InvalidConfig("penalty weights must be finite and >= 0");
  if (p.lambda2 != 0.0) {
    if (p.L.rows() != n || p.L.cols() != n)
      throw DimensionMismatch("Laplacian must be N x N when lambda2 > 0");
    if (!p.L.allFinite()) throw NonFiniteSample("Laplacian contains NaN or Inf");
    if ((p.L - p.L.transpose()).cwiseAbs().maxCoeff() > 1e-9)
      throw DimensionMismatch("Laplacian must be symmetric");
  }
}

double objective(const SrmtlProblem& p, const Matrix& W) {
  double value = 0.5 * (p.Y - p.F * W).squaredNorm() + p.lambda1 * l21_norm(W);
  if (p.lambda2 != 0.0) {
    const Matrix fw = p.F * W;
    value += p.lambda2 * fw.cwiseProduct(p.L * fw).sum();
  }
  return value;
}

Matrix smooth_grad(const SrmtlProblem& p, const Matrix& W) {
  Matrix grad = p.F.transpose() * (p.F * W - p.Y);
  if (p.lambda2 != 0.0) grad += 2.0 * p.lambda2 * (p.F.transpose() * (p.L * (p.F * W)));
  return grad;
}

Matrix prox_l21(const Matrix& V, double tau) {
  Matrix out = V;
  if (tau == 0.0) return out;
  for (Index d = 0; d < out.rows(); ++d) {
    const double norm = out.row(d).norm();
    if (norm <= tau)
      out.row(d).setZero();
    else
      out.row(d) *= 1.0 - tau / norm;
  }
  return out;
}

GramSweep::GramSweep(const Matrix& F, const Matrix& Y, const Matrix& L) {
  if (F.rows() != Y.rows() || F.rows() < 1 || F.cols() < 1 || Y.cols() < 1)
    throw DimensionMismatch("feature and label matrices do not align");
  ftf_ = F.transpose() * F;
  fty_ = F.transpose() * Y;
  y_sq_ = Y.squaredNorm();
  if (L.size() > 0) {
    if (L.rows() != F.rows() || L.cols() != F.rows())
      throw DimensionMismatch("Laplacian must be N x N");
    ftlf_ = F.transpose() * (L * F);
  }
}

std::pair<Matrix, SolverState> GramSweep::solve(double lambda1, double lambda2,
                                                const SolverOptions& opts) const {
  if (!(lambda1 >= 0) || !std::isfinite(lambda1) || !(lambda2 >= 0) ||
      !std::isfinite(lambda2))
    throw InvalidConfig("penalty weights must be finite and >= 0");
  Matrix h = ftf_;
  if (lambda2 != 0.0) {
    if (ftlf_.size() == 0)
      throw DimensionMismatch("sweep was built without a Laplacian but lambda2 > 0");
    h += 2.0 * lambda2 * ftlf_;
  }
  return apg(h, fty_, y_sq_, lambda1, opts);
}

std::pair<Matrix, SolverState> solve_srmtl(const SrmtlProblem& p, const SolverOptions& opts) {
  validate(p);
  // Delegating keeps this entry point and grid sweeps on one code path, so
  // a sweep cell and a standalone solve of the same problem agree exactly.
  const GramSweep sweep(p.F, p.Y, p.lambda2 != 0.0 ? p.L : Matrix());
  return sweep.solve(p.lambda1, p.lambda2, opts);
}

std::pair<Vector, SolverState> solve_lasso(const Matrix& F, const Vector& y, double lambda,
                                           const SolverOptions& opts) {
  SrmtlProblem p;
  p.F = F;
  p.Y = y;
  p.lambda1 = lambda;
  p.lambda2 = 0.0;
  auto [w, state] = solve_srmtl(p, opts);
  return {Vector(w.col(0)), std::move(state)};
}

std::vector<int> select_features(const Matrix& W, double floor) {
  std::vector<int> selected;
  for (Index d = 0; d < W.rows(); ++d)
    if (W.row(d).norm() > floor) selected.push_back(static_cast<int>(d));
  if (selected.empty())
    throw EmptySelection("every weight row is at or below the sparsity floor");
  return selected;
}

}  // namespace srmtl::mtl
