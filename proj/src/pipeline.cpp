#include "srmtl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "srmtl/classify.hpp"
#include "srmtl/dataio.hpp"
#include "srmtl/parallel.hpp"
#include "srmtl/rng.hpp"

namespace srmtl::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += fmt(values[i]);
  }
  return out;
}

std::string join_indices(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ";";
    out += std::to_string(values[i]);
  }
  return out;
}

Matrix gather_rows(const Matrix& m, const std::vector<int>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

Matrix gather_cols(const Matrix& m, const std::vector<int>& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    out.col(static_cast<Index>(j)) = m.col(cols[j]);
  return out;
}

// Per-(band, trial) covariance cache. Filtering is trial-local, so it can
// run once per dataset with no fold leakage; every fold then reduces these
// 8x8-scale matrices instead of re-filtering C x P signals:
//   class covariance = mean of sigma_part over the fold's class members,
//   feature f_m      = log(u_m' feat_part u_m / (P-1)).
struct CovCache {
  std::vector<std::vector<Matrix>> sigma_part;  // [band][trial], per CovarianceOptions
  std::vector<std::vector<Matrix>> feat_part;   // [band][trial], always centered
  Index samples = 0;
};

CovCache build_cov_cache(const TrialSet& set, const signal::FilterBank& bank,
                         const csp::CovarianceOptions& cov, int threads) {
  CovCache cache;
  cache.samples = set.samples();
  const std::size_t g = bank.bands.size();
  const std::size_t n = set.trials.size();
  cache.sigma_part.assign(g, std::vector<Matrix>(n));
  cache.feat_part.assign(g, std::vector<Matrix>(n));

  parallel_for(
      static_cast<std::ptrdiff_t>(g),
      [&](std::ptrdiff_t bi) {
        const signal::BandFilter& band = bank.bands[static_cast<std::size_t>(bi)];
        for (std::size_t i = 0; i < n; ++i) {
          const Matrix filtered = signal::filtfilt(band.b, band.a, set.trials[i].data);
          const Matrix centered = filtered.colwise() - filtered.rowwise().mean();
          cache.feat_part[static_cast<std::size_t>(bi)][i] = centered * centered.transpose();

          Matrix sigma = cov.center
                             ? cache.feat_part[static_cast<std::size_t>(bi)][i]
                             : Matrix(filtered * filtered.transpose());
          if (cov.trace_normalize) {
            const double tr = sigma.trace();
            if (!(tr > 0))
              throw SingularCovariance("trial covariance has non-positive trace");
            sigma /= tr;
          }
          cache.sigma_part[static_cast<std::size_t>(bi)][i] = std::move(sigma);
        }
      },
      threads);
  return cache;
}

std::vector<csp::SpatialFilterSet> fit_fold_csp(const CovCache& cache,
                                                const signal::FilterBank& bank,
                                                const std::vector<int>& train_idx,
                                                const std::vector<int>& labels,
                                                const PipelineConfig& cfg) {
  std::vector<csp::SpatialFilterSet> filters(bank.bands.size());
  for (std::size_t bi = 0; bi < bank.bands.size(); ++bi) {
    Matrix sigma1, sigma2;
    int n1 = 0, n2 = 0;
    for (int i : train_idx) {
      const Matrix& part = cache.sigma_part[bi][static_cast<std::size_t>(i)];
      if (labels[static_cast<std::size_t>(i)] == 1) {
        if (n1++ == 0) sigma1 = part; else sigma1 += part;
      } else {
        if (n2++ == 0) sigma2 = part; else sigma2 += part;
      }
    }
    if (n1 == 0 || n2 == 0) throw EmptyClass("training fold is missing a class");
    filters[bi] = csp::fit_csp(sigma1 / n1, sigma2 / n2, cfg.csp_pairs);
    filters[bi].band_lo = bank.bands[bi].lo;
    filters[bi].band_hi = bank.bands[bi].hi;
  }
  return filters;
}

// Log-variance feature rows for the given trials, via the cached outer
// products: var(u'X) = u' (Xc Xc') u / (P-1).
Matrix fold_features(const CovCache& cache, const std::vector<csp::SpatialFilterSet>& filters,
                     const std::vector<int>& trial_idx) {
  const Index g = static_cast<Index>(filters.size());
  const Index width = filters.empty() ? 0 : filters.front().filters.cols();
  Matrix out(static_cast<Index>(trial_idx.size()), g * width);
  const double denom = static_cast<double>(cache.samples - 1);

  for (std::size_t r = 0; r < trial_idx.size(); ++r) {
    for (Index bi = 0; bi < g; ++bi) {
      const Matrix& u = filters[static_cast<std::size_t>(bi)].filters;
      const Matrix& o = cache.feat_part[static_cast<std::size_t>(bi)]
                                       [static_cast<std::size_t>(trial_idx[r])];
      for (Index m = 0; m < width; ++m) {
        const double var = u.col(m).dot(o * u.col(m)) / denom;
        if (var < 1e-12)
          throw DegenerateVariance("projected variance " + std::to_string(var) +
                                   " below 1e-12");
        out(static_cast<Index>(r), bi * width + m) = std::log(var);
      }
    }
  }
  return out;
}

struct ZStats {
  Vector mean, scale;
};

ZStats fit_z(const Matrix& train_rows) {
  ZStats z;
  const Index n = train_rows.rows();
  z.mean.resize(train_rows.cols());
  z.scale.resize(train_rows.cols());
  for (Index j = 0; j < train_rows.cols(); ++j) {
    z.mean(j) = train_rows.col(j).mean();
    double sd = 0.0;
    if (n > 1)
      sd = std::sqrt((train_rows.col(j).array() - z.mean(j)).square().sum() /
                     static_cast<double>(n - 1));
    z.scale(j) = sd > 1e-12 ? sd : 1.0;  // constant columns pass through unscaled
  }
  return z;
}

Matrix apply_z(const Matrix& rows, const ZStats& z) {
  Matrix out = rows;
  for (Index j = 0; j < out.cols(); ++j) out.col(j) = (out.col(j).array() - z.mean(j)) / z.scale(j);
  return out;
}

struct Cell {
  double lambda1 = 0, lambda2 = 0;
};

// Ascending-lambda1-then-lambda2 order; the tie rule "prefer the smaller
// lambda1, then the smaller lambda2" is a strict-better scan over this order.
std::vector<Cell> build_grid(const PipelineConfig& cfg) {
  std::vector<double> grid1 = cfg.lambda1_grid;
  std::sort(grid1.begin(), grid1.end());
  std::vector<double> grid2;
  if (cfg.method == Method::Srmtl) {
    grid2 = cfg.lambda2_grid;
    std::sort(grid2.begin(), grid2.end());
  } else {
    grid2 = {0.0};
  }

  std::vector<Cell> cells;
  if (cfg.method == Method::CspOnly) return cells;
  cells.reserve(grid1.size() * grid2.size());
  for (double l1 : grid1)
    for (double l2 : grid2) cells.push_back({l1, l2});
  return cells;
}

std::vector<int> select_or_fallback(const Matrix& w, double floor, bool& used_fallback) {
  try {
    return mtl::select_features(w, floor);
  } catch (const EmptySelection&) {
    used_fallback = true;
  }
  // Nothing survived; keep the top ceil(D/10) rows by norm so the
  // classifier still has inputs. Stable-sorted, so all-zero ties resolve to
  // the lowest indices.
  const Index d = w.rows();
  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return w.row(a).norm() > w.row(b).norm();
  });
  const std::size_t keep = static_cast<std::size_t>((d + 9) / 10);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

double svm_accuracy(const Matrix& f_train, const std::vector<int>& y_train,
                    const std::vector<int>& selected, const Matrix& f_val,
                    const std::vector<int>& y_val, double c, std::uint64_t seed) {
  const classify::SvmModel model = classify::with_indices(
      classify::train_svm(gather_cols(f_train, selected), y_train, c, seed), selected);
  int correct = 0;
  for (Index i = 0; i < f_val.rows(); ++i) {
    if (classify::predict(model, f_val.row(i).transpose()).label ==
        y_val[static_cast<std::size_t>(i)])
      ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(f_val.rows());
}

// Seed salts: distinct high tags keep the derived streams for fold dealing,
// per-cell SVMs, and refit SVMs from colliding.
std::uint64_t outer_salt(int repeat) { return 0x100000000ULL + static_cast<std::uint64_t>(repeat); }
std::uint64_t inner_salt(int repeat, int fold) {
  return 0x200000000ULL + static_cast<std::uint64_t>(repeat) * 1000 + static_cast<std::uint64_t>(fold);
}
std::uint64_t cell_salt(int repeat, int fold, int inner, std::size_t cell) {
  return 0x300000000ULL +
         ((static_cast<std::uint64_t>(repeat) * 1000 + static_cast<std::uint64_t>(fold)) * 1000 +
          static_cast<std::uint64_t>(inner)) *
             100000 +
         cell;
}
std::uint64_t refit_salt(int repeat, int fold) {
  return 0x400000000ULL + static_cast<std::uint64_t>(repeat) * 1000 + static_cast<std::uint64_t>(fold);
}

FoldResult run_fold(const TrialSet& set, const signal::FilterBank& bank, const CovCache& cache,
                    const std::vector<int>& train_idx, const std::vector<int>& test_idx,
                    const PipelineConfig& cfg, int repeat, int fold) {
  const auto t0 = Clock::now();
  FoldResult result;
  result.repeat = repeat;
  result.fold = fold;
  result.test_indices = test_idx;

  const std::vector<int> labels = set.labels();
  const auto pm = [&](int idx) { return labels[static_cast<std::size_t>(idx)] == 1 ? 1 : -1; };

  const std::vector<csp::SpatialFilterSet> filters =
      fit_fold_csp(cache, bank, train_idx, labels, cfg);

  const Matrix f_train_raw = fold_features(cache, filters, train_idx);
  const Matrix f_test_raw = fold_features(cache, filters, test_idx);
  const ZStats z = fit_z(f_train_raw);
  const Matrix f_train = apply_z(f_train_raw, z);
  const Matrix f_test = apply_z(f_test_raw, z);

  std::vector<int> y_train(train_idx.size());
  std::vector<int> labels_train(train_idx.size());
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    y_train[i] = pm(train_idx[i]);
    labels_train[i] = labels[static_cast<std::size_t>(train_idx[i])];
  }

  // Subclass structure, shared by every grid cell of this fold.
  const bool needs_clusters = cfg.method == Method::Mtl || cfg.method == Method::Srmtl;
  Matrix y_encoded, s_train;
  if (needs_clusters) {
    const subclass::SubclassPartition partition =
        subclass::discover_subclasses(f_train, labels_train, cfg.ap);
    result.num_clusters = partition.num_clusters;
    y_encoded = subclass::encode_labels(partition);
    s_train = subclass::build_similarity(partition);
  }

  const std::vector<Cell> cells = build_grid(cfg);
  Cell chosen;
  if (!cells.empty()) {
    const std::vector<std::vector<int>> inner_folds = stratified_folds(
        labels_train, cfg.inner_folds, mix_seed(cfg.seed, inner_salt(repeat, fold)));

    std::vector<double> acc_sum(cells.size(), 0.0);
    int used_folds = 0;
    for (std::size_t j = 0; j < inner_folds.size(); ++j) {
      const std::vector<int>& val_rows = inner_folds[j];
      if (val_rows.empty()) continue;
      ++used_folds;
      std::vector<int> tr_rows;
      tr_rows.reserve(labels_train.size() - val_rows.size());
      for (std::size_t i = 0; i < labels_train.size(); ++i)
        if (!std::binary_search(val_rows.begin(), val_rows.end(), static_cast<int>(i)))
          tr_rows.push_back(static_cast<int>(i));

      const Matrix f_tr = gather_rows(f_train, tr_rows);
      const Matrix f_val = gather_rows(f_train, val_rows);
      std::vector<int> y_tr, y_val;
      for (int i : tr_rows) y_tr.push_back(y_train[static_cast<std::size_t>(i)]);
      for (int i : val_rows) y_val.push_back(y_train[static_cast<std::size_t>(i)]);

      Matrix y_enc_tr, l_tr;
      if (needs_clusters) {
        y_enc_tr = gather_rows(y_encoded, tr_rows);
        if (cfg.method == Method::Srmtl) {
          Matrix s_tr(static_cast<Index>(tr_rows.size()), static_cast<Index>(tr_rows.size()));
          for (std::size_t a = 0; a < tr_rows.size(); ++a)
            for (std::size_t b = 0; b < tr_rows.size(); ++b)
              s_tr(static_cast<Index>(a), static_cast<Index>(b)) =
                  s_train(tr_rows[a], tr_rows[b]);
          l_tr = subclass::build_laplacian(s_tr);
        }
      } else {
        y_enc_tr.resize(static_cast<Index>(tr_rows.size()), 1);
        for (std::size_t i = 0; i < tr_rows.size(); ++i)
          y_enc_tr(static_cast<Index>(i), 0) = y_tr[i];
      }

      const mtl::GramSweep sweep(f_tr, y_enc_tr, l_tr);
      std::vector<double> cell_acc(cells.size(), 0.0);
      parallel_for(
          static_cast<std::ptrdiff_t>(cells.size()),
          [&](std::ptrdiff_t ci) {
            const Cell& cell = cells[static_cast<std::size_t>(ci)];
            const Matrix w = sweep.solve(cell.lambda1, cell.lambda2, cfg.solver).first;
            bool fallback = false;
            const std::vector<int> selected =
                select_or_fallback(w, cfg.selection_floor, fallback);
            cell_acc[static_cast<std::size_t>(ci)] = svm_accuracy(
                f_tr, y_tr, selected, f_val, y_val, cfg.svm_c,
                mix_seed(cfg.seed, cell_salt(repeat, fold, static_cast<int>(j),
                                             static_cast<std::size_t>(ci))));
          },
          cfg.threads);
      for (std::size_t ci = 0; ci < cells.size(); ++ci) acc_sum[ci] += cell_acc[ci];
    }
    if (used_folds == 0) throw InvalidConfig("every inner fold is empty");

    std::size_t best = 0;
    for (std::size_t ci = 1; ci < cells.size(); ++ci)
      if (acc_sum[ci] > acc_sum[best]) best = ci;  // strict: ties keep the earlier cell
    chosen = cells[best];
  }
  result.lambda1 = chosen.lambda1;
  result.lambda2 = chosen.lambda2;

  // Refit on the whole training fold at the chosen penalties.
  std::vector<int> selected;
  if (cfg.method == Method::CspOnly) {
    selected.resize(static_cast<std::size_t>(f_train.cols()));
    std::iota(selected.begin(), selected.end(), 0);
  } else {
    Matrix y_enc;
    Matrix l_train;
    if (needs_clusters) {
      y_enc = y_encoded;
      if (cfg.method == Method::Srmtl) l_train = subclass::build_laplacian(s_train);
    } else {
      y_enc.resize(static_cast<Index>(y_train.size()), 1);
      for (std::size_t i = 0; i < y_train.size(); ++i)
        y_enc(static_cast<Index>(i), 0) = y_train[i];
    }
    const mtl::GramSweep sweep(f_train, y_enc, l_train);
    auto [w, state] = sweep.solve(chosen.lambda1, chosen.lambda2, cfg.solver);
    result.solver_iterations = state.iterations;
    selected = select_or_fallback(w, cfg.selection_floor, result.selection_fallback);
  }
  result.selected_features = selected;

  const classify::SvmModel model = classify::with_indices(
      classify::train_svm(gather_cols(f_train, selected), y_train, cfg.svm_c,
                          mix_seed(cfg.seed, refit_salt(repeat, fold))),
      selected);

  int correct = 0;
  result.predictions.reserve(test_idx.size());
  for (Index i = 0; i < f_test.rows(); ++i) {
    const int predicted = classify::predict(model, f_test.row(i).transpose()).label;
    result.predictions.push_back(predicted);
    if (predicted == pm(test_idx[static_cast<std::size_t>(i)])) ++correct;
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(test_idx.size());
  result.seconds = seconds_since(t0);
  return result;
}

signal::FilterBank method_bank(const TrialSet& set, const PipelineConfig& cfg) {
  const signal::BandSpec spec =
      cfg.method == Method::CspOnly
          ? signal::BandSpec::list({{cfg.single_band_lo, cfg.single_band_hi}})
          : cfg.bands;
  return signal::design_filter_bank(spec, set.fs(), cfg.filter_order);
}

std::string dataset_name(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (in) {
    nlohmann::json j;
    try {
      in >> j;
      if (j.contains("name") && j["name"].is_string()) return j["name"].get<std::string>();
    } catch (const nlohmann::json::exception&) {
    }
  }
  return manifest_path.stem().string();
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::CspOnly: return "csp-only";
    case Method::Sfbcsp: return "sfbcsp";
    case Method::Mtl: return "mtl";
    case Method::Srmtl: return "srmtl";
  }
  throw InvalidConfig("unknown method id");
}

Method method_from_string(const std::string& name) {
  if (name == "csp-only") return Method::CspOnly;
  if (name == "sfbcsp") return Method::Sfbcsp;
  if (name == "mtl") return Method::Mtl;
  if (name == "srmtl") return Method::Srmtl;
  throw InvalidConfig("unknown method '" + name + "' (expected csp-only, sfbcsp, mtl, srmtl)");
}

std::vector<double> default_lambda_grid() {
  return {0.01, 0.05, 0.1, 0.5, 1, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60};
}

void validate(const PipelineConfig& cfg) {
  cfg.bands.expand();  // throws on a malformed spec
  if (!(cfg.single_band_lo > 0) || !(cfg.single_band_hi > cfg.single_band_lo))
    throw InvalidConfig("single band must satisfy 0 < lo < hi");
  if (cfg.filter_order < 1) throw InvalidConfig("filter order must be >= 1");
  if (cfg.csp_pairs < 1) throw InvalidConfig("need at least one spatial filter pair");
  subclass::validate(cfg.ap);
  if (cfg.lambda1_grid.empty() || cfg.lambda2_grid.empty())
    throw InvalidConfig("penalty grids must be non-empty");
  for (double v : cfg.lambda1_grid)
    if (!(v >= 0) || !std::isfinite(v)) throw InvalidConfig("lambda1 grid values must be >= 0");
  for (double v : cfg.lambda2_grid)
    if (!(v >= 0) || !std::isfinite(v)) throw InvalidConfig("lambda2 grid values must be >= 0");
  if (!(cfg.svm_c > 0)) throw InvalidConfig("svm C must be positive");
  if (cfg.outer_folds < 2) throw InvalidConfig("outer folds must be >= 2");
  if (cfg.inner_folds < 2) throw InvalidConfig("inner folds must be >= 2");
  if (cfg.repeats < 1) throw InvalidConfig("repeats must be >= 1");
  if (cfg.solver.max_iters < 1) throw InvalidConfig("solver needs at least one iteration");
  if (!(cfg.solver.tol >= 0)) throw InvalidConfig("solver tolerance must be >= 0");
  if (!(cfg.selection_floor >= 0)) throw InvalidConfig("selection floor must be >= 0");
  if (cfg.threads < 0) throw InvalidConfig("threads must be >= 0 (0 = all workers)");
}

std::string canonical_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  out << "ap.convergence_window = " << cfg.ap.convergence_window << '\n';
  out << "ap.damping = " << fmt(cfg.ap.damping) << '\n';
  out << "ap.max_iters = " << cfg.ap.max_iters << '\n';
  out << "ap.preference = " << (cfg.ap.preference ? fmt(*cfg.ap.preference) : "median") << '\n';
  out << "ap.zscore_features = " << (cfg.ap.zscore_features ? "true" : "false") << '\n';
  out << "bands = ";
  const auto bands = cfg.bands.expand();
  for (std::size_t i = 0; i < bands.size(); ++i)
    out << (i ? "," : "") << fmt(bands[i].first) << '-' << fmt(bands[i].second);
  out << '\n';
  out << "covariance.center = " << (cfg.covariance.center ? "true" : "false") << '\n';
  out << "covariance.trace_normalize = " << (cfg.covariance.trace_normalize ? "true" : "false")
      << '\n';
  out << "csp_pairs = " << cfg.csp_pairs << '\n';
  out << "filter_order = " << cfg.filter_order << '\n';
  out << "inner_folds = " << cfg.inner_folds << '\n';
  out << "lambda1_grid = " << join(cfg.lambda1_grid) << '\n';
  out << "lambda2_grid = " << join(cfg.lambda2_grid) << '\n';
  out << "method = " << to_string(cfg.method) << '\n';
  out << "outer_folds = " << cfg.outer_folds << '\n';
  out << "repeats = " << cfg.repeats << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "selection_floor = " << fmt(cfg.selection_floor) << '\n';
  out << "single_band = " << fmt(cfg.single_band_lo) << '-' << fmt(cfg.single_band_hi) << '\n';
  out << "solver.max_iters = " << cfg.solver.max_iters << '\n';
  out << "solver.tol = " << fmt(cfg.solver.tol) << '\n';
  out << "svm_c = " << fmt(cfg.svm_c) << '\n';
  return out.str();
}

std::vector<std::vector<int>> stratified_folds(const std::vector<int>& labels, int folds,
                                               std::uint64_t seed) {
  if (folds < 1) throw InvalidConfig("fold count must be >= 1");
  std::vector<std::vector<int>> out(static_cast<std::size_t>(folds));
  Rng rng(seed);
  for (int cls : {1, 2}) {
    std::vector<int> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(static_cast<int>(i));
    rng.shuffle(members);
    for (std::size_t i = 0; i < members.size(); ++i)
      out[i % static_cast<std::size_t>(folds)].push_back(members[i]);
  }
  for (auto& fold : out) std::sort(fold.begin(), fold.end());
  return out;
}

FoldResult evaluate_fold(const TrialSet& set, const std::vector<int>& train_idx,
                         const std::vector<int>& test_idx, const PipelineConfig& cfg) {
  validate(set, /*require_both_classes=*/false);
  validate(cfg);
  if (train_idx.empty() || test_idx.empty())
    throw InvalidConfig("both fold sides must be non-empty");
  for (const std::vector<int>* side : {&train_idx, &test_idx})
    for (int i : *side)
      if (i < 0 || i >= static_cast<int>(set.size()))
        throw IndexOutOfRange("trial index " + std::to_string(i) + " out of range");
  const signal::FilterBank bank = method_bank(set, cfg);
  const CovCache cache = build_cov_cache(set, bank, cfg.covariance, cfg.threads);
  return run_fold(set, bank, cache, train_idx, test_idx, cfg, 0, 0);
}

CvReport run_crossval(const TrialSet& set, const PipelineConfig& cfg) {
  const auto t0 = Clock::now();
  validate(set, /*require_both_classes=*/true);
  validate(cfg);

  const std::vector<int> labels = set.labels();
  for (int cls : {1, 2}) {
    const auto count = std::count(labels.begin(), labels.end(), cls);
    if (count < cfg.outer_folds)
      throw InvalidConfig("class " + std::to_string(cls) + " has " + std::to_string(count) +
                          " trials, fewer than the " + std::to_string(cfg.outer_folds) +
                          " outer folds");
  }

  const signal::FilterBank bank = method_bank(set, cfg);
  const CovCache cache = build_cov_cache(set, bank, cfg.covariance, cfg.threads);

  CvReport report;
  report.method = cfg.method;
  report.provenance.config_hash = fnv1a_hex(canonical_config(cfg));
  report.provenance.seed = cfg.seed;
  report.provenance.threads = cfg.threads == 0 ? max_workers() : cfg.threads;

  for (int repeat = 0; repeat < cfg.repeats; ++repeat) {
    const std::vector<std::vector<int>> folds =
        stratified_folds(labels, cfg.outer_folds, mix_seed(cfg.seed, outer_salt(repeat)));
    for (int fold = 0; fold < cfg.outer_folds; ++fold) {
      const std::vector<int>& test_idx = folds[static_cast<std::size_t>(fold)];
      std::vector<int> train_idx;
      train_idx.reserve(labels.size() - test_idx.size());
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (!std::binary_search(test_idx.begin(), test_idx.end(), static_cast<int>(i)))
          train_idx.push_back(static_cast<int>(i));
      report.folds.push_back(run_fold(set, bank, cache, train_idx, test_idx, cfg, repeat, fold));
    }
  }

  double sum = 0;
  for (const FoldResult& f : report.folds) sum += f.accuracy;
  report.mean_accuracy = sum / static_cast<double>(report.folds.size());
  double ss = 0;
  for (const FoldResult& f : report.folds) {
    const double d = f.accuracy - report.mean_accuracy;
    ss += d * d;
  }
  report.std_accuracy =
      report.folds.size() > 1 ? std::sqrt(ss / static_cast<double>(report.folds.size() - 1)) : 0.0;
  report.total_seconds = seconds_since(t0);
  return report;
}

std::vector<CvReport> run_method_comparison(const TrialSet& set, const PipelineConfig& cfg) {
  std::vector<CvReport> reports;
  for (Method m : {Method::CspOnly, Method::Sfbcsp, Method::Mtl, Method::Srmtl}) {
    PipelineConfig method_cfg = cfg;
    method_cfg.method = m;
    reports.push_back(run_crossval(set, method_cfg));
  }
  return reports;
}

double r_square(const Vector& feature, const std::vector<int>& labels) {
  const Index n = feature.size();
  if (n != static_cast<Index>(labels.size()))
    throw ShapeMismatch("feature length does not match label count");
  if (n < 2) throw ShapeMismatch("r-square needs at least 2 trials");
  bool pos = false, neg = false;
  for (int y : labels) {
    if (y == 1) pos = true;
    else if (y == -1) neg = true;
    else throw InvalidConfig("labels must be +1 or -1");
  }
  if (!pos || !neg) throw SingleClass("r-square needs both classes");
  if (!feature.allFinite()) throw NonFiniteSample("feature contains NaN or Inf");

  double mean_f = feature.mean();
  double mean_y = 0;
  for (int y : labels) mean_y += y;
  mean_y /= static_cast<double>(n);

  double sff = 0, syy = 0, sfy = 0;
  for (Index i = 0; i < n; ++i) {
    const double df = feature(i) - mean_f;
    const double dy = labels[static_cast<std::size_t>(i)] - mean_y;
    sff += df * df;
    syy += dy * dy;
    sfy += df * dy;
  }
  const double mean_sq = feature.squaredNorm() / static_cast<double>(n);
  if (sff <= 1e-24 * static_cast<double>(n) * std::max(1.0, mean_sq))
    throw ZeroVariance("feature column is constant");
  return (sfy * sfy) / (sff * syy);
}

std::string CvReport::canonical_csv() const {
  std::ostringstream out;
  out << csv_provenance_block(provenance);
  out << "method,repeat,fold,accuracy,lambda1,lambda2,num_selected,selected,num_clusters,"
         "solver_iterations,selection_fallback\n";
  for (const FoldResult& f : folds) {
    out << to_string(method) << ',' << f.repeat << ',' << f.fold << ',' << fmt(f.accuracy)
        << ',' << fmt(f.lambda1) << ',' << fmt(f.lambda2) << ',' << f.selected_features.size()
        << ',' << join_indices(f.selected_features) << ',' << f.num_clusters << ','
        << f.solver_iterations << ',' << (f.selection_fallback ? 1 : 0) << '\n';
  }
  out << "# mean_accuracy=" << fmt(mean_accuracy) << '\n';
  out << "# std_accuracy=" << fmt(std_accuracy) << '\n';
  return out.str();
}

std::string CvReport::to_json() const {
  nlohmann::json j;
  j["method"] = to_string(method);
  j["mean_accuracy"] = mean_accuracy;
  j["std_accuracy"] = std_accuracy;
  j["total_seconds"] = total_seconds;
  j["provenance"] = {{"config_hash", provenance.config_hash},
                     {"seed", provenance.seed},
                     {"threads", provenance.threads},
                     {"versions", library_versions()}};
  nlohmann::json folds_json = nlohmann::json::array();
  for (const FoldResult& f : folds) {
    folds_json.push_back({{"repeat", f.repeat},
                          {"fold", f.fold},
                          {"test_indices", f.test_indices},
                          {"predictions", f.predictions},
                          {"accuracy", f.accuracy},
                          {"lambda1", f.lambda1},
                          {"lambda2", f.lambda2},
                          {"selected_features", f.selected_features},
                          {"num_clusters", f.num_clusters},
                          {"solver_iterations", f.solver_iterations},
                          {"selection_fallback", f.selection_fallback},
                          {"seconds", f.seconds}});
  }
  j["folds"] = std::move(folds_json);
  return j.dump(2);
}

std::string SubjectTable::csv(const Provenance& p) const {
  std::ostringstream out;
  out << csv_provenance_block(p);
  out << "subject";
  for (Method m : methods) out << ',' << to_string(m);
  out << '\n';
  out << std::fixed << std::setprecision(1);
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    out << subjects[s];
    for (std::size_t m = 0; m < methods.size(); ++m)
      out << ',' << accuracy(static_cast<Index>(s), static_cast<Index>(m));
    out << '\n';
  }
  out << "average";
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const auto col = accuracy.col(static_cast<Index>(m));
    const double mean = col.mean();
    const double sd = subjects.size() > 1
                          ? std::sqrt((col.array() - mean).square().sum() /
                                      static_cast<double>(subjects.size() - 1))
                          : 0.0;
    out << ',' << mean << "+-" << sd;
  }
  out << '\n';
  return out.str();
}

SubjectTable run_subject_table(const std::vector<std::filesystem::path>& manifests,
                               const PipelineConfig& cfg) {
  if (manifests.empty()) throw InvalidConfig("need at least one dataset manifest");
  SubjectTable table;
  table.methods = {Method::CspOnly, Method::Sfbcsp, Method::Mtl, Method::Srmtl};
  table.accuracy.resize(static_cast<Index>(manifests.size()),
                        static_cast<Index>(table.methods.size()));
  for (std::size_t s = 0; s < manifests.size(); ++s) {
    table.subjects.push_back(dataset_name(manifests[s]));
    const TrialSet set = dataio::load_dataset(manifests[s]);
    const std::vector<CvReport> reports = run_method_comparison(set, cfg);
    for (std::size_t m = 0; m < reports.size(); ++m)
      table.accuracy(static_cast<Index>(s), static_cast<Index>(m)) =
          100.0 * reports[m].mean_accuracy;
  }
  return table;
}

}  // namespace srmtl::pipeline
