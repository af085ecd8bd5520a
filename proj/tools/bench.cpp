// Timing comparison of the OpenMP kernels against their serial references,
// with a max-abs-difference column as a cross-check that both paths agree.

#include <chrono>
#include <cstdio>
#include <limits>
#include <vector>

#include <CLI11.hpp>

#include "srmtl/csp.hpp"
#include "srmtl/dataio.hpp"
#include "srmtl/mtl.hpp"
#include "srmtl/parallel.hpp"
#include "srmtl/pipeline.hpp"
#include "srmtl/signal.hpp"
#include "srmtl/subclass.hpp"

namespace {

using srmtl::Index;
using srmtl::Matrix;

template <typename F>
double best_of(int reps, F&& fn) {
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (dt < best) best = dt;
  }
  return best;
}

void report(const char* name, double serial, double parallel, double max_diff) {
  std::printf("%-18s %10.4fs %10.4fs %7.2fx %12.3e\n", name, serial, parallel,
              serial / parallel, max_diff);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial-reference vs OpenMP kernel timings", "srmtl-bench"};
  srmtl::dataio::SynthConfig synth;
  synth.n_per_class = 40;
  synth.samples = 750;
  int reps = 3;
  int threads = 0;
  app.add_option("--n-per-class", synth.n_per_class, "Trials per class");
  app.add_option("--channels", synth.channels, "Channels");
  app.add_option("--samples", synth.samples, "Samples per trial");
  app.add_option("--reps", reps, "Repetitions (best-of)");
  app.add_option("--threads", threads, "Worker cap (0 = all)");
  CLI11_PARSE(app, argc, argv);

  const srmtl::TrialSet set = srmtl::dataio::synth_dataset(synth);
  const srmtl::signal::FilterBank bank = srmtl::signal::design_filter_bank(
      srmtl::signal::BandSpec::sweep(4, 40, 4, 2), set.fs(), 4);

  std::printf("%d trials, %d channels, %lld samples, %zu bands, %d worker(s)\n\n",
              static_cast<int>(set.size()), static_cast<int>(set.channels()),
              static_cast<long long>(set.samples()), bank.bands.size(),
              threads == 0 ? srmtl::max_workers() : threads);
  std::printf("%-18s %11s %11s %8s %12s\n", "kernel", "serial", "parallel", "speedup",
              "max |diff|");

  // 1) bandpass filtering, every trial through one band
  {
    std::vector<Matrix> serial_out, parallel_out;
    const double t_serial =
        best_of(reps, [&] { serial_out = srmtl::signal::reference::batch_filter(set, bank.bands[0]); });
    const double t_parallel =
        best_of(reps, [&] { parallel_out = srmtl::signal::batch_filter(set, bank.bands[0], threads); });
    double diff = 0;
    for (std::size_t i = 0; i < serial_out.size(); ++i)
      diff = std::max(diff, (serial_out[i] - parallel_out[i]).cwiseAbs().maxCoeff());
    report("batch_filter", t_serial, t_parallel, diff);
  }

  // 2) filter-bank CSP feature extraction with fitted filters
  {
    const auto [fm, model] = srmtl::csp::fit_feature_matrix(set, bank, 2, {}, threads);
    srmtl::csp::FeatureMatrix serial_out, parallel_out;
    const double t_serial = best_of(
        reps, [&] { serial_out = srmtl::csp::reference::apply_feature_matrix(set, bank, model); });
    const double t_parallel = best_of(
        reps, [&] { parallel_out = srmtl::csp::apply_feature_matrix(set, bank, model, threads); });
    report("feature_matrix", t_serial, t_parallel,
           (serial_out.values - parallel_out.values).cwiseAbs().maxCoeff());

    // 3) one inner-fold hyperparameter sweep (the cross-validation hot loop)
    const srmtl::subclass::SubclassPartition partition =
        srmtl::subclass::discover_subclasses(fm.values, set.labels(), {});
    const Matrix y = srmtl::subclass::encode_labels(partition);
    const Matrix lap =
        srmtl::subclass::build_laplacian(srmtl::subclass::build_similarity(partition));
    const srmtl::mtl::GramSweep sweep(fm.values, y, lap);
    const std::vector<double> grid = srmtl::pipeline::default_lambda_grid();

    std::vector<Matrix> serial_w(grid.size() * grid.size());
    std::vector<Matrix> parallel_w(grid.size() * grid.size());
    const auto cell = [&](std::size_t idx) {
      return sweep.solve(grid[idx / grid.size()], grid[idx % grid.size()]).first;
    };
    const double t_cells_serial = best_of(reps, [&] {
      for (std::size_t i = 0; i < serial_w.size(); ++i) serial_w[i] = cell(i);
    });
    const double t_cells_parallel = best_of(reps, [&] {
      srmtl::parallel_for(
          static_cast<std::ptrdiff_t>(parallel_w.size()),
          [&](std::ptrdiff_t i) { parallel_w[static_cast<std::size_t>(i)] = cell(static_cast<std::size_t>(i)); },
          threads);
    });
    double diff = 0;
    for (std::size_t i = 0; i < serial_w.size(); ++i)
      diff = std::max(diff, (serial_w[i] - parallel_w[i]).cwiseAbs().maxCoeff());
    report("lambda_sweep", t_cells_serial, t_cells_parallel, diff);
  }
  return 0;
}
