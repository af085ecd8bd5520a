#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "srmtl/types.hpp"

namespace srmtl::signal {

/// Subband layout: either a swept spec (bands [lo, lo+width], stepping by
/// `step` while the upper edge stays <= hi) or an explicit list of
/// (lo, hi) pairs.
struct BandSpec {
  double lo = 0, hi = 0, width = 0, step = 0;
  std::vector<std::pair<double, double>> explicit_bands;

  static BandSpec sweep(double lo, double hi, double width, double step);
  static BandSpec list(std::vector<std::pair<double, double>> bands);
  bool is_explicit() const { return !explicit_bands.empty(); }

  std::vector<std::pair<double, double>> expand() const;
};

// "4:40:4:2" -> sweep(lo=4, hi=40, width=4, step=2); "8-12" -> single band.
BandSpec parse_band_arg(const std::string& arg);
// One "lo,hi" pair per line; '#' comments allowed.
BandSpec load_band_list(const std::filesystem::path& path);

struct BandFilter {
  double lo = 0, hi = 0;  // Hz
  Vector b, a;            // transfer function coefficients, a(0) = 1
};

struct FilterBank {
  std::vector<BandFilter> bands;
  int order = 4;  // per-edge Butterworth order; the bandpass has 2*order poles
  double fs = 0;
};

// Butterworth bandpass per band (bilinear transform of the analog
// prototype), checked for stability. `order` is the prototype order, so the
// digital filter has 2*order poles — the convention of the usual
// butter(order, [lo hi]) design tools.
FilterBank design_filter_bank(const BandSpec& spec, double fs, int order = 4);

// Zero-phase forward-backward filtering along each row, with odd-reflection
// padding of 3 * (2*order) samples (clamped to P-1) and steady-state initial
// conditions, so short epochs keep clean edges.
Matrix filtfilt(const Vector& b, const Vector& a, const Matrix& x);

// One filtered trial per band; label and fs preserved.
std::vector<Trial> apply_filter_bank(const Trial& trial, const FilterBank& bank);

// OpenMP kernel: every trial through one band. Results land in
// preallocated slots, so the output is identical for any thread count.
std::vector<Matrix> batch_filter(const TrialSet& set, const BandFilter& band,
                                 int threads = 0);

namespace reference {
// Serial reference for batch_filter, kept for tests and the benchmark.
std::vector<Matrix> batch_filter(const TrialSet& set, const BandFilter& band);
}  // namespace reference

}  // namespace srmtl::signal
