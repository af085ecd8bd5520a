#include "srmtl/signal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <sstream>

#include "srmtl/errors.hpp"
#include "srmtl/parallel.hpp"

namespace srmtl::signal {

namespace {

using Complex = std::complex<double>;

// Polynomial coefficients (leading first) from roots: product of (x - r_i).
std::vector<Complex> poly_from_roots(const std::vector<Complex>& roots) {
  std::vector<Complex> coeffs{1.0};
  for (const Complex& r : roots) {
    std::vector<Complex> next(coeffs.size() + 1, 0.0);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      next[i] += coeffs[i];
      next[i + 1] -= coeffs[i] * r;
    }
    coeffs = std::move(next);
  }
  return coeffs;
}

Vector real_coeffs(const std::vector<Complex>& coeffs) {
  Vector out(static_cast<Index>(coeffs.size()));
  for (std::size_t i = 0; i < coeffs.size(); ++i) out(static_cast<Index>(i)) = coeffs[i].real();
  return out;
}

// Largest root magnitude of a monic-normalized polynomial, via the
// companion matrix.
double max_root_magnitude(const Vector& a) {
  const Index n = a.size() - 1;
  if (n < 1) return 0.0;
  Matrix companion = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) companion(0, i) = -a(i + 1) / a(0);
  for (Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Matrix> eig(companion, /*computeEigenvectors=*/false);
  double max_mag = 0.0;
  for (Index i = 0; i < n; ++i) max_mag = std::max(max_mag, std::abs(eig.eigenvalues()(i)));
  return max_mag;
}

// Butterworth bandpass: analog prototype -> lowpass-to-bandpass
// transform -> bilinear transform, on edges normalized to half-cycles
// per sample.
BandFilter design_bandpass(double lo, double hi, double fs, int order) {
  BandFilter filt;
  filt.lo = lo;
  filt.hi = hi;

  const double nyq = fs / 2.0;
  const double fs2 = 2.0;  // normalized sampling rate of the bilinear map
  const double warped1 = 2.0 * fs2 * std::tan(std::numbers::pi * (lo / nyq) / fs2);
  const double warped2 = 2.0 * fs2 * std::tan(std::numbers::pi * (hi / nyq) / fs2);

  // Analog lowpass prototype: poles on the unit circle's left half, gain 1.
  std::vector<Complex> proto(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) {
    const double theta = std::numbers::pi * (2 * k + order + 1) / (2.0 * order);
    proto[static_cast<std::size_t>(k)] = std::polar(1.0, theta);
  }

  const double bw = warped2 - warped1;
  const double wo = std::sqrt(warped1 * warped2);
  std::vector<Complex> poles;
  poles.reserve(static_cast<std::size_t>(2 * order));
  for (const Complex& p : proto) {
    const Complex scaled = p * (bw / 2.0);
    const Complex root = std::sqrt(scaled * scaled - Complex(wo * wo));
    poles.push_back(scaled + root);
    poles.push_back(scaled - root);
  }
  // `order` zeros at s = 0; overall analog gain bw^order.
  double gain = std::pow(bw, order);

  // Bilinear transform z = (4 + s) / (4 - s) at fs2 = 2.
  const double fs4 = 2.0 * fs2;
  std::vector<Complex> zpoles, zzeros;
  Complex gain_ratio = 1.0;
  for (const Complex& p : poles) {
    zpoles.push_back((fs4 + p) / (fs4 - p));
    gain_ratio /= (fs4 - p);
  }
  for (int k = 0; k < order; ++k) {
    zzeros.push_back((fs4 + Complex(0.0)) / (fs4 - Complex(0.0)));
    gain_ratio *= fs4;
  }
  // Degree balance: the remaining `order` digital zeros sit at z = -1.
  for (int k = 0; k < order; ++k) zzeros.push_back(-1.0);
  gain *= gain_ratio.real();

  filt.b = real_coeffs(poly_from_roots(zzeros)) * gain;
  filt.a = real_coeffs(poly_from_roots(zpoles));
  return filt;
}

// Steady-state initial conditions so a step at the signal's first value
// starts the filter without a transient (companion-form linear solve).
Vector steady_state_zi(const Vector& b, const Vector& a) {
  const Index n = a.size();
  Matrix A = Matrix::Zero(n - 1, n - 1);
  A.col(0) = -a.tail(n - 1) / a(0);
  A.topRightCorner(n - 2, n - 2).setIdentity();
  Vector B = b.tail(n - 1) - a.tail(n - 1) * b(0);
  return (Matrix::Identity(n - 1, n - 1) - A).partialPivLu().solve(B);
}

// Direct form II transposed with initial state z.
Vector lfilter(const Vector& b, const Vector& a, const Vector& x, Vector z) {
  const Index n = a.size();
  Vector y(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double yi = b(0) * x(i) + z(0);
    for (Index j = 1; j < n - 1; ++j) z(j - 1) = b(j) * x(i) + z(j) - a(j) * yi;
    z(n - 2) = b(n - 1) * x(i) - a(n - 1) * yi;
    y(i) = yi;
  }
  return y;
}

Vector filtfilt_row(const Vector& b, const Vector& a, const Vector& x, const Vector& zi) {
  const Index p = x.size();
  const Index padlen = std::min<Index>(3 * (a.size() - 1), p - 1);

  // Odd reflection about both endpoints.
  Vector ext(p + 2 * padlen);
  for (Index i = 0; i < padlen; ++i) ext(i) = 2.0 * x(0) - x(padlen - i);
  ext.segment(padlen, p) = x;
  for (Index i = 0; i < padlen; ++i) ext(padlen + p + i) = 2.0 * x(p - 1) - x(p - 2 - i);

  Vector y = lfilter(b, a, ext, zi * ext(0));
  y.reverseInPlace();
  y = lfilter(b, a, y, zi * y(0));
  y.reverseInPlace();
  return y.segment(padlen, p);
}

}  // namespace

BandSpec BandSpec::sweep(double lo, double hi, double width, double step) {
  BandSpec spec;
  spec.lo = lo;
  spec.hi = hi;
  spec.width = width;
  spec.step = step;
  return spec;
}

BandSpec BandSpec::list(std::vector<std::pair<double, double>> bands) {
  BandSpec spec;
  spec.explicit_bands = std::move(bands);
  return spec;
}

std::vector<std::pair<double, double>> BandSpec::expand() const {
  if (is_explicit()) {
    for (const auto& [lo_k, hi_k] : explicit_bands) {
      if (!(lo_k > 0) || !(hi_k > lo_k))
        throw InvalidBand("band [" + std::to_string(lo_k) + ", " + std::to_string(hi_k) +
                          "] must satisfy 0 < lo < hi");
    }
    return explicit_bands;
  }
  if (!(lo > 0) || !(hi > lo) || !(width > 0) || !(step > 0))
    throw InvalidBand("band sweep needs 0 < lo < hi, width > 0, step > 0");

  std::vector<std::pair<double, double>> bands;
  for (double b = lo; b + width <= hi + 1e-9; b += step) bands.emplace_back(b, b + width);
  if (bands.empty()) throw InvalidBand("band sweep produces no subbands");
  return bands;
}

BandSpec parse_band_arg(const std::string& arg) {
  std::vector<double> parts;
  const char sep = arg.find(':') != std::string::npos ? ':' : '-';
  std::istringstream in(arg);
  std::string token;
  while (std::getline(in, token, sep)) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw InvalidBand("cannot parse band argument '" + arg + "'");
    }
  }
  if (sep == ':' && parts.size() == 4)
    return BandSpec::sweep(parts[0], parts[1], parts[2], parts[3]);
  if (sep == '-' && parts.size() == 2) return BandSpec::list({{parts[0], parts[1]}});
  throw InvalidBand("band argument '" + arg + "' must be lo:hi:width:step or lo-hi");
}

BandSpec load_band_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open band list: " + path.string());
  std::vector<std::pair<double, double>> bands;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    double lo = 0, hi = 0;
    char comma = 0;
    std::istringstream row(line);
    if (!(row >> lo >> comma >> hi) || comma != ',')
      throw InvalidBand(path.string() + ":" + std::to_string(lineno) +
                        ": expected 'lo,hi'");
    bands.emplace_back(lo, hi);
  }
  if (bands.empty()) throw InvalidBand("band list " + path.string() + " is empty");
  return BandSpec::list(std::move(bands));
}

FilterBank design_filter_bank(const BandSpec& spec, double fs, int order) {
  if (!(fs > 0)) throw InvalidBand("sampling rate must be positive");
  if (order < 1) throw InvalidBand("filter order must be >= 1");

  FilterBank bank;
  bank.order = order;
  bank.fs = fs;
  for (const auto& [lo, hi] : spec.expand()) {
    if (!(hi < fs / 2))
      throw InvalidBand("band [" + std::to_string(lo) + ", " + std::to_string(hi) +
                        "] reaches the Nyquist rate of fs = " + std::to_string(fs));
    BandFilter filt = design_bandpass(lo, hi, fs, order);
    const double mag = max_root_magnitude(filt.a);
    if (!(mag < 1.0))
      throw UnstableFilter("band [" + std::to_string(lo) + ", " + std::to_string(hi) +
                           "] yields pole magnitude " + std::to_string(mag));
    bank.bands.push_back(std::move(filt));
  }
  return bank;
}

Matrix filtfilt(const Vector& b, const Vector& a, const Matrix& x) {
  if (b.size() != a.size() || a.size() < 2)
    throw InvalidBand("filter coefficient vectors must match and hold >= 2 taps");
  if (x.cols() < 2) throw ShapeMismatch("filtfilt needs at least 2 samples");

  const Vector zi = steady_state_zi(b, a);
  Matrix y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r)
    y.row(r) = filtfilt_row(b, a, x.row(r).transpose(), zi).transpose();
  return y;
}

std::vector<Trial> apply_filter_bank(const Trial& trial, const FilterBank& bank) {
  if (trial.fs != bank.fs)
    throw SampleRateMismatch("trial at " + std::to_string(trial.fs) +
                             " Hz vs filter bank at " + std::to_string(bank.fs) + " Hz");
  std::vector<Trial> out;
  out.reserve(bank.bands.size());
  for (const BandFilter& band : bank.bands) {
    Trial filtered;
    filtered.data = filtfilt(band.b, band.a, trial.data);
    filtered.label = trial.label;
    filtered.fs = trial.fs;
    out.push_back(std::move(filtered));
  }
  return out;
}

std::vector<Matrix> batch_filter(const TrialSet& set, const BandFilter& band, int threads) {
  std::vector<Matrix> out(set.trials.size());
  parallel_for(
      static_cast<std::ptrdiff_t>(set.trials.size()),
      [&](std::ptrdiff_t i) {
        out[static_cast<std::size_t>(i)] =
            filtfilt(band.b, band.a, set.trials[static_cast<std::size_t>(i)].data);
      },
      threads);
  return out;
}

namespace reference {

std::vector<Matrix> batch_filter(const TrialSet& set, const BandFilter& band) {
  std::vector<Matrix> out;
  out.reserve(set.trials.size());
  for (const Trial& trial : set.trials)
    out.push_back(srmtl::signal::filtfilt(band.b, band.a, trial.data));
  return out;
}

}  // namespace reference

}  // namespace srmtl::signal
