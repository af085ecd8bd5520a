#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "srmtl/types.hpp"

namespace srmtl::dataio {

/// Configuration of the synthetic trial generator. Each class is a mixture
/// of `subclasses_per_class` generators; generator g emits a sinusoid at
/// band_centers[g] Hz with a random phase per trial, projected onto a
/// spatial pattern drawn once per (class, generator), plus white noise
/// scaled to snr_db.
struct SynthConfig {
  int n_per_class = 60;
  int channels = 8;
  Index samples = 1000;
  double fs = 250.0;
  int subclasses_per_class = 2;
  std::vector<double> band_centers = {10.0, 22.0};
  double snr_db = 15.0;
  std::uint64_t seed = 1;
};

void validate(const SynthConfig& cfg);

// Pure function of cfg: the same config (seed included) reproduces every
// sample bit for bit. Trials are ordered class 1 first, then class 2;
// samples are quantized to the float32 storage precision at generation so
// on-disk round trips are exact.
TrialSet synth_dataset(const SynthConfig& cfg);

// Ground-truth generator id (within its class) for trial `index` of a
// synthetic set: trial j of a class belongs to generator j mod S.
int planted_generator(const SynthConfig& cfg, int index);

// Manifest-driven loading. Manifest schema (JSON):
//   {name, fs_hz, channels: [..], window: {offset_s, length_s},
//    trials: [{file, label}]}
// Trial files are raw little-endian float32, row-major C x P, no header.
// `window` is optional; when present the epoch [offset_s, offset_s+length_s)
// is cut from each file (0.5-3.5 s post-cue is the usual choice for
// cue-aligned recordings), otherwise the whole file is used.
TrialSet load_dataset(const std::filesystem::path& manifest_path);

// Writes manifest + one .f32 file per trial into dir; returns the manifest
// path. The manifest carries an explicit whole-file window so a reload is
// bit-exact.
std::filesystem::path save_dataset(const TrialSet& set, const std::filesystem::path& dir,
                                   const std::string& name);

Matrix read_raw_trial(const std::filesystem::path& path, Index channels);
void write_raw_trial(const std::filesystem::path& path, const Matrix& data);

}  // namespace srmtl::dataio
