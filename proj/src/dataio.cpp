#include "srmtl/dataio.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "srmtl/errors.hpp"
#include "srmtl/rng.hpp"

namespace srmtl::dataio {

namespace {

using nlohmann::json;

// Trial files are little-endian on disk regardless of host order.
void store_f32(std::ofstream& out, float value) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  if constexpr (std::endian::native == std::endian::big) {
    bits = ((bits & 0xff000000u) >> 24) | ((bits & 0x00ff0000u) >> 8) |
           ((bits & 0x0000ff00u) << 8) | ((bits & 0x000000ffu) << 24);
  }
  char bytes[4];
  std::memcpy(bytes, &bits, 4);
  out.write(bytes, 4);
}

float load_f32(const char* bytes) {
  std::uint32_t bits;
  std::memcpy(&bits, bytes, 4);
  if constexpr (std::endian::native == std::endian::big) {
    bits = ((bits & 0xff000000u) >> 24) | ((bits & 0x00ff0000u) >> 8) |
           ((bits & 0x0000ff00u) << 8) | ((bits & 0x000000ffu) << 24);
  }
  return std::bit_cast<float>(bits);
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.n_per_class < 1) throw InvalidConfig("n_per_class must be >= 1");
  if (cfg.channels < 2) throw InvalidConfig("need at least 2 channels");
  if (cfg.samples < 2) throw InvalidConfig("need at least 2 samples per trial");
  if (!(cfg.fs > 0)) throw InvalidConfig("sampling rate must be positive");
  if (cfg.subclasses_per_class < 1) throw InvalidConfig("subclasses_per_class must be >= 1");
  if (cfg.n_per_class < cfg.subclasses_per_class)
    throw InvalidConfig("every generator needs at least one trial per class");
  if (static_cast<int>(cfg.band_centers.size()) < cfg.subclasses_per_class)
    throw InvalidConfig("need one band center per subclass generator");
  for (double f : cfg.band_centers) {
    if (!(f > 0) || !(f < cfg.fs / 2))
      throw InvalidConfig("band center " + std::to_string(f) +
                          " Hz outside (0, Nyquist) for fs = " + std::to_string(cfg.fs));
  }
  if (!std::isfinite(cfg.snr_db)) throw InvalidConfig("snr_db must be finite");
}

TrialSet synth_dataset(const SynthConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);

  const int S = cfg.subclasses_per_class;
  const Index C = cfg.channels;
  const Index P = cfg.samples;

  // One unit-norm spatial pattern per (class, generator), drawn up front so
  // the stream layout is independent of n_per_class.
  std::vector<Vector> patterns(static_cast<std::size_t>(2 * S));
  for (auto& pattern : patterns) {
    pattern.resize(C);
    for (Index c = 0; c < C; ++c) pattern(c) = rng.normal();
    pattern.normalize();
  }

  const double snr_linear = std::pow(10.0, cfg.snr_db / 10.0);

  TrialSet set;
  set.channel_names.reserve(static_cast<std::size_t>(C));
  for (Index c = 0; c < C; ++c) {
    std::ostringstream name;
    name << "ch" << std::setw(2) << std::setfill('0') << (c + 1);
    set.channel_names.push_back(name.str());
  }

  set.trials.reserve(static_cast<std::size_t>(2 * cfg.n_per_class));
  for (int cls = 0; cls < 2; ++cls) {
    for (int j = 0; j < cfg.n_per_class; ++j) {
      const int g = j % S;
      const Vector& pattern = patterns[static_cast<std::size_t>(cls * S + g)];
      const double f = cfg.band_centers[static_cast<std::size_t>(g)];
      const double phase = rng.uniform() * 2.0 * std::numbers::pi;

      Vector carrier(P);
      for (Index i = 0; i < P; ++i)
        carrier(i) = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / cfg.fs +
                              phase);
      Matrix signal = pattern * carrier.transpose();

      Matrix noise(C, P);
      for (Index c = 0; c < C; ++c)
        for (Index i = 0; i < P; ++i) noise(c, i) = rng.normal();

      // Scale the realized noise so the per-trial SNR is exact, not just
      // exact in expectation.
      const double scale =
          std::sqrt(signal.squaredNorm() / (snr_linear * noise.squaredNorm()));

      Trial trial;
      trial.label = cls + 1;
      trial.fs = cfg.fs;
      trial.data = (signal + scale * noise)
                       .unaryExpr([](double v) {
                         return static_cast<double>(static_cast<float>(v));
                       });
      set.trials.push_back(std::move(trial));
    }
  }
  return set;
}

int planted_generator(const SynthConfig& cfg, int index) {
  if (index < 0 || index >= 2 * cfg.n_per_class)
    throw IndexOutOfRange("trial index " + std::to_string(index) + " out of range");
  const int j = index % cfg.n_per_class;
  return j % cfg.subclasses_per_class;
}

Matrix read_raw_trial(const std::filesystem::path& path, Index channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile("cannot open trial file: " + path.string());
  in.seekg(0, std::ios::end);
  const std::streamoff bytes = in.tellg();
  in.seekg(0, std::ios::beg);

  if (channels < 1) throw ShapeMismatch("channel count must be positive");
  if (bytes <= 0 || bytes % 4 != 0)
    throw ShapeMismatch("trial file size not a multiple of 4 bytes: " + path.string());
  const Index count = static_cast<Index>(bytes / 4);
  if (count % channels != 0)
    throw ShapeMismatch("trial file " + path.string() + " holds " + std::to_string(count) +
                        " samples, not divisible by " + std::to_string(channels) +
                        " channels");
  const Index samples = count / channels;

  std::vector<char> buffer(static_cast<std::size_t>(bytes));
  in.read(buffer.data(), bytes);
  if (!in) throw MissingFile("short read on trial file: " + path.string());

  Matrix data(channels, samples);
  for (Index c = 0; c < channels; ++c)
    for (Index p = 0; p < samples; ++p)
      data(c, p) = load_f32(buffer.data() + 4 * (c * samples + p));
  return data;
}

void write_raw_trial(const std::filesystem::path& path, const Matrix& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingFile("cannot write trial file: " + path.string());
  for (Index c = 0; c < data.rows(); ++c)
    for (Index p = 0; p < data.cols(); ++p) store_f32(out, static_cast<float>(data(c, p)));
  if (!out) throw MissingFile("write failed for trial file: " + path.string());
}

TrialSet load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw MissingFile("cannot open manifest: " + manifest_path.string());

  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw SchemaViolation("manifest " + manifest_path.string() + " is not valid JSON: " +
                          e.what());
  }

  for (const char* key : {"name", "fs_hz", "channels", "trials"}) {
    if (!manifest.contains(key))
      throw SchemaViolation("manifest missing required key '" + std::string(key) + "'");
  }
  if (!manifest["fs_hz"].is_number())
    throw SchemaViolation("manifest fs_hz must be a number");
  const double fs = manifest["fs_hz"].get<double>();
  if (!(fs > 0)) throw SchemaViolation("manifest fs_hz must be positive");

  if (!manifest["channels"].is_array() || manifest["channels"].empty())
    throw SchemaViolation("manifest channels must be a non-empty array");
  std::vector<std::string> channel_names;
  for (const auto& item : manifest["channels"]) {
    if (!item.is_string()) throw SchemaViolation("manifest channel names must be strings");
    channel_names.push_back(item.get<std::string>());
  }
  const Index channels = static_cast<Index>(channel_names.size());

  bool windowed = false;
  Index offset = 0, length = 0;
  if (manifest.contains("window")) {
    const auto& w = manifest["window"];
    if (!w.is_object() || !w.contains("offset_s") || !w.contains("length_s"))
      throw SchemaViolation("manifest window needs offset_s and length_s");
    const double offset_s = w["offset_s"].get<double>();
    const double length_s = w["length_s"].get<double>();
    if (offset_s < 0 || !(length_s > 0))
      throw SchemaViolation("manifest window must have offset_s >= 0 and length_s > 0");
    windowed = true;
    offset = static_cast<Index>(std::llround(offset_s * fs));
    length = static_cast<Index>(std::llround(length_s * fs));
    if (length < 2) throw SchemaViolation("manifest window shorter than 2 samples");
  }

  if (!manifest["trials"].is_array() || manifest["trials"].empty())
    throw SchemaViolation("manifest trials must be a non-empty array");

  const std::filesystem::path base = manifest_path.parent_path();
  TrialSet set;
  set.channel_names = channel_names;
  set.trials.reserve(manifest["trials"].size());
  for (const auto& entry : manifest["trials"]) {
    if (!entry.is_object() || !entry.contains("file") || !entry.contains("label"))
      throw SchemaViolation("each manifest trial needs 'file' and 'label'");
    if (!entry["label"].is_number_integer())
      throw SchemaViolation("trial label must be an integer");
    const int label = entry["label"].get<int>();
    if (label != 1 && label != 2)
      throw SchemaViolation("trial label must be 1 or 2, got " + std::to_string(label));

    const std::filesystem::path file = base / entry["file"].get<std::string>();
    Matrix data = read_raw_trial(file, channels);
    if (windowed) {
      if (offset + length > data.cols())
        throw ShapeMismatch("window [" + std::to_string(offset) + ", " +
                            std::to_string(offset + length) + ") exceeds trial length " +
                            std::to_string(data.cols()) + " in " + file.string());
      data = data.middleCols(offset, length).eval();
    }

    Trial trial;
    trial.data = std::move(data);
    trial.label = label;
    trial.fs = fs;
    set.trials.push_back(std::move(trial));
  }

  srmtl::validate(set, false);
  return set;
}

std::filesystem::path save_dataset(const TrialSet& set, const std::filesystem::path& dir,
                                   const std::string& name) {
  srmtl::validate(set, false);
  std::filesystem::create_directories(dir);

  json manifest;
  manifest["name"] = name;
  manifest["fs_hz"] = set.fs();
  manifest["channels"] = set.channel_names;
  // Explicit whole-file window: a reload slices [0, P) and is bit-exact.
  manifest["window"] = {{"offset_s", 0.0},
                        {"length_s", static_cast<double>(set.samples()) / set.fs()}};

  json trials = json::array();
  for (std::size_t i = 0; i < set.trials.size(); ++i) {
    std::ostringstream file;
    file << "trial_" << std::setw(4) << std::setfill('0') << i << ".f32";
    write_raw_trial(dir / file.str(), set.trials[i].data);
    trials.push_back({{"file", file.str()}, {"label", set.trials[i].label}});
  }
  manifest["trials"] = std::move(trials);

  const std::filesystem::path manifest_path = dir / "manifest.json";
  std::ofstream out(manifest_path);
  if (!out) throw MissingFile("cannot write manifest: " + manifest_path.string());
  out << manifest.dump(2) << '\n';
  return manifest_path;
}

}  // namespace srmtl::dataio
