#include "srmtl/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "srmtl/classify.hpp"
#include "srmtl/csp.hpp"
#include "srmtl/dataio.hpp"
#include "srmtl/errors.hpp"
#include "srmtl/mtl.hpp"
#include "srmtl/parallel.hpp"
#include "srmtl/pipeline.hpp"
#include "srmtl/provenance.hpp"
#include "srmtl/signal.hpp"
#include "srmtl/subclass.hpp"
#include "srmtl/tomlite.hpp"

namespace srmtl::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidConfig("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw InvalidConfig("write failed: " + path.string());
}

// Reports go to --out when given, to stdout otherwise.
void emit(const std::optional<std::string>& out_path, const std::string& text) {
  if (out_path)
    write_file(*out_path, text);
  else
    std::cout << text;
}

// Datasets are stored with a schema-pinned manifest, so run provenance is
// added as an extra top-level key rather than a CSV-style comment block.
void inject_provenance(const fs::path& manifest_path, const Provenance& p) {
  std::ifstream in(manifest_path);
  if (!in) throw MissingFile("cannot reopen manifest: " + manifest_path.string());
  nlohmann::json j;
  in >> j;
  in.close();
  j["provenance"] = {{"config_hash", p.config_hash},
                     {"seed", p.seed},
                     {"threads", p.threads},
                     {"versions", library_versions()}};
  write_file(manifest_path, j.dump(2) + "\n");
}

int resolve_threads(int threads) { return threads == 0 ? max_workers() : threads; }

// ---------------------------------------------------------------------------
// Feature CSV: provenance comments, then "trial,label,<name>..." with one row
// per trial. Written by `features`, read back by `cluster`, `train`, `rsq`.

struct FeatureFile {
  std::vector<int> trial_index;
  std::vector<int> labels;
  Matrix values;
  std::vector<std::string> names;
};

std::string column_name(const csp::ColumnInfo& info) {
  return "b" + fmt(info.lo) + "-" + fmt(info.hi) + "_u" + std::to_string(info.filter);
}

std::string feature_csv(const csp::FeatureMatrix& fm, const std::vector<int>& labels,
                        const Provenance& p) {
  std::ostringstream out;
  out << csv_provenance_block(p);
  out << "trial,label";
  for (const csp::ColumnInfo& info : fm.layout) out << ',' << column_name(info);
  out << '\n';
  for (Index i = 0; i < fm.values.rows(); ++i) {
    out << i << ',' << labels[static_cast<std::size_t>(i)];
    for (Index j = 0; j < fm.values.cols(); ++j) out << ',' << fmt(fm.values(i, j));
    out << '\n';
  }
  return out.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

FeatureFile read_feature_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open feature file: " + path.string());

  FeatureFile ff;
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  const auto fail = [&](const std::string& msg) {
    throw SchemaViolation(path.string() + ":" + std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (!header_seen) {
      if (fields.size() < 3 || fields[0] != "trial" || fields[1] != "label")
        fail("expected header starting with trial,label");
      ff.names.assign(fields.begin() + 2, fields.end());
      header_seen = true;
      continue;
    }
    if (fields.size() != ff.names.size() + 2) fail("wrong field count");
    try {
      ff.trial_index.push_back(std::stoi(fields[0]));
      const int label = std::stoi(fields[1]);
      if (label != 1 && label != 2) fail("label must be 1 or 2");
      ff.labels.push_back(label);
      std::vector<double> row(ff.names.size());
      for (std::size_t j = 0; j < ff.names.size(); ++j) row[j] = std::stod(fields[j + 2]);
      rows.push_back(std::move(row));
    } catch (const std::invalid_argument&) {
      fail("malformed number");
    } catch (const std::out_of_range&) {
      fail("number out of range");
    }
  }
  if (!header_seen) fail("no header line found");
  if (rows.empty()) fail("no data rows");

  ff.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(ff.names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      ff.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return ff;
}

// ---------------------------------------------------------------------------
// Config loading

std::optional<double> parse_preference(const std::string& text) {
  if (text == "median") return std::nullopt;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw InvalidConfig("preference must be 'median' or a number, got '" + text + "'");
  }
  if (used != text.size())
    throw InvalidConfig("preference must be 'median' or a number, got '" + text + "'");
  return v;
}

signal::BandSpec bands_from_entries(const std::vector<std::string>& entries) {
  std::vector<std::pair<double, double>> pairs;
  for (const std::string& entry : entries)
    for (const auto& band : signal::parse_band_arg(entry).expand()) pairs.push_back(band);
  return signal::BandSpec::list(pairs);
}

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "data.manifests",    "data.synth",
      "synth.n_per_class", "synth.channels", "synth.samples", "synth.fs_hz",
      "synth.subclasses_per_class", "synth.band_centers", "synth.snr_db", "synth.seed",
      "synth.name",
      "bands.lo", "bands.hi", "bands.width", "bands.step", "bands.list", "bands.order",
      "bands.single_lo", "bands.single_hi",
      "csp.pairs", "csp.center", "csp.trace_normalize",
      "cluster.damping", "cluster.max_iters", "cluster.convergence_window",
      "cluster.preference", "cluster.zscore",
      "solver.max_iters", "solver.tol", "solver.lambda1_grid", "solver.lambda2_grid",
      "svm.c",
      "cv.outer_folds", "cv.inner_folds", "cv.repeats", "cv.seed", "cv.method", "cv.threads",
  };
  return keys;
}

void reject_unknown_keys(const TomlTable& t) {
  for (const std::string& key : t.keys_with_prefix(""))
    if (!known_config_keys().contains(key))
      throw SchemaViolation("unrecognized config key: " + key);
}

dataio::SynthConfig synth_from_toml(const TomlTable& t) {
  dataio::SynthConfig cfg;
  cfg.n_per_class = static_cast<int>(t.get_int_or("synth.n_per_class", cfg.n_per_class));
  cfg.channels = static_cast<int>(t.get_int_or("synth.channels", cfg.channels));
  cfg.samples = static_cast<Index>(t.get_int_or("synth.samples", cfg.samples));
  cfg.fs = t.get_double_or("synth.fs_hz", cfg.fs);
  cfg.subclasses_per_class =
      static_cast<int>(t.get_int_or("synth.subclasses_per_class", cfg.subclasses_per_class));
  if (t.has("synth.band_centers")) cfg.band_centers = t.get_double_array("synth.band_centers");
  cfg.snr_db = t.get_double_or("synth.snr_db", cfg.snr_db);
  cfg.seed = static_cast<std::uint64_t>(t.get_int_or("synth.seed", 1));
  return cfg;
}

pipeline::PipelineConfig pipeline_from_toml(const TomlTable& t) {
  pipeline::PipelineConfig cfg;
  if (t.has("bands.list")) {
    cfg.bands = bands_from_entries(t.get_string_array("bands.list"));
  } else {
    cfg.bands = signal::BandSpec::sweep(
        t.get_double_or("bands.lo", 4), t.get_double_or("bands.hi", 40),
        t.get_double_or("bands.width", 4), t.get_double_or("bands.step", 2));
  }
  cfg.single_band_lo = t.get_double_or("bands.single_lo", cfg.single_band_lo);
  cfg.single_band_hi = t.get_double_or("bands.single_hi", cfg.single_band_hi);
  cfg.filter_order = static_cast<int>(t.get_int_or("bands.order", cfg.filter_order));
  cfg.csp_pairs = static_cast<int>(t.get_int_or("csp.pairs", cfg.csp_pairs));
  cfg.covariance.center = t.get_bool_or("csp.center", cfg.covariance.center);
  cfg.covariance.trace_normalize =
      t.get_bool_or("csp.trace_normalize", cfg.covariance.trace_normalize);
  cfg.ap.damping = t.get_double_or("cluster.damping", cfg.ap.damping);
  cfg.ap.max_iters = static_cast<int>(t.get_int_or("cluster.max_iters", cfg.ap.max_iters));
  cfg.ap.convergence_window =
      static_cast<int>(t.get_int_or("cluster.convergence_window", cfg.ap.convergence_window));
  if (t.has("cluster.preference"))
    cfg.ap.preference = parse_preference(t.get_string("cluster.preference"));
  cfg.ap.zscore_features = t.get_bool_or("cluster.zscore", cfg.ap.zscore_features);
  cfg.solver.max_iters = static_cast<int>(t.get_int_or("solver.max_iters", cfg.solver.max_iters));
  cfg.solver.tol = t.get_double_or("solver.tol", cfg.solver.tol);
  if (t.has("solver.lambda1_grid")) cfg.lambda1_grid = t.get_double_array("solver.lambda1_grid");
  if (t.has("solver.lambda2_grid")) cfg.lambda2_grid = t.get_double_array("solver.lambda2_grid");
  cfg.svm_c = t.get_double_or("svm.c", cfg.svm_c);
  cfg.outer_folds = static_cast<int>(t.get_int_or("cv.outer_folds", cfg.outer_folds));
  cfg.inner_folds = static_cast<int>(t.get_int_or("cv.inner_folds", cfg.inner_folds));
  cfg.repeats = static_cast<int>(t.get_int_or("cv.repeats", cfg.repeats));
  cfg.seed = static_cast<std::uint64_t>(t.get_int_or("cv.seed", 1));
  cfg.method = pipeline::method_from_string(t.get_string_or("cv.method", "srmtl"));
  cfg.threads = static_cast<int>(t.get_int_or("cv.threads", cfg.threads));
  return cfg;
}

// Datasets for crossval/compare: explicit --data manifests win, then
// [data].manifests, then a [synth] block when data.synth = true.
std::vector<fs::path> config_manifests(const TomlTable& t) {
  std::vector<fs::path> out;
  if (t.has("data.manifests"))
    for (const std::string& m : t.get_string_array("data.manifests")) out.emplace_back(m);
  return out;
}

std::string synth_canonical(const dataio::SynthConfig& cfg) {
  std::ostringstream out;
  out << "band_centers = ";
  for (std::size_t i = 0; i < cfg.band_centers.size(); ++i)
    out << (i ? "," : "") << fmt(cfg.band_centers[i]);
  out << '\n';
  out << "channels = " << cfg.channels << '\n';
  out << "fs_hz = " << fmt(cfg.fs) << '\n';
  out << "n_per_class = " << cfg.n_per_class << '\n';
  out << "samples = " << cfg.samples << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "snr_db = " << fmt(cfg.snr_db) << '\n';
  out << "subclasses_per_class = " << cfg.subclasses_per_class << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Subcommand options

struct SynthOpts {
  std::string config, out_dir;
  std::string name = "synthetic";
  std::uint64_t seed = 0;
  bool seed_set = false, name_set = false;
};

struct FilterOpts {
  std::string data, bands = "4:40:4:2", band_list, out_dir;
  int order = 4, threads = 0;
};

struct FeaturesOpts {
  std::string train, bands = "4:40:4:2", band_list;
  std::optional<std::string> out;
  int m = 2, order = 4, threads = 0;
  bool trace_normalize = false, no_center = false;
};

struct ClusterOpts {
  std::string features;
  std::optional<std::string> out;
  double damping = 0.7;
  int max_iters = 500, window = 50;
  std::string preference = "median";
  bool zscore = false;
};

struct TrainOpts {
  std::string features;
  double lambda1 = 0, lambda2 = 0;
  int max_iters = 200;
  double tol = 1e-6;
  std::optional<std::string> trace, model;
  double svm_c = 1.0;
  std::uint64_t seed = 1;
  bool single_task = false;
  double damping = 0.7;
  int ap_max_iters = 500, ap_window = 50;
  std::string preference = "median";
  bool zscore = false;
};

struct CrossvalOpts {
  std::string config, data, method;
  std::optional<std::string> out, json;
  std::uint64_t seed = 0;
  bool seed_set = false, method_set = false;
  int threads = -1;
};

struct CompareOpts {
  std::string config;
  std::vector<std::string> data;
  std::optional<std::string> out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = -1;
};

struct RsqOpts {
  std::string features;
  std::optional<std::string> out;
  bool skip_constant = false;
};

// ---------------------------------------------------------------------------
// Subcommand bodies

void cmd_synth(const SynthOpts& o) {
  dataio::SynthConfig cfg;
  std::string name = o.name;
  if (!o.config.empty()) {
    const TomlTable t = TomlTable::parse_file(o.config);
    reject_unknown_keys(t);
    cfg = synth_from_toml(t);
    if (!o.name_set) name = t.get_string_or("synth.name", name);
  }
  if (o.seed_set) cfg.seed = o.seed;

  const TrialSet set = dataio::synth_dataset(cfg);
  const fs::path manifest = dataio::save_dataset(set, o.out_dir, name);
  inject_provenance(manifest, {fnv1a_hex(synth_canonical(cfg)), cfg.seed, 1});
  std::cout << manifest.string() << '\n';
}

void cmd_filter(const FilterOpts& o) {
  const TrialSet set = dataio::load_dataset(o.data);
  const signal::BandSpec spec = o.band_list.empty() ? signal::parse_band_arg(o.bands)
                                                    : signal::load_band_list(o.band_list);
  const signal::FilterBank bank = signal::design_filter_bank(spec, set.fs(), o.order);

  std::ostringstream canon;
  canon << "command = filter\norder = " << o.order << "\nbands = ";
  for (std::size_t i = 0; i < bank.bands.size(); ++i)
    canon << (i ? "," : "") << fmt(bank.bands[i].lo) << '-' << fmt(bank.bands[i].hi);
  canon << '\n';
  const Provenance p{fnv1a_hex(canon.str()), 0, resolve_threads(o.threads)};

  for (std::size_t bi = 0; bi < bank.bands.size(); ++bi) {
    const signal::BandFilter& band = bank.bands[bi];
    const std::vector<Matrix> filtered = signal::batch_filter(set, band, o.threads);
    TrialSet banded = set;
    for (std::size_t i = 0; i < banded.trials.size(); ++i) banded.trials[i].data = filtered[i];

    std::ostringstream dir_name;
    dir_name << "band_" << std::setfill('0') << std::setw(2) << bi << '_' << fmt(band.lo) << '-'
             << fmt(band.hi);
    const std::string band_tag = fmt(band.lo) + "-" + fmt(band.hi) + "Hz";
    const fs::path manifest =
        dataio::save_dataset(banded, fs::path(o.out_dir) / dir_name.str(), band_tag);
    inject_provenance(manifest, p);
  }
  std::cout << bank.bands.size() << " band datasets written to " << o.out_dir << '\n';
}

void cmd_features(const FeaturesOpts& o) {
  const TrialSet set = dataio::load_dataset(o.train);
  const signal::BandSpec spec = o.band_list.empty() ? signal::parse_band_arg(o.bands)
                                                    : signal::load_band_list(o.band_list);
  const signal::FilterBank bank = signal::design_filter_bank(spec, set.fs(), o.order);
  csp::CovarianceOptions cov;
  cov.center = !o.no_center;
  cov.trace_normalize = o.trace_normalize;

  const auto [fm, model] = csp::fit_feature_matrix(set, bank, o.m, cov, o.threads);

  std::ostringstream canon;
  canon << "center = " << (cov.center ? "true" : "false") << '\n'
        << "command = features\nm = " << o.m << "\norder = " << o.order << '\n'
        << "trace_normalize = " << (cov.trace_normalize ? "true" : "false") << '\n'
        << "bands = ";
  for (std::size_t i = 0; i < bank.bands.size(); ++i)
    canon << (i ? "," : "") << fmt(bank.bands[i].lo) << '-' << fmt(bank.bands[i].hi);
  canon << '\n';
  const Provenance p{fnv1a_hex(canon.str()), 0, resolve_threads(o.threads)};
  emit(o.out, feature_csv(fm, set.labels(), p));
}

void cmd_cluster(const ClusterOpts& o) {
  const FeatureFile ff = read_feature_csv(o.features);
  subclass::ApConfig ap;
  ap.damping = o.damping;
  ap.max_iters = o.max_iters;
  ap.convergence_window = o.window;
  ap.preference = parse_preference(o.preference);
  ap.zscore_features = o.zscore;

  const subclass::SubclassPartition partition =
      subclass::discover_subclasses(ff.values, ff.labels, ap);

  std::ostringstream canon;
  canon << "command = cluster\nconvergence_window = " << ap.convergence_window
        << "\ndamping = " << fmt(ap.damping) << "\nmax_iters = " << ap.max_iters
        << "\npreference = " << (ap.preference ? fmt(*ap.preference) : "median")
        << "\nzscore = " << (ap.zscore_features ? "true" : "false") << '\n';

  std::ostringstream out;
  out << csv_provenance_block({fnv1a_hex(canon.str()), 0, 1});
  out << "trial_index,class,cluster_id,is_exemplar\n";
  const std::set<int> exemplars(partition.exemplars.begin(), partition.exemplars.end());
  for (std::size_t i = 0; i < ff.labels.size(); ++i) {
    out << ff.trial_index[i] << ',' << ff.labels[i] << ',' << partition.assignment[i] << ','
        << (exemplars.contains(static_cast<int>(i)) ? 1 : 0) << '\n';
  }
  emit(o.out, out.str());
  std::cerr << partition.num_clusters << " clusters"
            << (partition.used_fallback ? " (medoid fallback)" : "") << '\n';
}

void cmd_train(const TrainOpts& o) {
  const FeatureFile ff = read_feature_csv(o.features);
  mtl::SolverOptions solver;
  solver.max_iters = o.max_iters;
  solver.tol = o.tol;

  Matrix w;
  mtl::SolverState state;
  if (o.single_task) {
    if (o.lambda2 != 0)
      throw InvalidConfig("--single-task fits one +-1 column; --lambda2 must be 0");
    Vector y(static_cast<Index>(ff.labels.size()));
    for (std::size_t i = 0; i < ff.labels.size(); ++i)
      y(static_cast<Index>(i)) = ff.labels[i] == 1 ? 1.0 : -1.0;
    auto [col, st] = mtl::solve_lasso(ff.values, y, o.lambda1, solver);
    w = col;
    state = std::move(st);
  } else {
    subclass::ApConfig ap;
    ap.damping = o.damping;
    ap.max_iters = o.ap_max_iters;
    ap.convergence_window = o.ap_window;
    ap.preference = parse_preference(o.preference);
    ap.zscore_features = o.zscore;
    const subclass::SubclassPartition partition =
        subclass::discover_subclasses(ff.values, ff.labels, ap);

    mtl::SrmtlProblem problem;
    problem.F = ff.values;
    problem.Y = subclass::encode_labels(partition);
    if (o.lambda2 != 0)
      problem.L = subclass::build_laplacian(subclass::build_similarity(partition));
    problem.lambda1 = o.lambda1;
    problem.lambda2 = o.lambda2;
    auto [solved, st] = mtl::solve_srmtl(problem, solver);
    w = std::move(solved);
    state = std::move(st);
  }

  std::ostringstream canon;
  canon << "command = train\nlambda1 = " << fmt(o.lambda1) << "\nlambda2 = " << fmt(o.lambda2)
        << "\nmax_iters = " << o.max_iters << "\nsingle_task = "
        << (o.single_task ? "true" : "false") << "\nsvm_c = " << fmt(o.svm_c)
        << "\ntol = " << fmt(o.tol) << '\n';
  const Provenance p{fnv1a_hex(canon.str()), o.seed, 1};

  std::ostringstream trace;
  trace << csv_provenance_block(p);
  trace << "iteration,objective,normalized_error,mu\n";
  for (int t = 0; t < state.iterations; ++t) {
    trace << (t + 1) << ',' << fmt(state.objective[static_cast<std::size_t>(t)]) << ','
          << fmt(state.normalized_error[static_cast<std::size_t>(t)]) << ','
          << fmt(state.mu_trace[static_cast<std::size_t>(t)]) << '\n';
  }
  emit(o.trace, trace.str());

  const std::vector<int> selected = mtl::select_features(w);
  std::cerr << (state.converged ? "converged" : "stopped") << " after " << state.iterations
            << " iterations, " << selected.size() << " of " << w.rows()
            << " features selected\n";

  if (o.model) {
    Matrix sub(ff.values.rows(), static_cast<Index>(selected.size()));
    for (std::size_t j = 0; j < selected.size(); ++j)
      sub.col(static_cast<Index>(j)) = ff.values.col(selected[j]);
    std::vector<int> y_sign(ff.labels.size());
    for (std::size_t i = 0; i < ff.labels.size(); ++i) y_sign[i] = ff.labels[i] == 1 ? 1 : -1;
    const classify::SvmModel model =
        classify::with_indices(classify::train_svm(sub, y_sign, o.svm_c, o.seed), selected);
    write_file(*o.model, classify::to_json(model) + "\n");
  }
}

// Shared by crossval and compare: config file -> (pipeline config, datasets).
struct RunSetup {
  pipeline::PipelineConfig cfg;
  std::vector<fs::path> manifests;  // empty when the dataset is synthesized
  std::optional<TrialSet> synth;
};

RunSetup load_setup(const std::string& config_path, const std::vector<std::string>& data_flags) {
  RunSetup setup;
  if (!config_path.empty()) {
    const TomlTable t = TomlTable::parse_file(config_path);
    reject_unknown_keys(t);
    setup.cfg = pipeline_from_toml(t);
    if (!data_flags.empty()) {
      for (const std::string& d : data_flags) setup.manifests.emplace_back(d);
    } else {
      setup.manifests = config_manifests(t);
      if (setup.manifests.empty() && t.get_bool_or("data.synth", false))
        setup.synth = dataio::synth_dataset(synth_from_toml(t));
    }
  } else {
    for (const std::string& d : data_flags) setup.manifests.emplace_back(d);
  }
  if (setup.manifests.empty() && !setup.synth)
    throw InvalidConfig("no dataset: pass --data or configure [data] in the config file");
  return setup;
}

void cmd_crossval(const CrossvalOpts& o) {
  std::vector<std::string> data_flags;
  if (!o.data.empty()) data_flags.push_back(o.data);
  RunSetup setup = load_setup(o.config, data_flags);
  if (o.method_set) setup.cfg.method = pipeline::method_from_string(o.method);
  if (o.seed_set) setup.cfg.seed = o.seed;
  if (o.threads >= 0) setup.cfg.threads = o.threads;
  if (setup.manifests.size() > 1)
    throw InvalidConfig("crossval takes one dataset; use compare for several");

  const TrialSet set =
      setup.synth ? std::move(*setup.synth) : dataio::load_dataset(setup.manifests.front());
  const pipeline::CvReport report = pipeline::run_crossval(set, setup.cfg);

  emit(o.out, report.canonical_csv());
  if (o.json) write_file(*o.json, report.to_json() + "\n");
  if (o.out) {
    std::cout << pipeline::to_string(report.method) << ": mean accuracy "
              << fmt(report.mean_accuracy) << " +- " << fmt(report.std_accuracy) << " over "
              << report.folds.size() << " folds\n";
  }
}

void cmd_compare(const CompareOpts& o) {
  RunSetup setup = load_setup(o.config, o.data);
  if (o.seed_set) setup.cfg.seed = o.seed;
  if (o.threads >= 0) setup.cfg.threads = o.threads;

  const Provenance p{fnv1a_hex(pipeline::canonical_config(setup.cfg)), setup.cfg.seed,
                     resolve_threads(setup.cfg.threads)};

  if (setup.manifests.size() > 1) {
    const pipeline::SubjectTable table = pipeline::run_subject_table(setup.manifests, setup.cfg);
    emit(o.out, table.csv(p));
    return;
  }

  const TrialSet set =
      setup.synth ? std::move(*setup.synth) : dataio::load_dataset(setup.manifests.front());
  const std::vector<pipeline::CvReport> reports = pipeline::run_method_comparison(set, setup.cfg);

  std::ostringstream out;
  out << csv_provenance_block(p);
  out << "method,mean_accuracy,std_accuracy,folds\n";
  for (const pipeline::CvReport& r : reports) {
    out << pipeline::to_string(r.method) << ',' << fmt(r.mean_accuracy) << ','
        << fmt(r.std_accuracy) << ',' << r.folds.size() << '\n';
  }
  emit(o.out, out.str());
}

void cmd_rsq(const RsqOpts& o) {
  const FeatureFile ff = read_feature_csv(o.features);
  std::vector<int> y_sign(ff.labels.size());
  for (std::size_t i = 0; i < ff.labels.size(); ++i) y_sign[i] = ff.labels[i] == 1 ? 1 : -1;

  std::ostringstream canon;
  canon << "command = rsq\nskip_constant = " << (o.skip_constant ? "true" : "false") << '\n';
  std::ostringstream out;
  out << csv_provenance_block({fnv1a_hex(canon.str()), 0, 1});
  out << "feature,name,r_square\n";
  for (Index j = 0; j < ff.values.cols(); ++j) {
    out << j << ',' << ff.names[static_cast<std::size_t>(j)] << ',';
    try {
      out << fmt(pipeline::r_square(ff.values.col(j), y_sign));
    } catch (const ZeroVariance&) {
      if (!o.skip_constant) throw;
      out << "nan";
    }
    out << '\n';
  }
  emit(o.out, out.str());
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Motor-imagery EEG decoding: filter-bank CSP features, subclass discovery,\n"
               "jointly regularized feature selection, and SVM evaluation.",
               "srmtl"};
  app.require_subcommand(1);

  SynthOpts synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--config", synth.config, "TOML file with a [synth] section");
  synth_cmd->add_option("--out", synth.out_dir, "Output dataset directory")->required();
  CLI::Option* synth_seed =
      synth_cmd->add_option("--seed", synth.seed, "Override the generator seed");
  CLI::Option* synth_name = synth_cmd->add_option("--name", synth.name, "Dataset name");

  FilterOpts filter;
  CLI::App* filter_cmd =
      app.add_subcommand("filter", "Write one bandpass-filtered dataset per subband");
  filter_cmd->add_option("--data", filter.data, "Dataset manifest")->required();
  filter_cmd->add_option("--bands", filter.bands, "lo:hi:width:step sweep or lo-hi single band");
  filter_cmd->add_option("--band-list", filter.band_list, "File with one lo,hi pair per line");
  filter_cmd->add_option("--order", filter.order, "Butterworth prototype order");
  filter_cmd->add_option("--threads", filter.threads, "Worker cap (0 = all)");
  filter_cmd->add_option("--out", filter.out_dir, "Output directory")->required();

  FeaturesOpts features;
  CLI::App* features_cmd =
      app.add_subcommand("features", "Fit filter-bank CSP and write the feature matrix");
  features_cmd->add_option("--train", features.train, "Training dataset manifest")->required();
  features_cmd->add_option("--m", features.m, "Spatial filter pairs per band");
  features_cmd->add_option("--bands", features.bands, "lo:hi:width:step sweep or lo-hi band");
  features_cmd->add_option("--band-list", features.band_list, "File with one lo,hi per line");
  features_cmd->add_option("--order", features.order, "Butterworth prototype order");
  features_cmd->add_flag("--trace-normalize", features.trace_normalize,
                         "Divide each trial covariance by its trace");
  features_cmd->add_flag("--no-center", features.no_center, "Skip row-mean centering");
  features_cmd->add_option("--threads", features.threads, "Worker cap (0 = all)");
  features_cmd->add_option("--out", features.out,
                           "Feature CSV path (default: stdout)");

  ClusterOpts cluster;
  CLI::App* cluster_cmd =
      app.add_subcommand("cluster", "Discover per-class subclasses by affinity propagation");
  cluster_cmd->add_option("--features", cluster.features, "Feature CSV from `features`")
      ->required();
  cluster_cmd->add_option("--damping", cluster.damping, "Message damping in [0.5, 1)");
  cluster_cmd->add_option("--max-iters", cluster.max_iters, "Message-passing iteration cap");
  cluster_cmd->add_option("--window", cluster.window, "Stable iterations before convergence");
  cluster_cmd->add_option("--preference", cluster.preference, "'median' or a number");
  cluster_cmd->add_flag("--zscore", cluster.zscore, "Z-score columns per class before clustering");
  cluster_cmd->add_option("--out", cluster.out, "Partition CSV path (default: stdout)");

  TrainOpts train;
  CLI::App* train_cmd = app.add_subcommand(
      "train", "Solve the joint feature-selection problem and emit the solver trace");
  train_cmd->add_option("--features", train.features, "Feature CSV from `features`")->required();
  train_cmd->add_option("--lambda1", train.lambda1, "Row-sparsity penalty")->required();
  train_cmd->add_option("--lambda2", train.lambda2, "Subclass-graph penalty");
  train_cmd->add_option("--max-iters", train.max_iters, "Solver iteration cap");
  train_cmd->add_option("--tol", train.tol, "Normalized objective-change tolerance");
  train_cmd->add_flag("--single-task", train.single_task,
                      "Fit one +-1 column (lasso) instead of subclass targets");
  train_cmd->add_option("--damping", train.damping, "Clustering damping");
  train_cmd->add_option("--ap-max-iters", train.ap_max_iters, "Clustering iteration cap");
  train_cmd->add_option("--ap-window", train.ap_window, "Clustering convergence window");
  train_cmd->add_option("--preference", train.preference, "'median' or a number");
  train_cmd->add_flag("--zscore", train.zscore, "Z-score columns per class before clustering");
  train_cmd->add_option("--svm-c", train.svm_c, "SVM cost for --model");
  train_cmd->add_option("--seed", train.seed, "SVM epoch-shuffle seed");
  train_cmd->add_option("--trace", train.trace, "Solver trace CSV path (default: stdout)");
  train_cmd->add_option("--model", train.model, "Write the fitted SVM as JSON");

  CrossvalOpts crossval;
  CLI::App* crossval_cmd =
      app.add_subcommand("crossval", "Repeated stratified cross-validation for one method");
  crossval_cmd->add_option("--config", crossval.config, "TOML pipeline configuration");
  crossval_cmd->add_option("--data", crossval.data, "Dataset manifest");
  CLI::Option* cv_method = crossval_cmd->add_option(
      "--method", crossval.method, "csp-only, sfbcsp, mtl, or srmtl");
  CLI::Option* cv_seed = crossval_cmd->add_option("--seed", crossval.seed, "Fold/SVM seed");
  crossval_cmd->add_option("--threads", crossval.threads, "Worker cap (0 = all)");
  crossval_cmd->add_option("--out", crossval.out, "Report CSV path (default: stdout)");
  crossval_cmd->add_option("--json", crossval.json, "Full JSON report path");

  CompareOpts compare;
  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "Run all four methods on shared folds; several datasets give a subject table");
  compare_cmd->add_option("--config", compare.config, "TOML pipeline configuration");
  compare_cmd->add_option("--data", compare.data, "Dataset manifest (repeatable)");
  CLI::Option* cmp_seed = compare_cmd->add_option("--seed", compare.seed, "Fold/SVM seed");
  compare_cmd->add_option("--threads", compare.threads, "Worker cap (0 = all)");
  compare_cmd->add_option("--out", compare.out, "Table CSV path (default: stdout)");

  RsqOpts rsq;
  CLI::App* rsq_cmd =
      app.add_subcommand("rsq", "Squared point-biserial correlation per feature column");
  rsq_cmd->add_option("--features", rsq.features, "Feature CSV from `features`")->required();
  rsq_cmd->add_flag("--skip-constant", rsq.skip_constant,
                    "Write nan for constant columns instead of failing");
  rsq_cmd->add_option("--out", rsq.out, "Report CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
    synth.seed_set = synth_seed->count() > 0;
    synth.name_set = synth_name->count() > 0;
    crossval.method_set = cv_method->count() > 0;
    crossval.seed_set = cv_seed->count() > 0;
    compare.seed_set = cmp_seed->count() > 0;

    if (*synth_cmd) cmd_synth(synth);
    if (*filter_cmd) cmd_filter(filter);
    if (*features_cmd) cmd_features(features);
    if (*cluster_cmd) cmd_cluster(cluster);
    if (*train_cmd) cmd_train(train);
    if (*crossval_cmd) cmd_crossval(crossval);
    if (*compare_cmd) cmd_compare(compare);
    if (*rsq_cmd) cmd_rsq(rsq);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace srmtl::cli
