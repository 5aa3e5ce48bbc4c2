#pragma once

// Command implementations for the partacc executable. Kept in a header so
// the test suite can drive the CLI in-process through run_cli().
//
// Every command renders its stdout and its output files into memory first.
// With --out-dir the files are written together with manifest.json, which
// records the canonical argument list and FNV-1a hashes of everything the
// run produced; `replay` re-executes a manifest and compares the hashes.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include "partacc/error.hpp"
#include "partacc/fitting.hpp"
#include "partacc/io.hpp"
#include "partacc/monte_carlo.hpp"
#include "partacc/parallel.hpp"
#include "partacc/partition_geometry.hpp"
#include "partacc/reference_data.hpp"
#include "partacc/separation_theory.hpp"
#include "partacc/trainer.hpp"

#ifndef PARTACC_VERSION
#define PARTACC_VERSION "0.0.0"
#endif

namespace partacc::cli {

enum exit_code : int {
  exit_ok = 0,
  exit_usage = 2,
  exit_numerical = 3,
  exit_resource_guard = 4,
  exit_divergence = 5,
};

inline constexpr std::uint64_t default_seed = 20211;
inline constexpr double train_guard = 1e8;  // N * L without --force

class ResourceGuard : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline int exit_code_for(errc code) {
  switch (code) {
    case errc::invalid_argument:
    case errc::parse_error:
    case errc::below_range:
    case errc::out_of_calibration_range:
    case errc::dimension_mismatch:
      return exit_usage;
    case errc::training_diverged:
      return exit_divergence;
    default:
      return exit_numerical;
  }
}

/// What one command produced.
struct RunOutput {
  std::string command;
  std::string stdout_text;
  std::map<std::string, std::string> files;
  std::string model_version = std::string(reference::model_version);
  std::vector<std::pair<std::string, std::string>> extra_writes;  // path, contents
};

enum class EstimateMode { theoretical, empirical_table, empirical_law };

inline const std::map<std::string, EstimateMode>& estimate_modes() {
  static const std::map<std::string, EstimateMode> modes{{"theoretical", EstimateMode::theoretical},
                                                         {"empirical-table", EstimateMode::empirical_table},
                                                         {"empirical-law", EstimateMode::empirical_law}};
  return modes;
}

struct Estimate {
  EnsembleIndex b;
  double accuracy = 0.0;
  bool extrapolated = false;
};

inline Estimate estimate(const ProblemSpec& spec, EstimateMode mode, const CoefficientModel& model) {
  spec.validate_sizes();
  if (mode == EstimateMode::theoretical) {
    const auto b = ensemble_index_theoretical(spec);
    return {b, expected_accuracy(b), false};
  }
  const auto coeffs = coefficients_for_dimension(
      spec.d, model, mode == EstimateMode::empirical_table ? CoefficientMode::table_first : CoefficientMode::linear_law);
  const auto b = ensemble_index_empirical(spec, coeffs);
  return {b, expected_accuracy(b), model.find(spec.d) == nullptr};
}

inline io::json number_or_null(double v) { return std::isfinite(v) ? io::json(v) : io::json(nullptr); }

inline CoefficientModel load_model(const std::string& path) {
  if (path.empty()) return CoefficientModel::published();
  const std::string text = io::read_file(path);
  std::istringstream in(text);
  return read_coefficient_model(in, "file:" + io::hash_hex(text));
}

inline std::pair<int, int> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const int v = std::stoi(text);
      return {v, v};
    }
    return {std::stoi(text.substr(0, dots)), std::stoi(text.substr(dots + 2))};
  } catch (const std::exception&) {
    fail(errc::invalid_argument, "range must look like 'a..b' or 'a', got '" + text + "'");
  }
}

// ---- option storage -------------------------------------------------------

struct Options {
  std::uint64_t seed = default_seed;
  unsigned jobs = 0;
  std::string out_dir;

  int d = 2;
  std::int64_t N = 100;
  std::int64_t L = 100;
  std::string mode = "theoretical";
  std::string sweep_mode = "empirical-table";
  std::string model_path;

  std::string table;

  std::string d_range = "2..24";
  bool scenarios = false;

  std::uint64_t S = 0;
  double a = 2.0;
  double b = 0.0;
  std::uint64_t trials = 10000;
  std::size_t histogram_bins = 0;

  int repeats = 5;
  std::int64_t max_epochs = 50000;
  double learning_rate = 1e-3;
  std::int64_t window = 1000;
  double delta = 1e-4;
  bool force = false;

  std::string records_path;
  bool all_d = false;
  std::string emit_model;

  std::string manifest_path;
};

// ---- commands -------------------------------------------------------------

inline void cmd_estimate(const Options& o, RunOutput& run) {
  const ProblemSpec spec{o.d, o.N, o.L};
  const auto mode = estimate_modes().at(o.mode);
  const auto model = load_model(o.model_path);
  const auto est = estimate(spec, mode, model);
  io::json j{{"d", spec.d},
             {"N", spec.N},
             {"L", spec.L},
             {"mode", o.mode},
             {"b", number_or_null(est.b.value())},
             {"inverse_b", est.b.inverse()},
             {"expected_accuracy", est.accuracy},
             {"extrapolated", est.extrapolated},
             {"model_version", mode == EstimateMode::theoretical ? "theory" : model.version}};
  if (mode != EstimateMode::theoretical) run.model_version = model.version;
  run.stdout_text = j.dump(2) + "\n";
  run.files["estimate.json"] = run.stdout_text;
}

inline void cmd_tables(const Options& o, RunOutput& run) {
  std::string csv;
  if (o.table == "1") {
    csv = "d,N,L,real_accuracy,reference_estimate,estimate,deviation\n";
    for (const auto& row : reference::table1) {
      const auto est = estimate({static_cast<int>(row.d), row.N, row.L}, EstimateMode::theoretical, {});
      csv += fmt::format("{},{},{},{},{},{:.6f},{:.6f}\n", row.d, row.N, row.L, row.real_accuracy,
                         row.estimated_accuracy, est.accuracy, est.accuracy - row.estimated_accuracy);
    }
  } else if (o.table == "2") {
    const auto model = load_model(o.model_path);
    run.model_version = model.version;
    csv = "N,L,real_accuracy,reference_estimate,estimate,deviation\n";
    for (const auto& row : reference::table2) {
      const auto est = estimate({2, row.N, row.L}, EstimateMode::empirical_table, model);
      csv += fmt::format("{},{},{},{},{:.6f},{:.6f}\n", row.N, row.L, row.real_accuracy, row.estimated_accuracy,
                         est.accuracy, est.accuracy - row.estimated_accuracy);
    }
  } else {
    const auto model = load_model(o.model_path);
    run.model_version = model.version;
    std::ostringstream ss;
    write_coefficient_model(ss, model);
    csv = ss.str();
  }
  run.stdout_text = csv;
  run.files["table_" + o.table + ".csv"] = csv;
}

inline void cmd_sweep(const Options& o, RunOutput& run) {
  const auto [d_lo, d_hi] = parse_range(o.d_range);
  if (d_lo < 1 || d_hi < d_lo) fail(errc::invalid_argument, "d range must satisfy 1 <= a <= b");
  const auto mode = estimate_modes().at(o.sweep_mode);
  const auto model = load_model(o.model_path);
  if (mode != EstimateMode::theoretical) run.model_version = model.version;

  struct Scenario {
    std::string name;
    std::int64_t N, L;
  };
  std::vector<Scenario> scenarios;
  if (o.scenarios) {
    scenarios = {{"N_gg_L", 10000, 1000}, {"N_eq_L", 10000, 10000}, {"N_ll_L", 1000, 10000}};
  } else {
    scenarios = {{"custom", o.N, o.L}};
  }

  std::string combined = o.scenarios ? "scenario,d,accuracy\n" : "d,accuracy\n";
  for (const auto& sc : scenarios) {
    std::string csv = "d,accuracy\n";
    for (int d = d_lo; d <= d_hi; ++d) {
      const auto est = estimate({d, sc.N, sc.L}, mode, model);
      const auto row = fmt::format("{},{:.10f}\n", d, est.accuracy);
      csv += row;
      combined += o.scenarios ? sc.name + "," + row : row;
    }
    run.files[o.scenarios ? "sweep_" + sc.name + ".csv" : "sweep.csv"] = csv;
  }
  run.stdout_text = combined;
}

inline void cmd_simulate_bins(const Options& o, RunOutput& run) {
  if (o.N < 1) fail(errc::invalid_argument, "-N must be >= 1");
  if (o.trials < 1) fail(errc::invalid_argument, "--trials must be >= 1");
  std::uint64_t S = o.S;
  const bool from_regime = S == 0;
  if (from_regime) {
    if (!(o.b > 0.0) || o.a < 1.0) fail(errc::invalid_argument, "give -S, or --b > 0 and --a >= 1");
    const double s = std::round(o.b * std::pow(static_cast<double>(o.N), o.a));
    if (!(s >= 1.0 && s < 1.8e19)) fail(errc::invalid_argument, "b N^a is outside the representable cell count");
    S = static_cast<std::uint64_t>(s);
  }
  const auto N = static_cast<std::uint64_t>(o.N);
  const auto outcome = simulate_bins(S, N, o.trials, {o.seed, 0}, o.jobs);

  auto summary = io::outcome_summary(outcome);
  io::json report{{"model", "bins"}, {"S", S}, {"N", N}};
  report.update(summary);
  const double exact = p_complete_exact(S, N);
  io::json theory{{"p_complete_exact", exact}};
  if (from_regime) theory["p_complete_limit"] = p_complete_limit({o.a, o.b});
  report["theory"] = theory;
  report["z_score"] = outcome.standard_error() > 0.0
                          ? io::json((outcome.complete_fraction() - exact) / outcome.standard_error())
                          : io::json(nullptr);

  std::ostringstream csv;
  io::write_outcome_csv(csv, outcome);
  run.files["outcome.csv"] = csv.str();
  run.files["summary.json"] = summary.dump(2) + "\n";
  if (o.histogram_bins > 0) {
    std::ostringstream h;
    io::write_histogram_csv(h, empirical_gamma_distribution(outcome, o.histogram_bins));
    run.files["histogram.csv"] = h.str();
  }
  run.stdout_text = report.dump(2) + "\n";
}

inline void cmd_simulate_hyperplanes(const Options& o, RunOutput& run) {
  const ProblemSpec spec{o.d, o.N, o.L};
  if (spec.d < 1 || spec.N < 1 || spec.L < 1) fail(errc::invalid_argument, "-d, -N and -L must be >= 1");
  if (o.trials < 1) fail(errc::invalid_argument, "--trials must be >= 1");
  const auto outcome = simulate_hyperplanes(spec, o.trials, {o.seed, 0}, o.jobs);

  auto summary = io::outcome_summary(outcome);
  io::json report{{"model", "hyperplanes"}, {"d", spec.d}, {"N", spec.N}, {"L", spec.L}};
  report.update(summary);
  report["distinct_cells_mean"] = outcome.distinct_cells_mean();
  io::json theory{{"log_max_partitions", log_max_partitions(spec.L, spec.d)}};
  try {
    const auto S = max_partitions_exact(spec.L, spec.d);
    theory["max_partitions"] = S;
    theory["bins_p_complete"] = p_complete_exact(S, static_cast<std::uint64_t>(spec.N));
  } catch (const error& e) {
    if (e.code() != errc::use_log_scale) throw;
  }
  report["theory"] = theory;

  std::ostringstream csv;
  io::write_outcome_csv(csv, outcome);
  run.files["outcome.csv"] = csv.str();
  run.files["summary.json"] = summary.dump(2) + "\n";
  if (o.histogram_bins > 0) {
    std::ostringstream h;
    io::write_histogram_csv(h, empirical_gamma_distribution(outcome, o.histogram_bins));
    run.files["histogram.csv"] = h.str();
  }
  run.stdout_text = report.dump(2) + "\n";
}

inline void cmd_train(const Options& o, RunOutput& run) {
  const ProblemSpec spec{o.d, o.N, o.L};
  spec.validate();
  if (static_cast<double>(spec.N) * static_cast<double>(spec.L) > train_guard && !o.force) {
    throw ResourceGuard(fmt::format("N*L = {} exceeds the desk-scale guard of {:g}; pass --force to run anyway",
                                    spec.N * spec.L, train_guard));
  }
  TrainingConfig config;
  config.learning_rate = o.learning_rate;
  config.max_epochs = o.max_epochs;
  config.convergence_window = o.window;
  config.convergence_delta = o.delta;
  config.repeats = o.repeats;
  config.validate();

  const auto record = measure_real_accuracy(spec, config, {o.seed, 0}, o.jobs);
  std::ostringstream records;
  io::write_training_csv(records, io::to_rows(record));

  const auto model = CoefficientModel::published();
  const auto theoretical = estimate(spec, EstimateMode::theoretical, model);
  std::string empirical = "";
  if (spec.d >= 2) empirical = fmt::format("{:.6f}", estimate(spec, EstimateMode::empirical_table, model).accuracy);
  const std::string comparison =
      "d,N,L,repeats,real_accuracy,real_se,theoretical_estimate,empirical_estimate\n" +
      fmt::format("{},{},{},{},{:.6f},{:.6f},{:.6f},{}\n", spec.d, spec.N, spec.L, record.repeats.size(),
                  record.training_accuracy(), record.accuracy_standard_error(), theoretical.accuracy, empirical);

  run.files["records.csv"] = records.str();
  run.files["comparison.csv"] = comparison;
  run.stdout_text = records.str() + "\n" + comparison;
}

inline void cmd_fit(const Options& o, RunOutput& run) {
  std::ifstream in(o.records_path);
  if (!in) fail(errc::parse_error, "cannot open records file " + o.records_path);
  const auto records = io::records_from_rows(io::read_training_csv(in));
  if (records.empty()) fail(errc::parse_error, "records file holds no rows");
  const auto set = accuracy_grid_to_samples(std::span<const TrainingRecord>(records));

  std::vector<int> dims;
  if (o.all_d) {
    for (const auto& s : set.samples)
      if (std::find(dims.begin(), dims.end(), s.spec.d) == dims.end()) dims.push_back(s.spec.d);
    std::sort(dims.begin(), dims.end());
  } else {
    dims.push_back(o.d);
  }

  io::json reports = io::json::array();
  io::json skipped = io::json::array();
  std::vector<DimensionCoefficients> fitted;
  for (const int d : dims) {
    try {
      const auto report = fit_power_law(set.samples, d);
      auto j = io::to_json(report);
      // Drop cross-dimension bookkeeping; those samples belong to other fits.
      io::json kept = io::json::array();
      for (const auto& e : j["excluded"])
        if (e["reason"] != "dimension-mismatch") kept.push_back(e);
      for (const auto& e : set.excluded)
        if (e.spec.d == d)
          kept.push_back({{"index", e.index},
                          {"d", e.spec.d},
                          {"N", e.spec.N},
                          {"L", e.spec.L},
                          {"accuracy", e.measured_accuracy},
                          {"reason", e.reason}});
      j["excluded"] = kept;
      reports.push_back(j);
      fitted.push_back(report.coefficients);
    } catch (const error& e) {
      if (!o.all_d) throw;
      skipped.push_back({{"d", d}, {"reason", e.what()}});
    }
  }
  if (fitted.empty()) fail(errc::unidentifiable, "no dimension had enough samples to fit");

  io::json out{{"reports", reports}};
  if (!skipped.empty()) out["skipped"] = skipped;
  CoefficientModel model;
  model.version = "fitted";
  model.table = fitted;
  if (fitted.size() >= 3) {
    model = fit_linear_laws(fitted);
    auto law = [](const LinearLaw& l) {
      return io::json{{"slope", l.slope}, {"intercept", l.intercept}, {"r2", l.r_squared.value_or(0.0)}};
    };
    out["linear_laws"] = {{"x", law(model.x_law)}, {"y", law(model.y_law)}, {"c", law(model.c_law)}};
  } else {
    // Too few dimensions for new laws; keep the published ones for extrapolation.
    const auto published = CoefficientModel::published();
    model.x_law = published.x_law;
    model.y_law = published.y_law;
    model.c_law = published.c_law;
  }
  run.stdout_text = out.dump(2) + "\n";
  run.files["fit_report.json"] = run.stdout_text;
  if (!o.emit_model.empty()) {
    std::ostringstream ss;
    write_coefficient_model(ss, model);
    run.files["model.csv"] = ss.str();
    run.extra_writes.emplace_back(o.emit_model, ss.str());
  }
}

// ---- driver ---------------------------------------------------------------

namespace detail {

// Flattens the parsed options of `app` and its selected subcommands into an
// argument list that parses back to the same values.
inline void canonical_arguments(const CLI::App* app, std::vector<std::string>& out) {
  for (const CLI::Option* opt : app->get_options()) {
    if (opt->count() == 0) continue;
    const auto& lnames = opt->get_lnames();
    const std::string lname = lnames.empty() ? "" : lnames.front();
    if (lname == "help" || lname == "config" || lname == "out-dir" || lname == "jobs" || lname == "seed" ||
        lname == "version")
      continue;
    if (opt->get_positional()) {
      for (const auto& r : opt->results()) out.push_back(r);
      continue;
    }
    const std::string flag = lname.empty() ? "-" + opt->get_snames().front() : "--" + lname;
    if (opt->get_expected_max() == 0) {
      out.push_back(flag);
      continue;
    }
    for (const auto& r : opt->results()) {
      out.push_back(flag);
      out.push_back(r);
    }
  }
  for (const CLI::App* sub : app->get_subcommands()) {
    out.push_back(sub->get_name());
    canonical_arguments(sub, out);
  }
}

inline std::string command_path(const CLI::App* app) {
  std::string path;
  for (const CLI::App* sub = app; !sub->get_subcommands().empty();) {
    sub = sub->get_subcommands().front();
    path += (path.empty() ? "" : " ") + sub->get_name();
  }
  return path;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(now));
}

inline io::RunManifest make_manifest(const RunOutput& run, const std::vector<std::string>& arguments,
                                     std::uint64_t seed) {
  io::RunManifest m;
  m.command = run.command;
  m.arguments = arguments;
  m.seed = seed;
  m.artifact_version = PARTACC_VERSION;
  m.model_version = run.model_version;
  m.timestamp = utc_timestamp();
  m.stdout_hash = io::hash_hex(run.stdout_text);
  for (const auto& [name, contents] : run.files) m.output_hashes[name] = io::hash_hex(contents);
  return m;
}

inline void write_text(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(errc::invalid_argument, "cannot write " + path.string());
  f << contents;
  if (!f) fail(errc::invalid_argument, "failed writing " + path.string());
}

}  // namespace detail

struct Invocation {
  RunOutput output;
  std::vector<std::string> arguments;  // canonical, seed included
  std::uint64_t seed = default_seed;
  std::string out_dir;
  std::string manifest_path;  // set for replay
};

/// Parses `args` (program name excluded) and runs the selected command,
/// keeping every output in memory. Throws CLI::ParseError on usage errors.
inline Invocation execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                          int& cli_exit, bool& handled) {
  Options o;
  CLI::App app{"Training-accuracy estimation for two-layer networks from (d, N, L)", "partacc"};
  app.set_version_flag("--version", std::string(PARTACC_VERSION));
  app.set_config("--config", "", "Read option defaults from a key=value file ([section] per subcommand)");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", o.seed, "Base random seed")->envname("PARTACC_SEED")->capture_default_str();
  app.add_option("--jobs", o.jobs, "Worker threads (0 = all cores); never changes results")->envname("PARTACC_JOBS");
  app.add_option("--out-dir", o.out_dir, "Write output files and manifest.json here");

  auto spec_options = [&](CLI::App* sub, bool required) {
    auto* d = sub->add_option("-d", o.d, "Input dimensionality");
    auto* n = sub->add_option("-N", o.N, "Dataset size");
    auto* l = sub->add_option("-L", o.L, "Hidden-layer width");
    if (required) {
      d->required();
      n->required();
      l->required();
    }
  };
  auto mode_option = [&](CLI::App* sub, std::string& mode) {
    sub->add_option("--mode", mode, "theoretical | empirical-table | empirical-law")
        ->check(CLI::IsMember({"theoretical", "empirical-table", "empirical-law"}))
        ->capture_default_str();
    sub->add_option("--model", o.model_path, "Coefficient model file (default: embedded published table)")
        ->check(CLI::ExistingFile);
  };

  auto* estimate_cmd = app.add_subcommand("estimate", "Estimate training accuracy for one (d, N, L)");
  spec_options(estimate_cmd, true);
  mode_option(estimate_cmd, o.mode);

  auto* tables_cmd = app.add_subcommand("tables", "Regenerate the estimated columns of the reference tables");
  tables_cmd->add_option("which", o.table, "1 | 2 | 3-est")->required()->check(CLI::IsMember({"1", "2", "3-est"}));
  tables_cmd->add_option("--model", o.model_path, "Coefficient model file")->check(CLI::ExistingFile);

  auto* sweep_cmd = app.add_subcommand("sweep", "Estimated accuracy across a range of d");
  sweep_cmd->add_option("--d", o.d_range, "Dimension range a..b")->capture_default_str();
  sweep_cmd->add_option("-N", o.N, "Dataset size");
  sweep_cmd->add_option("-L", o.L, "Hidden-layer width");
  sweep_cmd->add_flag("--scenarios", o.scenarios, "Sweep N>>L, N=L and N<<L (10000/1000 sizes)");
  mode_option(sweep_cmd, o.sweep_mode);

  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo separation experiments");
  simulate_cmd->require_subcommand(1);
  auto* bins_cmd = simulate_cmd->add_subcommand("bins", "N balls into S equally likely cells");
  bins_cmd->add_option("-S", o.S, "Number of cells");
  bins_cmd->add_option("--a", o.a, "Growth exponent in S = b N^a")->capture_default_str();
  bins_cmd->add_option("--b", o.b, "Ensemble index in S = b N^a");
  bins_cmd->add_option("-N", o.N, "Number of balls")->required();
  bins_cmd->add_option("--trials", o.trials, "Trials")->capture_default_str();
  bins_cmd->add_option("--histogram", o.histogram_bins, "Also write a gamma histogram with this many bins");
  auto* planes_cmd = simulate_cmd->add_subcommand("hyperplanes", "N uniform points cut by L random hyperplanes");
  spec_options(planes_cmd, true);
  planes_cmd->add_option("--trials", o.trials, "Trials")->capture_default_str();
  planes_cmd->add_option("--histogram", o.histogram_bins, "Also write a gamma histogram with this many bins");

  auto* train_cmd = app.add_subcommand("train", "Train the d-L-1 network and compare with the estimates");
  spec_options(train_cmd, true);
  train_cmd->add_option("--repeats", o.repeats, "Independent repeats")->capture_default_str();
  train_cmd->add_option("--max-epochs", o.max_epochs, "Epoch cap")->capture_default_str();
  train_cmd->add_option("--lr", o.learning_rate, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--window", o.window, "Convergence window in epochs")->capture_default_str();
  train_cmd->add_option("--delta", o.delta, "Convergence threshold on the loss range")->capture_default_str();
  train_cmd->add_flag("--force", o.force, "Allow N*L above the desk-scale guard");

  auto* fit_cmd = app.add_subcommand("fit", "Fit power-law coefficients to training records");
  fit_cmd->add_option("--records", o.records_path, "Training CSV (d,N,L,repeat,seed,epochs,final_loss,accuracy)")
      ->required();
  auto* fit_d = fit_cmd->add_option("-d", o.d, "Dimension to fit");
  auto* fit_all = fit_cmd->add_flag("--all-d", o.all_d, "Fit every dimension present, then the linear laws");
  fit_d->excludes(fit_all);
  fit_cmd->add_option("--emit-model", o.emit_model, "Write the fitted coefficient model to this path");

  auto* replay_cmd = app.add_subcommand("replay", "Re-run a manifest and compare output hashes");
  replay_cmd->add_option("manifest", o.manifest_path, "manifest.json from an earlier run")
      ->required()
      ->check(CLI::ExistingFile);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    cli_exit = app.exit(e, out, err);
    if (cli_exit != 0) cli_exit = exit_usage;
    handled = true;
    return {};
  }
  if (o.jobs == 0) o.jobs = default_jobs();

  Invocation inv;
  inv.seed = o.seed;
  inv.out_dir = o.out_dir;
  inv.arguments = {"--seed", std::to_string(o.seed)};
  detail::canonical_arguments(&app, inv.arguments);
  inv.output.command = detail::command_path(&app);

  const std::string& cmd = inv.output.command;
  if (cmd == "estimate") cmd_estimate(o, inv.output);
  else if (cmd == "tables") cmd_tables(o, inv.output);
  else if (cmd == "sweep") cmd_sweep(o, inv.output);
  else if (cmd == "simulate bins") cmd_simulate_bins(o, inv.output);
  else if (cmd == "simulate hyperplanes") cmd_simulate_hyperplanes(o, inv.output);
  else if (cmd == "train") cmd_train(o, inv.output);
  else if (cmd == "fit") cmd_fit(o, inv.output);
  else if (cmd == "replay") inv.manifest_path = o.manifest_path;
  return inv;
}

inline int replay(const std::string& manifest_path, std::ostream& out, std::ostream& err) {
  const auto manifest = io::RunManifest::from_json(io::json::parse(io::read_file(manifest_path)));
  std::ostringstream sink_out, sink_err;
  int cli_exit = 0;
  bool handled = false;
  auto inv = execute(manifest.arguments, sink_out, sink_err, cli_exit, handled);
  if (handled) {
    err << "manifest arguments no longer parse: " << sink_err.str();
    return exit_usage;
  }
  if (inv.output.command == "replay") fail(errc::invalid_argument, "a manifest cannot replay another manifest");
  const auto fresh = detail::make_manifest(inv.output, inv.arguments, inv.seed);

  bool same = fresh.stdout_hash == manifest.stdout_hash && fresh.output_hashes.size() == manifest.output_hashes.size();
  out << fmt::format("stdout {} {}\n", fresh.stdout_hash, fresh.stdout_hash == manifest.stdout_hash ? "match" : "MISMATCH");
  for (const auto& [name, h] : manifest.output_hashes) {
    const auto it = fresh.output_hashes.find(name);
    const bool ok = it != fresh.output_hashes.end() && it->second == h;
    same = same && ok;
    out << fmt::format("{} {} {}\n", name, it == fresh.output_hashes.end() ? "missing" : it->second,
                       ok ? "match" : "MISMATCH");
  }
  same = same && fresh.reproducibility_hash() == manifest.reproducibility_hash();
  out << (same ? "replay: identical\n" : "replay: DIFFERENT\n");
  return same ? exit_ok : exit_numerical;
}

/// Entry point shared by the executable and the tests.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    int cli_exit = 0;
    bool handled = false;
    auto inv = execute(args, out, err, cli_exit, handled);
    if (handled) return cli_exit;
    if (!inv.manifest_path.empty()) return replay(inv.manifest_path, out, err);

    out << inv.output.stdout_text;
    for (const auto& [path, contents] : inv.output.extra_writes) detail::write_text(path, contents);
    if (!inv.out_dir.empty()) {
      const std::filesystem::path dir(inv.out_dir);
      std::filesystem::create_directories(dir);
      for (const auto& [name, contents] : inv.output.files) detail::write_text(dir / name, contents);
      const auto manifest = detail::make_manifest(inv.output, inv.arguments, inv.seed);
      detail::write_text(dir / "manifest.json", manifest.to_json().dump(2) + "\n");
    }
    return exit_ok;
  } catch (const ResourceGuard& e) {
    err << "refused: " << e.what() << '\n';
    return exit_resource_guard;
  } catch (const TrainingDiverged& e) {
    err << "error: " << e.what() << '\n';
    return exit_divergence;
  } catch (const error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const io::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_numerical;
  }
}

}  // namespace partacc::cli
