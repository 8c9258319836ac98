#pragma once

// Command-line front end: recover (single trial, JSON), bench (grid run,
// CSV), psweep (p sweep, CSV), classify (occluded classification, JSON).
// Every run carries a manifest; JSON reports embed it, CSV reports get a
// sidecar <out>.manifest.json. CSV bytes are reproducible for a given
// flag set: measured times are only written under --timings.

#include "itl_pursuit/experiments.hpp"
#include "itl_pursuit/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace itl_pursuit {

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> parameters;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::string started_at;
  std::string finished_at;
};

namespace cli_detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string iso_utc_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json manifest_json(const RunManifest& man) {
  nlohmann::json j;
  j["command"] = man.command;
  j["tool_version"] = man.tool_version;
  j["seed"] = man.seed;
  j["parameters"] = man.parameters;
  j["started_at"] = man.started_at;
  j["finished_at"] = man.finished_at;
  return j;
}

inline std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(csv);
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Raised for flag combinations the parser alone cannot reject.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoiseFlags {
  double snr_db = 2.0;
  double missing_frac = 0.1;
  int outliers = 0;
  double outlier_mag = 30.0;
};

inline NoiseSpec make_noise(const std::string& name, const NoiseFlags& flags) {
  NoiseSpec spec;
  if (name == "none") spec = NoiseSpec::none();
  else if (name == "chi2") spec = NoiseSpec::chi2();
  else if (name == "exp") spec = NoiseSpec::exponential();
  else if (name == "tdist") spec = NoiseSpec::student_t();
  else if (name == "gaussian") spec = NoiseSpec::gaussian();
  else if (name == "wgn") spec = NoiseSpec::wgn(flags.snr_db);
  else if (name == "missing") spec = NoiseSpec::missing(flags.missing_frac);
  else throw UsageError("unknown noise kind '" + name + "'");
  if (flags.outliers > 0) spec = spec.with_outliers(flags.outliers, flags.outlier_mag);
  return spec;
}

inline SolverSpec make_solver(const std::string& name, int sparsity, double p,
                              double eps) {
  if (name == "omp") return {name, PursuitConfig::omp(sparsity, eps)};
  if (name == "cmp") return {name, PursuitConfig::cmp(sparsity, eps)};
  if (name == "kns") return {name, PursuitConfig::kns(sparsity, p, eps)};
  if (name == "inok") return {name, PursuitConfig::inok(sparsity, p, eps)};
  throw UsageError("unknown solver '" + name + "'");
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output path '" + path + "'");
  return f;
}

inline void write_reports_csv(std::ostream& os,
                              const std::vector<TrialReport>& reports,
                              bool timings) {
  os << "solver,noise,trial,recovery_error,support_exact,runtime_ms,seed\n";
  for (const auto& r : reports) {
    os << r.solver_name << ',' << r.noise_kind << ',' << r.trial_index << ','
       << format_double(r.recovery_error) << ','
       << (r.support_exact ? "true" : "false") << ','
       << format_double(timings ? r.runtime_ms : 0.0) << ',' << r.seed << '\n';
  }
}

inline void write_manifest_sidecar(const std::string& out_path,
                                   const RunManifest& man) {
  auto f = open_output(out_path + ".manifest.json");
  f << manifest_json(man).dump(2) << '\n';
}

struct CommonOpts {
  std::uint64_t seed = 0;
  Index m = 200;
  Index n = 400;
  int sparsity = 10;
  int trials = 20;
  double p = 1.7;
  double eps = 0.0;
  int threads = 1;
  bool timings = false;
  std::string noise = "none";
  std::string solver;
  std::string preset;
  std::string out_path;
  std::string format;
  NoiseFlags noise_flags;
};

struct PresetDef {
  BenchDims dims;
  int trials = 20;
  std::vector<std::string> noises;
  NoiseFlags flags;
};

inline PresetDef lookup_preset(const std::string& name) {
  PresetDef def;
  def.dims = {200, 400, 10};
  def.trials = 20;
  if (name == "noise-grid") {
    def.noises = {"chi2", "exp", "tdist", "missing", "gaussian", "wgn"};
    def.flags.snr_db = 2.0;
  } else if (name == "outliers") {
    def.noises = {"wgn"};
    def.flags.snr_db = 10.0;
    def.flags.outliers = 6;
    def.flags.outlier_mag = 30.0;
  } else if (name == "small") {
    def.dims = {50, 100, 5};
    def.trials = 10;
    def.noises = {"chi2", "exp", "tdist", "missing", "gaussian", "wgn"};
    def.flags.snr_db = 2.0;
  } else {
    throw UsageError("unknown preset '" + name + "'");
  }
  return def;
}

inline void base_parameters(const CommonOpts& o, RunManifest& man) {
  man.parameters["m"] = std::to_string(o.m);
  man.parameters["n"] = std::to_string(o.n);
  man.parameters["sparsity"] = std::to_string(o.sparsity);
  man.parameters["p"] = format_double(o.p);
  man.parameters["eps"] = format_double(o.eps);
  if (!o.preset.empty()) man.parameters["preset"] = o.preset;
  if (!o.out_path.empty()) man.parameters["out"] = o.out_path;
}

inline int cmd_recover(const CommonOpts& o, std::ostream& out) {
  RunManifest man;
  man.command = "recover";
  man.seed = o.seed;
  man.tool_version = std::string(kToolName) + " " + kToolVersion;
  man.started_at = iso_utc_now();
  base_parameters(o, man);
  man.parameters["noise"] = o.noise;
  man.parameters["solver"] = o.solver;

  const NoiseSpec noise = make_noise(o.noise, o.noise_flags);
  const SolverSpec solver = make_solver(o.solver, o.sparsity, o.p, o.eps);
  const BenchDims dims{o.m, o.n, o.sparsity};

  // Same data path as one bench trial with this row seed.
  const TrialData data = make_trial_data(dims, noise, o.seed);
  const Dictionary& dict = data.dict;
  const Eigen::VectorXd& truth = data.truth;
  const Signal& b = data.b;

  const auto start = std::chrono::steady_clock::now();
  const SparseSolution sol = pursuit_solve(b, dict, solver.config);
  const auto stop = std::chrono::steady_clock::now();
  const double ms =
      std::chrono::duration<double, std::milli>(stop - start).count();

  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["report"] = {
      {"solver", solver.name},
      {"noise", noise.label()},
      {"trial", 0},
      {"seed", o.seed},
      {"recovery_error", recovery_error(sol.x, truth)},
      {"support_exact", detail::support_matches(sol.support, truth)},
      {"runtime_ms", ms},
  };
  nlohmann::json solution;
  solution["support"] = sol.support.indices();
  std::vector<double> coeffs;
  for (Index idx : sol.support) coeffs.push_back(sol.x[idx]);
  solution["coefficients"] = coeffs;
  solution["residual_norm"] = sol.residual_norm;
  solution["outer_iterations"] = sol.outer_iterations;
  solution["converged"] = sol.converged;
  solution["per_iteration_loss"] = sol.per_iteration_loss;
  j["solution"] = solution;

  man.finished_at = iso_utc_now();
  j["manifest"] = manifest_json(man);

  if (!o.out_path.empty()) {
    auto f = open_output(o.out_path);
    f << j.dump(2) << '\n';
    out << "wrote report to " << o.out_path << '\n';
  } else {
    out << j.dump(2) << '\n';
  }
  return 0;
}

inline int cmd_bench(const CommonOpts& o, const std::vector<std::string>& solver_names,
                     const std::vector<std::string>& noise_names, std::ostream& out) {
  RunManifest man;
  man.command = "bench";
  man.seed = o.seed;
  man.tool_version = std::string(kToolName) + " " + kToolVersion;
  man.started_at = iso_utc_now();
  base_parameters(o, man);
  man.parameters["trials"] = std::to_string(o.trials);
  man.parameters["threads"] = std::to_string(o.threads);
  man.parameters["timings"] = o.timings ? "true" : "false";

  std::vector<SolverSpec> solvers;
  std::string solver_list;
  for (const auto& name : solver_names) {
    solvers.push_back(make_solver(name, o.sparsity, o.p, o.eps));
    solver_list += (solver_list.empty() ? "" : ",") + name;
  }
  std::vector<NoiseSpec> noises;
  std::string noise_list;
  for (const auto& name : noise_names) {
    noises.push_back(make_noise(name, o.noise_flags));
    noise_list += (noise_list.empty() ? "" : ",") + name;
  }
  man.parameters["solvers"] = solver_list;
  man.parameters["noises"] = noise_list;

  const BenchDims dims{o.m, o.n, o.sparsity};
  const auto reports =
      run_benchmark(solvers, noises, o.trials, dims, o.seed, o.threads);
  man.finished_at = iso_utc_now();

  if (!o.out_path.empty()) {
    auto f = open_output(o.out_path);
    write_reports_csv(f, reports, o.timings);
    write_manifest_sidecar(o.out_path, man);
    out << "wrote " << reports.size() << " rows to " << o.out_path << '\n';
  } else {
    write_reports_csv(out, reports, o.timings);
  }
  return 0;
}

inline int cmd_psweep(const CommonOpts& o, const std::vector<std::string>& noise_names,
                      std::ostream& out) {
  RunManifest man;
  man.command = "psweep";
  man.seed = o.seed;
  man.tool_version = std::string(kToolName) + " " + kToolVersion;
  man.started_at = iso_utc_now();
  base_parameters(o, man);
  man.parameters["trials"] = std::to_string(o.trials);
  man.parameters["threads"] = std::to_string(o.threads);

  std::vector<NoiseSpec> noises;
  std::string noise_list;
  for (const auto& name : noise_names) {
    noises.push_back(make_noise(name, o.noise_flags));
    noise_list += (noise_list.empty() ? "" : ",") + name;
  }
  man.parameters["noises"] = noise_list;

  static constexpr double kPGrid[] = {1.1, 1.2, 1.3, 1.4, 1.5,
                                      1.6, 1.7, 1.8, 1.9, 2.0};
  const BenchDims dims{o.m, o.n, o.sparsity};

  std::ostringstream csv;
  csv << "p,noise,mean_recovery_error,std_recovery_error,trials\n";
  for (double p : kPGrid) {
    const std::vector<SolverSpec> solvers = {
        {"inok", PursuitConfig::inok(o.sparsity, p, o.eps)}};
    const auto reports =
        run_benchmark(solvers, noises, o.trials, dims, o.seed, o.threads);
    for (const auto& cell : aggregate(reports)) {
      csv << format_double(p) << ',' << cell.noise << ','
          << format_double(cell.mean_error) << ','
          << format_double(cell.std_error) << ',' << cell.trials << '\n';
    }
  }
  man.finished_at = iso_utc_now();

  if (!o.out_path.empty()) {
    auto f = open_output(o.out_path);
    f << csv.str();
    write_manifest_sidecar(o.out_path, man);
    out << "wrote p sweep to " << o.out_path << '\n';
  } else {
    out << csv.str();
  }
  return 0;
}

inline int cmd_classify(const CommonOpts& o, std::ostream& out) {
  RunManifest man;
  man.command = "classify";
  man.seed = o.seed;
  man.tool_version = std::string(kToolName) + " " + kToolVersion;
  man.started_at = iso_utc_now();
  base_parameters(o, man);
  man.parameters["trials"] = std::to_string(o.trials);
  man.parameters["solver"] = o.solver;

  ClassTaskConfig task;
  task.sparsity = o.sparsity;
  task.p = o.p;
  const SolverSpec solver = make_solver(o.solver, o.sparsity, o.p, o.eps);
  const ClassifyOutcome outcome = run_class_demo(
      task, solver.config, ClassifierScore::Kernel, o.trials, o.seed);
  man.finished_at = iso_utc_now();

  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["task"] = {
      {"classes", task.classes},
      {"atoms_per_class", task.atoms_per_class},
      {"rows", task.rows},
      {"cols", task.cols},
      {"signal_atoms", task.signal_atoms},
      {"occlusion_block", task.block},
      {"fill", task.fill == BlockFill::Patch ? "patch" : "random"},
  };
  j["results"] = {
      {"trials", outcome.trials},
      {"correct", outcome.correct},
      {"accuracy", outcome.accuracy()},
      {"confusion", outcome.confusion},
  };
  j["manifest"] = manifest_json(man);

  if (!o.out_path.empty()) {
    auto f = open_output(o.out_path);
    f << j.dump(2) << '\n';
    out << "wrote classification summary to " << o.out_path << '\n';
  } else {
    out << j.dump(2) << '\n';
  }
  return 0;
}

}  // namespace cli_detail

// Parses and runs one invocation. Returns 0 on success, 1 on a usage
// error, 2 on a runtime failure.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err) {
  using namespace cli_detail;

  CLI::App app{"Sparse recovery benchmarks with kernel-loss matching pursuit"};
  app.name(kToolName);

  CommonOpts o;
  std::string solvers_csv = "omp,cmp,kns,inok";
  std::string noises_csv;

  auto add_common = [&](CLI::App* cmd, bool with_format) {
    cmd->add_option("--seed", o.seed, "Run seed")->envname("ITL_PURSUIT_SEED");
    cmd->add_option("--m", o.m, "Measurement dimension");
    cmd->add_option("--n", o.n, "Dictionary size");
    cmd->add_option("--sparsity", o.sparsity, "True and target sparsity");
    cmd->add_option("--p", o.p, "Kernel loss order");
    cmd->add_option("--eps", o.eps, "Residual stopping threshold");
    cmd->add_option("--snr-db", o.noise_flags.snr_db, "White noise SNR in dB");
    cmd->add_option("--missing-frac", o.noise_flags.missing_frac,
                    "Fraction of erased coordinates");
    cmd->add_option("--outliers", o.noise_flags.outliers, "Outlier count");
    cmd->add_option("--outlier-mag", o.noise_flags.outlier_mag,
                    "Outlier magnitude in noise deviations");
    cmd->add_option("--out", o.out_path, "Output path (default: stdout)");
    if (with_format)
      cmd->add_option("--format", o.format, "Output format (csv or json)");
    return cmd;
  };

  CLI::App* recover = add_common(
      app.add_subcommand("recover", "Run one seeded trial and report JSON"), true);
  recover->add_option("--noise", o.noise, "Noise kind");
  recover->add_option("--solver", o.solver, "Solver name")->default_str("inok");

  CLI::App* bench = add_common(
      app.add_subcommand("bench", "Run a benchmark grid and report CSV"), true);
  bench->add_option("--noise", noises_csv, "Comma-separated noise kinds");
  bench->add_option("--solver,--solvers", solvers_csv, "Comma-separated solvers");
  bench->add_option("--trials", o.trials, "Trials per cell");
  bench->add_option("--preset", o.preset, "noise-grid, outliers, or small");
  bench->add_option("--threads", o.threads, "Worker threads");
  bench->add_flag("--timings", o.timings, "Emit measured runtimes in the CSV");

  CLI::App* psweep = add_common(
      app.add_subcommand("psweep", "Sweep the loss order p and report CSV"), false);
  psweep->add_option("--noise", noises_csv, "Comma-separated noise kinds");
  psweep->add_option("--trials", o.trials, "Trials per cell");
  psweep->add_option("--preset", o.preset, "noise-grid or small");
  psweep->add_option("--threads", o.threads, "Worker threads");

  CLI::App* classify = add_common(
      app.add_subcommand("classify", "Occluded classification demo, JSON"), false);
  classify->add_option("--trials", o.trials, "Query count");
  classify->add_option("--solver", o.solver, "Solver name")->default_str("inok");

  app.require_subcommand(1);

  std::vector<const char*> argv;
  argv.push_back(kToolName);
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();

    // Preset values fill in anything the flags left at defaults.
    std::vector<std::string> noise_names;
    if (!o.preset.empty()) {
      const PresetDef def = lookup_preset(o.preset);
      if (cmd->count("--m") == 0) o.m = def.dims.m;
      if (cmd->count("--n") == 0) o.n = def.dims.n;
      if (cmd->count("--sparsity") == 0) o.sparsity = static_cast<int>(def.dims.k);
      if (cmd->count("--trials") == 0) o.trials = def.trials;
      if (cmd->count("--noise") == 0) noise_names = def.noises;
      if (cmd->count("--snr-db") == 0) o.noise_flags.snr_db = def.flags.snr_db;
      if (cmd->count("--outliers") == 0) o.noise_flags.outliers = def.flags.outliers;
      if (cmd->count("--outlier-mag") == 0)
        o.noise_flags.outlier_mag = def.flags.outlier_mag;
    }
    if (noise_names.empty()) {
      noise_names = noises_csv.empty() ? std::vector<std::string>{"none"}
                                       : split_list(noises_csv);
    }

    if (o.solver.empty()) o.solver = "inok";

    if (name == "recover") {
      if (!o.format.empty() && o.format != "json")
        throw UsageError("recover reports JSON; --format " + o.format +
                         " is not available");
      return cmd_recover(o, out);
    }
    if (name == "bench") {
      if (!o.format.empty() && o.format != "csv")
        throw UsageError("bench reports CSV; --format " + o.format +
                         " is not available");
      return cmd_bench(o, split_list(solvers_csv), noise_names, out);
    }
    if (name == "psweep") return cmd_psweep(o, noise_names, out);
    if (name == "classify") return cmd_classify(o, out);
    throw std::logic_error("unreachable subcommand");
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace itl_pursuit
