#pragma once

// Seeded synthetic data generation, the corruption models used by the
// benchmarks, the benchmark runner itself, and a small occluded
// classification task. Every generator is a pure function of its seed, so
// runs replay bit-identically regardless of thread count.

#include "itl_pursuit/classifier.hpp"
#include "itl_pursuit/pursuit.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <random>
#include <thread>

namespace itl_pursuit {

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Folds one path component into a seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t part) {
  return splitmix64(seed ^ (0x9e3779b97f4a7c15ULL + splitmix64(part)));
}

// Seed for one benchmark trial, derived from the run seed and the
// position of the trial in the (solver, noise, trial) grid.
inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t solver_index,
                                std::uint64_t noise_index,
                                std::uint64_t trial_index) {
  std::uint64_t s = mix_seed(seed, solver_index);
  s = mix_seed(s, noise_index);
  return mix_seed(s, trial_index);
}

// k distinct draws from {0, ..., n-1} by partial Fisher-Yates.
inline std::vector<Index> sample_distinct(std::mt19937_64& gen, Index n, Index k) {
  std::vector<Index> pool(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
  std::vector<Index> out;
  out.reserve(static_cast<size_t>(k));
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(pick(gen))]);
    out.push_back(pool[static_cast<size_t>(i)]);
  }
  return out;
}

}  // namespace rng

// Dictionary with independent standard normal entries, filled atom by atom.
inline Dictionary gen_dictionary(Index m, Index n, std::uint64_t seed) {
  if (m < 1 || n < 1)
    throw InvalidParameterError("gen_dictionary: dimensions must be positive");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix atoms(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) atoms(i, j) = normal(gen);
  return Dictionary(std::move(atoms));
}

// k-sparse vector with distinct support positions and magnitudes drawn
// uniformly from [1, 2] under random signs.
inline Eigen::VectorXd gen_sparse_vector(Index n, Index k, std::uint64_t seed) {
  if (n < 1) throw InvalidParameterError("gen_sparse_vector: n must be positive");
  if (k < 1 || k > n)
    throw InvalidParameterError("gen_sparse_vector: need 1 <= k <= n");
  std::mt19937_64 gen(seed);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  const std::vector<Index> support = rng::sample_distinct(gen, n, k);
  std::uniform_real_distribution<double> mag(1.0, 2.0);
  std::uniform_int_distribution<int> coin(0, 1);
  for (Index pos : support) {
    const double v = mag(gen);
    x[pos] = coin(gen) ? v : -v;
  }
  return x;
}

enum class NoiseKind { None, Chi2, Exponential, StudentT, Gaussian, Wgn, Missing };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::None;
  double snr_db = 2.0;            // Wgn only
  double missing_fraction = 0.1;  // Missing only
  int outlier_count = 0;
  double outlier_magnitude = 30.0;  // in units of the noise deviation

  void validate() const {
    if (!(missing_fraction >= 0.0 && missing_fraction <= 1.0))
      throw InvalidParameterError("NoiseSpec: missing_fraction must lie in [0, 1]");
    if (outlier_count < 0)
      throw InvalidParameterError("NoiseSpec: outlier_count must be nonnegative");
    if (outlier_magnitude < 0.0)
      throw InvalidParameterError("NoiseSpec: outlier_magnitude must be nonnegative");
    if (!std::isfinite(snr_db))
      throw InvalidParameterError("NoiseSpec: snr_db must be finite");
  }

  const char* label() const {
    switch (kind) {
      case NoiseKind::None: return "none";
      case NoiseKind::Chi2: return "chi2";
      case NoiseKind::Exponential: return "exp";
      case NoiseKind::StudentT: return "tdist";
      case NoiseKind::Gaussian: return "gaussian";
      case NoiseKind::Wgn: return "wgn";
      case NoiseKind::Missing: return "missing";
    }
    return "unknown";
  }

  static NoiseSpec none() { return {}; }
  static NoiseSpec chi2() { return {NoiseKind::Chi2}; }
  static NoiseSpec exponential() { return {NoiseKind::Exponential}; }
  static NoiseSpec student_t() { return {NoiseKind::StudentT}; }
  static NoiseSpec gaussian() { return {NoiseKind::Gaussian}; }
  static NoiseSpec wgn(double db) {
    NoiseSpec s{NoiseKind::Wgn};
    s.snr_db = db;
    return s;
  }
  static NoiseSpec missing(double fraction) {
    NoiseSpec s{NoiseKind::Missing};
    s.missing_fraction = fraction;
    return s;
  }
  NoiseSpec with_outliers(int count, double magnitude = 30.0) const {
    NoiseSpec s = *this;
    s.outlier_count = count;
    s.outlier_magnitude = magnitude;
    return s;
  }
};

namespace detail {

inline double sample_std(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  const double ss = (v.array() - mean).square().sum();
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace detail

// Applies the requested corruption to a clean measurement: an additive
// noise draw or coordinate erasure first, then optional outliers of size
// outlier_magnitude times the noise deviation at random coordinates. The
// deviation is the sample deviation of the drawn noise, or of the clean
// signal when nothing additive was drawn.
inline Signal corrupt(const Signal& clean, const NoiseSpec& spec, std::uint64_t seed) {
  spec.validate();
  validate_signal(clean, "corrupt");
  const Index m = clean.size();
  std::mt19937_64 gen(seed);
  Signal out = clean;
  Eigen::VectorXd noise;

  switch (spec.kind) {
    case NoiseKind::None:
    case NoiseKind::Missing:
      break;
    case NoiseKind::Chi2: {
      std::chi_squared_distribution<double> d(1.0);
      noise.resize(m);
      for (Index i = 0; i < m; ++i) noise[i] = d(gen);
      break;
    }
    case NoiseKind::Exponential: {
      std::exponential_distribution<double> d(1.0);
      noise.resize(m);
      for (Index i = 0; i < m; ++i) noise[i] = d(gen);
      break;
    }
    case NoiseKind::StudentT: {
      std::student_t_distribution<double> d(3.0);
      noise.resize(m);
      for (Index i = 0; i < m; ++i) noise[i] = d(gen);
      break;
    }
    case NoiseKind::Gaussian: {
      std::normal_distribution<double> d(0.0, 0.5);
      noise.resize(m);
      for (Index i = 0; i < m; ++i) noise[i] = d(gen);
      break;
    }
    case NoiseKind::Wgn: {
      std::normal_distribution<double> d(0.0, 1.0);
      noise.resize(m);
      for (Index i = 0; i < m; ++i) noise[i] = d(gen);
      // Scale so the realized signal-to-noise ratio hits snr_db exactly.
      const double nn = noise.norm();
      if (nn > 0.0)
        noise *= clean.norm() / (nn * std::pow(10.0, spec.snr_db / 20.0));
      break;
    }
  }

  if (noise.size() > 0) out += noise;

  if (spec.kind == NoiseKind::Missing) {
    const Index count = static_cast<Index>(
        std::llround(spec.missing_fraction * static_cast<double>(m)));
    for (Index pos : rng::sample_distinct(gen, m, count)) out[pos] = 0.0;
  }

  if (spec.outlier_count > 0) {
    const double dev =
        noise.size() > 0 ? detail::sample_std(noise) : detail::sample_std(clean);
    const Index count = std::min<Index>(spec.outlier_count, m);
    std::uniform_int_distribution<int> coin(0, 1);
    for (Index pos : rng::sample_distinct(gen, m, count)) {
      const double bump = spec.outlier_magnitude * dev;
      out[pos] += coin(gen) ? bump : -bump;
    }
  }
  return out;
}

enum class BlockFill { Random, Patch };

struct OcclusionSpec {
  Index height = 0;
  Index width = 0;
  BlockFill fill = BlockFill::Random;
};

// Fixed synthetic texture in [0, 1] used for patch fills.
inline double patch_value(Index i, Index j) {
  return 0.5 + 0.5 * std::sin(1.7 * static_cast<double>(i) + 0.712) *
                   std::cos(2.3 * static_cast<double>(j) + 1.318);
}

// Overwrites one randomly placed height x width block of a rows x cols
// image, stored row-major as a vector, with uniform [0, 1] values or the
// stored patch. A zero-sized block is the identity.
inline Signal occlusion_block(const Signal& image, Index rows, Index cols,
                              const OcclusionSpec& spec, std::uint64_t seed) {
  if (rows < 1 || cols < 1)
    throw InvalidParameterError("occlusion_block: grid must be nonempty");
  if (image.size() != rows * cols)
    throw ShapeError("occlusion_block: image length does not match grid");
  if (spec.height < 0 || spec.width < 0 || spec.height > rows || spec.width > cols)
    throw InvalidParameterError("occlusion_block: block does not fit the grid");
  if (spec.height == 0 || spec.width == 0) return image;

  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<Index> row0(0, rows - spec.height);
  std::uniform_int_distribution<Index> col0(0, cols - spec.width);
  const Index r0 = row0(gen);
  const Index c0 = col0(gen);

  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Signal out = image;
  for (Index i = 0; i < spec.height; ++i) {
    for (Index j = 0; j < spec.width; ++j) {
      const double v =
          spec.fill == BlockFill::Random ? uni(gen) : patch_value(i, j);
      out[(r0 + i) * cols + (c0 + j)] = v;
    }
  }
  return out;
}

inline double recovery_error(const Eigen::VectorXd& estimate,
                             const Eigen::VectorXd& truth) {
  if (estimate.size() != truth.size())
    throw ShapeError("recovery_error: length mismatch");
  return (estimate - truth).norm();
}

struct SolverSpec {
  std::string name;
  PursuitConfig config;
};

struct BenchDims {
  Index m = 200;
  Index n = 400;
  Index k = 10;
};

struct TrialReport {
  std::string solver_name;
  std::string noise_kind;
  int trial_index = 0;
  double recovery_error = 0.0;
  bool support_exact = false;
  double runtime_ms = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
};

namespace detail {

inline bool support_matches(const SupportSet& support, const Eigen::VectorXd& truth) {
  std::vector<Index> got(support.begin(), support.end());
  std::sort(got.begin(), got.end());
  std::vector<Index> want;
  for (Index j = 0; j < truth.size(); ++j)
    if (truth[j] != 0.0) want.push_back(j);
  return got == want;
}

}  // namespace detail

// One benchmark problem instance: dictionary, sparse ground truth, and the
// corrupted measurement.
struct TrialData {
  Dictionary dict;
  Eigen::VectorXd truth;
  Signal b;
};

// Assembles the seeded problem a trial solves. Dictionary columns are
// rescaled to unit norm: recovery benchmarks are run in the regime where
// additive noise competes with each atom's unit response, so that plain
// inner-product selection degrades under heavy-tailed noise while scale-
// invariant selection rules are unaffected. Sub-seeds keep the dictionary,
// support, and noise streams independent.
inline TrialData make_trial_data(const BenchDims& dims, const NoiseSpec& noise,
                                 std::uint64_t seed) {
  TrialData d;
  d.dict = gen_dictionary(dims.m, dims.n, rng::mix_seed(seed, 1));
  for (Index j = 0; j < d.dict.size(); ++j)
    d.dict.atoms.col(j).normalize();
  d.truth = gen_sparse_vector(dims.n, dims.k, rng::mix_seed(seed, 2));
  d.b = corrupt(d.dict.atoms * d.truth, noise, rng::mix_seed(seed, 3));
  return d;
}

// Runs one seeded trial: generate the dictionary and sparse truth, corrupt
// the measurement, solve, and report. Solver errors become failed entries
// with an infinite recovery error rather than aborting the run.
inline TrialReport run_trial(const SolverSpec& solver, const NoiseSpec& noise,
                             const BenchDims& dims, int trial_index,
                             std::uint64_t seed) {
  TrialReport rep;
  rep.solver_name = solver.name;
  rep.noise_kind = noise.label();
  rep.trial_index = trial_index;
  rep.seed = seed;

  const TrialData data = make_trial_data(dims, noise, seed);
  const Dictionary& dict = data.dict;
  const Eigen::VectorXd& truth = data.truth;
  const Signal& b = data.b;

  const auto start = std::chrono::steady_clock::now();
  try {
    const SparseSolution sol = pursuit_solve(b, dict, solver.config);
    rep.recovery_error = recovery_error(sol.x, truth);
    rep.support_exact = detail::support_matches(sol.support, truth);
  } catch (const std::exception&) {
    rep.failed = true;
    rep.recovery_error = std::numeric_limits<double>::infinity();
    rep.support_exact = false;
  }
  const auto stop = std::chrono::steady_clock::now();
  rep.runtime_ms =
      std::chrono::duration<double, std::milli>(stop - start).count();
  return rep;
}

// Full benchmark grid in canonical (solver, noise, trial) order. Trials
// are independent jobs; with threads > 1 they run on a small pool, and the
// report content is identical to the single-threaded run because every
// trial is a pure function of its derived seed.
inline std::vector<TrialReport> run_benchmark(const std::vector<SolverSpec>& solvers,
                                              const std::vector<NoiseSpec>& noises,
                                              int trials, const BenchDims& dims,
                                              std::uint64_t seed, int threads = 1) {
  if (solvers.empty()) throw InvalidParameterError("run_benchmark: no solvers");
  if (noises.empty()) throw InvalidParameterError("run_benchmark: no noises");
  if (trials < 1) throw InvalidParameterError("run_benchmark: trials must be positive");
  for (const auto& s : solvers) s.config.validate();
  for (const auto& nz : noises) nz.validate();

  const size_t total = solvers.size() * noises.size() * static_cast<size_t>(trials);
  std::vector<TrialReport> reports(total);

  auto run_job = [&](size_t job) {
    const size_t per_solver = noises.size() * static_cast<size_t>(trials);
    const size_t si = job / per_solver;
    const size_t ni = (job % per_solver) / static_cast<size_t>(trials);
    const int ti = static_cast<int>(job % static_cast<size_t>(trials));
    const std::uint64_t ts = rng::trial_seed(seed, si, ni, static_cast<std::uint64_t>(ti));
    reports[job] = run_trial(solvers[si], noises[ni], dims, ti, ts);
  };

  const int pool = std::max(1, threads);
  if (pool == 1 || total < 2) {
    for (size_t job = 0; job < total; ++job) run_job(job);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const size_t job = next.fetch_add(1);
        if (job >= total) return;
        run_job(job);
      }
    };
    std::vector<std::thread> ts;
    const int count = static_cast<int>(std::min<size_t>(pool, total));
    ts.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) ts.emplace_back(worker);
    for (auto& t : ts) t.join();
  }
  return reports;
}

struct CellStats {
  std::string solver;
  std::string noise;
  int trials = 0;
  double mean_error = 0.0;
  double std_error = 0.0;
  int support_exact_count = 0;
};

// Per (solver, noise) cell statistics, first-seen order, sample deviation.
inline std::vector<CellStats> aggregate(const std::vector<TrialReport>& reports) {
  std::vector<CellStats> cells;
  auto find = [&](const TrialReport& r) -> CellStats& {
    for (auto& c : cells)
      if (c.solver == r.solver_name && c.noise == r.noise_kind) return c;
    cells.push_back({r.solver_name, r.noise_kind, 0, 0.0, 0.0, 0});
    return cells.back();
  };
  for (const auto& r : reports) {
    CellStats& c = find(r);
    ++c.trials;
    c.mean_error += r.recovery_error;
    if (r.support_exact) ++c.support_exact_count;
  }
  for (auto& c : cells) c.mean_error /= static_cast<double>(c.trials);
  for (auto& c : cells) {
    double ss = 0.0;
    for (const auto& r : reports)
      if (r.solver_name == c.solver && r.noise_kind == c.noise)
        ss += (r.recovery_error - c.mean_error) * (r.recovery_error - c.mean_error);
    c.std_error = c.trials > 1 ? std::sqrt(ss / static_cast<double>(c.trials - 1)) : 0.0;
  }
  return cells;
}

// --- occluded classification task ---

struct ClassTaskConfig {
  int classes = 3;
  int atoms_per_class = 15;
  Index rows = 20;
  Index cols = 20;
  Index signal_atoms = 3;   // atoms mixed into each query
  double query_noise = 0.02;
  Index block = 9;          // occlusion block edge length
  BlockFill fill = BlockFill::Patch;
  int sparsity = 10;
  double p = 1.7;

  void validate() const {
    if (classes < 1) throw InvalidParameterError("ClassTaskConfig: classes must be positive");
    if (atoms_per_class < 1)
      throw InvalidParameterError("ClassTaskConfig: atoms_per_class must be positive");
    if (rows < 1 || cols < 1)
      throw InvalidParameterError("ClassTaskConfig: grid must be nonempty");
    if (signal_atoms < 1 || signal_atoms > atoms_per_class)
      throw InvalidParameterError("ClassTaskConfig: signal_atoms out of range");
    if (query_noise < 0.0)
      throw InvalidParameterError("ClassTaskConfig: query_noise must be nonnegative");
    if (block < 0 || block > std::min(rows, cols))
      throw InvalidParameterError("ClassTaskConfig: block does not fit the grid");
    if (sparsity < 1) throw InvalidParameterError("ClassTaskConfig: sparsity must be positive");
    if (!(p > 0.0)) throw InvalidParameterError("ClassTaskConfig: p must be positive");
  }
};

// Labeled dictionary of smooth per-class prototypes with per-atom jitter,
// entries roughly in [0, 1] like a normalized image patch.
inline Dictionary gen_class_dictionary(const ClassTaskConfig& task, std::uint64_t seed) {
  task.validate();
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> freq(0.15, 0.9);
  std::uniform_real_distribution<double> phase(0.0, 6.28318530717958647692);
  std::normal_distribution<double> jitter(0.0, 0.1);

  const Index m = task.rows * task.cols;
  Matrix atoms(m, static_cast<Index>(task.classes * task.atoms_per_class));
  std::vector<int> labels;
  Index col = 0;
  for (int c = 0; c < task.classes; ++c) {
    const double f1 = freq(gen), f2 = freq(gen), f3 = freq(gen);
    const double p1 = phase(gen), p2 = phase(gen), p3 = phase(gen);
    Signal proto(m);
    for (Index i = 0; i < task.rows; ++i) {
      for (Index j = 0; j < task.cols; ++j) {
        const double di = static_cast<double>(i);
        const double dj = static_cast<double>(j);
        proto[i * task.cols + j] = 0.5 + 0.3 * std::sin(f1 * di + p1) * std::cos(f2 * dj + p2) +
                                   0.2 * std::sin(f3 * (di + dj) + p3);
      }
    }
    for (int a = 0; a < task.atoms_per_class; ++a) {
      Signal atom = proto;
      for (Index i = 0; i < m; ++i) atom[i] += jitter(gen);
      atoms.col(col++) = atom;
      labels.push_back(c);
    }
  }
  return Dictionary(std::move(atoms), std::move(labels));
}

// One occluded query drawn from the given class: a sparse positive mix of
// that class's atoms plus Gaussian noise, then a patch or random block.
inline Signal gen_class_query(const Dictionary& dict, const ClassTaskConfig& task,
                              int class_id, std::uint64_t seed) {
  task.validate();
  if (class_id < 0 || class_id >= task.classes)
    throw InvalidParameterError("gen_class_query: class_id out of range");
  std::mt19937_64 gen(seed);

  std::vector<Index> own;
  for (Index j = 0; j < dict.size(); ++j)
    if ((*dict.class_labels)[static_cast<size_t>(j)] == class_id) own.push_back(j);

  Signal b = Signal::Zero(dict.dim());
  std::uniform_real_distribution<double> coeff(0.5, 1.5);
  const auto chosen =
      rng::sample_distinct(gen, static_cast<Index>(own.size()), task.signal_atoms);
  for (Index idx : chosen) b += coeff(gen) * dict.atoms.col(own[static_cast<size_t>(idx)]);

  if (task.query_noise > 0.0) {
    std::normal_distribution<double> d(0.0, task.query_noise);
    for (Index i = 0; i < b.size(); ++i) b[i] += d(gen);
  }
  return occlusion_block(b, task.rows, task.cols,
                         {task.block, task.block, task.fill},
                         rng::mix_seed(seed, 7));
}

enum class ClassifierScore { Kernel, Euclidean };

struct ClassifyOutcome {
  std::vector<std::vector<int>> confusion;  // confusion[truth][predicted]
  int trials = 0;
  int correct = 0;
  double accuracy() const {
    return trials > 0 ? static_cast<double>(correct) / trials : 0.0;
  }
};

// Runs the occluded classification task: one dictionary per seed, then
// seeded queries with round-robin true classes, classified by the given
// pursuit and score rule.
inline ClassifyOutcome run_class_demo(const ClassTaskConfig& task,
                                      const PursuitConfig& solver,
                                      ClassifierScore score, int trials,
                                      std::uint64_t seed) {
  task.validate();
  solver.validate();
  if (trials < 1) throw InvalidParameterError("run_class_demo: trials must be positive");

  const Dictionary dict = gen_class_dictionary(task, rng::mix_seed(seed, 11));
  ClassifyOutcome out;
  out.confusion.assign(static_cast<size_t>(task.classes),
                       std::vector<int>(static_cast<size_t>(task.classes), 0));
  out.trials = trials;

  for (int t = 0; t < trials; ++t) {
    const int truth = t % task.classes;
    const Signal b =
        gen_class_query(dict, task, truth, rng::trial_seed(seed, 13, 0, t));
    int predicted;
    if (score == ClassifierScore::Kernel) {
      predicted = classify(b, dict, solver, task.p);
    } else {
      const SparseSolution sol = pursuit_solve(b, dict, solver);
      const auto norms = class_residual_norms(b, dict, sol.x);
      predicted = norms.front().first;
      double best = norms.front().second;
      for (const auto& [label, r] : norms) {
        if (r < best) {
          best = r;
          predicted = label;
        }
      }
    }
    ++out.confusion[static_cast<size_t>(truth)][static_cast<size_t>(predicted)];
    if (predicted == truth) ++out.correct;
  }
  return out;
}

}  // namespace itl_pursuit
