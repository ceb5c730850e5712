#pragma once

// Experiment layer behind the command-line tool. A config names an instance plus the
// solver runs to perform on it; each run leaves one CSV trace.

#include "sgnep/algorithms.hpp"
#include "sgnep/instance_io.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace sgnep {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { bilinear, cournot, custom };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::bilinear: return "bilinear";
    case ExperimentKind::cournot: return "cournot";
    case ExperimentKind::custom: return "custom";
  }
  return "?";
}

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::bilinear;
  BilinearParams bilinear;
  CournotParams cournot;
  std::filesystem::path instance;  // custom experiments only
  std::vector<SolverKind> solvers{SolverKind::sprg};
  std::vector<std::uint64_t> seeds{1};
  BatchSchedule schedule;
  bool stochastic = true;
  std::optional<double> tau;
  double safety = 0.99;
  Index max_iterations = 1000;
  double tolerance = 1e-6;  // +inf: run all iterations
  double divergence_threshold = 1e12;
  std::optional<Vector> start_x;
  std::filesystem::path output = "out";

  void validate() const {
    if (solvers.empty()) throw ConfigError("solver list is empty");
    if (seeds.empty()) throw ConfigError("seed list is empty");
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
    if (!(safety > 0.0) || safety > 1.0) throw ConfigError("safety must lie in (0, 1]");
    if (tau && !(*tau > 0.0)) throw ConfigError("tau must be positive");
    if (!(divergence_threshold > 0.0)) throw ConfigError("divergence_threshold must be positive");
    try {
      schedule.validate();
    } catch (const std::invalid_argument &e) {
      throw ConfigError(e.what());
    }
    if (experiment == ExperimentKind::custom && !std::filesystem::exists(instance)) {
      throw ConfigError("instance file not found: " + instance.string());
    }
  }
};

namespace detail {

/// Accepts a number, "inf", or null (= inf).
inline double number_or_inf(const Json &j, const char *what) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    try {
      return std::stod(j.get<std::string>());
    } catch (const std::exception &) {
    }
  }
  throw ConfigError(std::string(what) + " must be a number, \"inf\" or null");
}

inline Json number_json(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? Json("inf") : Json("-inf");
}

inline void reject_unknown(const Json &j, std::initializer_list<const char *> known, const char *where) {
  for (const auto &[key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char *k) { return key == k; })) {
      throw ConfigError(std::string("unknown key '") + key + "' in " + where);
    }
  }
}

}  // namespace detail

/// Parses a config object. A relative instance path resolves against base_dir; the output
/// directory stays relative to the working directory.
inline ExperimentConfig config_from_json(const Json &j, const std::filesystem::path &base_dir = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  detail::reject_unknown(j,
                         {"experiment", "bilinear", "cournot", "instance", "solvers", "seeds", "schedule",
                          "stochastic", "steps", "max_iterations", "tolerance", "divergence_threshold",
                          "start", "output"},
                         "config");
  ExperimentConfig c;
  try {
    const auto kind = j.value("experiment", std::string("bilinear"));
    if (kind == "bilinear") {
      c.experiment = ExperimentKind::bilinear;
    } else if (kind == "cournot") {
      c.experiment = ExperimentKind::cournot;
    } else if (kind == "custom") {
      c.experiment = ExperimentKind::custom;
    } else {
      throw ConfigError("unknown experiment '" + kind + "'");
    }
    if (j.contains("bilinear")) {
      const Json &b = j.at("bilinear");
      detail::reject_unknown(b, {"variant", "noise_mean", "noise_sigma"}, "bilinear");
      if (b.contains("variant")) c.bilinear.variant = parse_bilinear_variant(b.at("variant").get<std::string>());
      c.bilinear.noise_mean = b.value("noise_mean", c.bilinear.noise_mean);
      c.bilinear.noise_sigma = b.value("noise_sigma", c.bilinear.noise_sigma);
    }
    if (j.contains("cournot")) {
      const Json &s = j.at("cournot");
      detail::reject_unknown(s,
                             {"companies", "markets", "max_markets_per_company", "price_sigma", "price_mean",
                              "cost_slope", "dense_sensitivity", "seed"},
                             "cournot");
      auto &p = c.cournot;
      p.companies = s.value("companies", p.companies);
      p.markets = s.value("markets", p.markets);
      p.max_markets_per_company = s.value("max_markets_per_company", p.max_markets_per_company);
      p.price_sigma = s.value("price_sigma", p.price_sigma);
      p.price_mean = s.value("price_mean", p.price_mean);
      p.cost_slope = s.value("cost_slope", p.cost_slope);
      p.dense_sensitivity = s.value("dense_sensitivity", p.dense_sensitivity);
      p.seed = s.value("seed", p.seed);
    }
    if (j.contains("instance")) {
      std::filesystem::path ip = j.at("instance").get<std::string>();
      c.instance = ip.is_absolute() || base_dir.empty() ? ip : base_dir / ip;
    }
    if (j.contains("solvers")) {
      c.solvers.clear();
      for (const auto &s : j.at("solvers")) c.solvers.push_back(parse_solver(s.get<std::string>()));
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("schedule")) {
      const Json &s = j.at("schedule");
      detail::reject_unknown(s, {"c", "k0", "a"}, "schedule");
      c.schedule.c = s.value("c", c.schedule.c);
      c.schedule.k0 = s.value("k0", c.schedule.k0);
      c.schedule.a = s.value("a", c.schedule.a);
    }
    c.stochastic = j.value("stochastic", c.stochastic);
    if (j.contains("steps")) {
      const Json &s = j.at("steps");
      detail::reject_unknown(s, {"tau", "safety"}, "steps");
      if (s.contains("tau") && !s.at("tau").is_null()) c.tau = s.at("tau").get<double>();
      c.safety = s.value("safety", c.safety);
    }
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    if (j.contains("tolerance")) c.tolerance = detail::number_or_inf(j.at("tolerance"), "tolerance");
    if (j.contains("divergence_threshold")) {
      c.divergence_threshold = detail::number_or_inf(j.at("divergence_threshold"), "divergence_threshold");
    }
    if (j.contains("start")) {
      const Json &s = j.at("start");
      detail::reject_unknown(s, {"x"}, "start");
      if (s.contains("x")) c.start_x = io::vector_from_json(s.at("x"));
    }
    if (j.contains("output")) {
      c.output = j.at("output").get<std::string>();
    }
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument &e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig read_config(const std::filesystem::path &path) {
  return config_from_json(read_json_file(path), path.parent_path());
}

/// Canonical form, the input of the config hash. Output location is excluded so the
/// same experiment hashes equally wherever it is written.
inline Json to_json(const ExperimentConfig &c) {
  Json j;
  j["experiment"] = std::string(to_string(c.experiment));
  switch (c.experiment) {
    case ExperimentKind::bilinear:
      j["bilinear"] = {{"variant", std::string(to_string(c.bilinear.variant))},
                       {"noise_mean", c.bilinear.noise_mean},
                       {"noise_sigma", c.bilinear.noise_sigma}};
      break;
    case ExperimentKind::cournot:
      j["cournot"] = {{"companies", c.cournot.companies},
                      {"markets", c.cournot.markets},
                      {"max_markets_per_company", c.cournot.max_markets_per_company},
                      {"price_sigma", c.cournot.price_sigma},
                      {"price_mean", c.cournot.price_mean},
                      {"cost_slope", c.cournot.cost_slope},
                      {"dense_sensitivity", c.cournot.dense_sensitivity},
                      {"seed", c.cournot.seed}};
      break;
    case ExperimentKind::custom: j["instance"] = c.instance.string(); break;
  }
  Json solvers = Json::array();
  for (SolverKind s : c.solvers) solvers.push_back(std::string(to_string(s)));
  j["solvers"] = solvers;
  j["seeds"] = c.seeds;
  j["schedule"] = {{"c", c.schedule.c}, {"k0", c.schedule.k0}, {"a", c.schedule.a}};
  j["stochastic"] = c.stochastic;
  j["steps"] = {{"tau", c.tau ? Json(*c.tau) : Json(nullptr)}, {"safety", c.safety}};
  j["max_iterations"] = c.max_iterations;
  j["tolerance"] = detail::number_json(c.tolerance);
  j["divergence_threshold"] = detail::number_json(c.divergence_threshold);
  if (c.start_x) j["start"] = {{"x", io::vector_to_json(*c.start_x)}};
  return j;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig &c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(c).dump())));
  return buf;
}

inline Instance build_instance(const ExperimentConfig &c) {
  switch (c.experiment) {
    case ExperimentKind::bilinear: return make_instance(c.bilinear);
    case ExperimentKind::cournot: return make_instance(generate_cournot_data(c.cournot));
    case ExperimentKind::custom: return read_instance(c.instance);
  }
  throw std::logic_error("unhandled experiment kind");
}

/// Writes <output>/instance.json and returns its path.
inline std::filesystem::path cmd_generate(const ExperimentConfig &c) {
  c.validate();
  const auto path = c.output / "instance.json";
  write_instance(path, build_instance(c));
  return path;
}

// ---------------------------------------------------------------------------
// Trace CSV

struct TraceMeta {
  std::string config_hash;
  std::string instance;
  double tolerance = 0.0;
  Index max_iterations = 0;
  bool record_timing = true;
};

namespace detail {

inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string fmt_list(const Vector &v) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += fmt_num(v(i));
  }
  return out;
}

}  // namespace detail

/// Comment preamble ("# key=value" lines), then the header row and one row per iteration.
/// The dist column is present only when the instance has a known solution.
inline std::string format_trace_csv(const RunTrace &t, const TraceMeta &meta) {
  const bool has_dist = !t.records.empty() && t.records.front().dist.has_value();
  std::ostringstream os;
  os << "# solver=" << to_string(t.kind) << "\n";
  os << "# seed=" << t.seed << "\n";
  os << "# instance=" << meta.instance << "\n";
  os << "# config_hash=" << meta.config_hash << "\n";
  os << "# tolerance=" << detail::fmt_num(meta.tolerance) << "\n";
  os << "# max_iterations=" << meta.max_iterations << "\n";
  os << "# theta=" << detail::fmt_num(t.constants.theta) << "\n";
  os << "# beta=" << detail::fmt_num(t.constants.beta) << "\n";
  os << "# lipschitz=" << detail::fmt_num(t.constants.lipschitz) << "\n";
  os << "# tau=" << detail::fmt_num(t.steps.tau) << "\n";
  os << "# alpha=" << detail::fmt_list(t.steps.alpha) << "\n";
  os << "# nu=" << detail::fmt_list(t.steps.nu) << "\n";
  os << "# sigma=" << detail::fmt_list(t.steps.sigma) << "\n";
  os << "# status=" << to_string(t.status) << "\n";
  os << "# feasibility_violations=" << t.feasibility_violations << "\n";
  os << "k,residual," << (has_dist ? "dist," : "") << "consensus,N_k,oracle_calls,wall_ms,status\n";
  for (std::size_t r = 0; r < t.records.size(); ++r) {
    const TraceRecord &rec = t.records[r];
    const bool last = r + 1 == t.records.size();
    os << rec.k << ',' << detail::fmt_num(rec.residual) << ',';
    if (has_dist) os << detail::fmt_num(rec.dist.value_or(std::numeric_limits<double>::quiet_NaN())) << ',';
    os << detail::fmt_num(rec.consensus) << ',' << rec.batch_size << ',' << rec.oracle_calls << ',';
    char ms[32];
    std::snprintf(ms, sizeof ms, "%.3f", meta.record_timing ? rec.wall_ms : 0.0);
    os << ms << ',' << (last ? to_string(t.status) : std::string_view("running")) << '\n';
  }
  return os.str();
}

struct TraceTable {
  std::map<std::string, std::string> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  bool has_column(const std::string &name) const {
    return std::find(columns.begin(), columns.end(), name) != columns.end();
  }

  std::vector<double> numeric(const std::string &name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw std::runtime_error("trace has no column '" + name + "'");
    const auto c = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto &row : rows) out.push_back(std::stod(row.at(c)));
    return out;
  }

  std::string text(const std::string &name, std::size_t row) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw std::runtime_error("trace has no column '" + name + "'");
    return rows.at(row).at(static_cast<std::size_t>(it - columns.begin()));
  }
};

inline TraceTable parse_trace_csv(std::istream &in) {
  TraceTable t;
  std::string line;
  auto split = [](const std::string &s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        const auto key_begin = line.find_first_not_of("# ");
        t.meta[line.substr(key_begin, eq - key_begin)] = line.substr(eq + 1);
      }
      continue;
    }
    if (t.columns.empty()) {
      t.columns = split(line);
    } else {
      auto row = split(line);
      if (row.size() != t.columns.size()) throw std::runtime_error("ragged trace row: " + line);
      t.rows.push_back(std::move(row));
    }
  }
  if (t.columns.empty()) throw std::runtime_error("trace without header row");
  return t;
}

inline TraceTable read_trace_csv(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return parse_trace_csv(in);
  } catch (const std::exception &e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

inline std::string trace_file_name(SolverKind k, std::uint64_t seed) {
  return std::string(to_string(k)) + "_seed" + std::to_string(seed) + ".csv";
}

// ---------------------------------------------------------------------------
// run

struct RunOptions {
  bool record_timing = true;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct RunOutcome {
  SolverKind kind;
  std::uint64_t seed;
  RunStatus status;
  Index iterations;
  double final_residual;
  std::filesystem::path trace;
};

struct RunReport {
  std::filesystem::path instance;
  std::string config_hash;
  std::vector<RunOutcome> runs;
  std::vector<std::string> warnings;

  bool any_diverged() const {
    return std::any_of(runs.begin(), runs.end(), [](const RunOutcome &r) { return r.status == RunStatus::diverged; });
  }
};

/// Runs every (solver, seed) pair, writing <output>/instance.json and one trace per pair.
/// Pairs run concurrently; each owns its oracle and its output file.
inline RunReport cmd_run(const ExperimentConfig &c, const RunOptions &opt = {}) {
  c.validate();
  RunReport report;
  report.config_hash = config_hash(c);
  const Instance inst = build_instance(c);
  const ExtendedProblem problem = inst.problem();
  report.instance = c.output / "instance.json";
  write_instance(report.instance, inst);

  std::optional<StackedPoint> start;
  if (c.start_x) {
    start = problem.default_start();
    require_size(c.start_x->size(), problem.primal_dim(), "start x");
    start->x = *c.start_x;
  }

  // Constants and step sizes depend on the solver only, not on the seed.
  const OperatorConstants constants = estimate_constants(problem);
  std::map<SolverKind, StepSizes> steps;
  for (SolverKind k : c.solvers) {
    if (steps.count(k)) continue;
    std::vector<std::string> warnings;
    steps.emplace(k, default_step_sizes(k, problem, constants, c.tau, c.safety, &warnings));
    report.warnings.insert(report.warnings.end(), warnings.begin(), warnings.end());
  }

  struct Job {
    SolverKind kind;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (SolverKind k : c.solvers)
    for (std::uint64_t s : c.seeds) jobs.push_back({k, s});
  report.runs.resize(jobs.size());

  const TraceMeta meta{report.config_hash, inst.game().name(), c.tolerance, c.max_iterations, opt.record_timing};
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        SolverConfig sc;
        sc.kind = jobs[i].kind;
        sc.steps = steps.at(jobs[i].kind);
        sc.constants = constants;
        sc.schedule = c.schedule;
        sc.stochastic = c.stochastic;
        sc.max_iterations = c.max_iterations;
        sc.tolerance = c.tolerance;
        sc.seed = jobs[i].seed;
        sc.divergence_threshold = c.divergence_threshold;
        sc.start = start;
        const RunTrace trace = run(sc, problem);
        const auto path = c.output / trace_file_name(jobs[i].kind, jobs[i].seed);
        write_text_file(path, format_trace_csv(trace, meta));
        report.runs[i] = {jobs[i].kind, jobs[i].seed, trace.status, trace.final_state.k,
                          trace.records.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                : trace.records.back().residual,
                          path};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  unsigned n_threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(jobs.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto &th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return report;
}

// ---------------------------------------------------------------------------
// compare

struct CompareRow {
  std::string solver;
  Index runs = 0;
  Index reached = 0;  // runs whose residual reached the tolerance
  Index diverged = 0;
  std::optional<double> iterations_to_tol;  // medians over the runs that reached it
  std::optional<double> oracle_calls_to_tol;
  double final_residual = 0.0;  // median over all runs
  std::optional<double> final_dist;
};

struct CompareResult {
  double tolerance = 0.0;
  std::vector<CompareRow> rows;
  std::string text;
  std::string csv;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end(), [](double a, double b) {
    return std::isnan(b) ? !std::isnan(a) : (!std::isnan(a) && a < b);
  });
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::string opt_cell(const std::optional<double> &v) { return v ? fmt_num(*v) : "-"; }

}  // namespace detail

/// Per-solver summary of every *.csv trace in dir. The tolerance defaults to the one
/// recorded in each trace (1e-6 when that is infinite or absent).
inline CompareResult cmd_compare(const std::filesystem::path &dir, std::optional<double> tolerance = {}) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto &e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv" && e.path().filename() != "summary.csv") {
      files.push_back(e.path());
    }
  }
  if (files.empty()) throw std::runtime_error("no traces in " + dir.string());
  std::sort(files.begin(), files.end());

  struct Acc {
    Index runs = 0, reached = 0, diverged = 0;
    std::vector<double> iters, calls, finals, dists;
    bool all_dist = true;
  };
  std::map<std::string, Acc> by_solver;
  double used_tol = tolerance.value_or(std::numeric_limits<double>::quiet_NaN());
  for (const auto &f : files) {
    const TraceTable t = read_trace_csv(f);
    if (t.rows.empty()) continue;
    double tol = 1e-6;
    if (tolerance) {
      tol = *tolerance;
    } else if (t.meta.count("tolerance")) {
      const double recorded = std::stod(t.meta.at("tolerance"));
      if (std::isfinite(recorded)) tol = recorded;
    }
    used_tol = tol;
    const std::string solver = t.meta.count("solver") ? t.meta.at("solver") : f.stem().string();
    Acc &acc = by_solver[solver];
    ++acc.runs;
    const auto res = t.numeric("residual");
    const auto ks = t.numeric("k");
    const auto calls = t.numeric("oracle_calls");
    for (std::size_t r = 0; r < res.size(); ++r) {
      if (res[r] <= tol) {
        ++acc.reached;
        acc.iters.push_back(ks[r]);
        acc.calls.push_back(calls[r]);
        break;
      }
    }
    if (t.text("status", t.rows.size() - 1) == "diverged") ++acc.diverged;
    acc.finals.push_back(res.back());
    if (t.has_column("dist")) {
      acc.dists.push_back(t.numeric("dist").back());
    } else {
      acc.all_dist = false;
    }
  }
  if (by_solver.empty()) throw std::runtime_error("no trace rows in " + dir.string());

  CompareResult out;
  out.tolerance = used_tol;
  bool show_dist = true;
  for (auto &[name, acc] : by_solver) {
    CompareRow row;
    row.solver = name;
    row.runs = acc.runs;
    row.reached = acc.reached;
    row.diverged = acc.diverged;
    if (!acc.iters.empty()) {
      row.iterations_to_tol = detail::median(acc.iters);
      row.oracle_calls_to_tol = detail::median(acc.calls);
    }
    row.final_residual = detail::median(acc.finals);
    if (acc.all_dist) {
      row.final_dist = detail::median(acc.dists);
    } else {
      show_dist = false;
    }
    out.rows.push_back(std::move(row));
  }
  // Fewest oracle calls to tolerance first, then smallest final residual.
  std::sort(out.rows.begin(), out.rows.end(), [](const CompareRow &a, const CompareRow &b) {
    if (a.oracle_calls_to_tol.has_value() != b.oracle_calls_to_tol.has_value()) return a.oracle_calls_to_tol.has_value();
    if (a.oracle_calls_to_tol && *a.oracle_calls_to_tol != *b.oracle_calls_to_tol) {
      return *a.oracle_calls_to_tol < *b.oracle_calls_to_tol;
    }
    const auto key = [](double v) { return std::isnan(v) ? std::numeric_limits<double>::infinity() : v; };
    if (key(a.final_residual) != key(b.final_residual)) return key(a.final_residual) < key(b.final_residual);
    return a.solver < b.solver;
  });

  std::vector<std::string> header{"solver", "runs", "reached", "diverged", "iters_to_tol", "oracle_calls_to_tol",
                                  "final_residual"};
  if (show_dist) header.push_back("final_dist");
  std::vector<std::vector<std::string>> cells;
  for (const auto &r : out.rows) {
    std::vector<std::string> c{r.solver,
                               std::to_string(r.runs),
                               std::to_string(r.reached),
                               std::to_string(r.diverged),
                               detail::opt_cell(r.iterations_to_tol),
                               detail::opt_cell(r.oracle_calls_to_tol),
                               detail::fmt_num(r.final_residual)};
    if (show_dist) c.push_back(detail::opt_cell(r.final_dist));
    cells.push_back(std::move(c));
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) {
    width[i] = header[i].size();
    for (const auto &c : cells) width[i] = std::max(width[i], c[i].size());
  }
  std::ostringstream text, csv;
  text << "tolerance " << detail::fmt_num(out.tolerance) << "\n";
  auto emit = [&](const std::vector<std::string> &row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      text << (i ? "  " : "") << row[i];
      if (i + 1 < row.size()) text << std::string(width[i] - row[i].size(), ' ');
      csv << (i ? "," : "") << row[i];
    }
    text << "\n";
    csv << "\n";
  };
  emit(header);
  for (const auto &c : cells) emit(c);
  out.text = text.str();
  out.csv = csv.str();
  return out;
}

}  // namespace sgnep
