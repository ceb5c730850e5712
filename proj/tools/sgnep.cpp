// Command-line front end over the experiment layer.

#include "sgnep/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kExitDiverged = 3;

struct Overrides {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> solvers;
  std::string out;
  sgnep::Index max_iter = 0;
  std::string tol;
};

sgnep::ExperimentConfig load(const Overrides &o) {
  sgnep::ExperimentConfig c = o.config.empty() ? sgnep::ExperimentConfig{} : sgnep::read_config(o.config);
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (!o.solvers.empty()) {
    c.solvers.clear();
    for (const auto &s : o.solvers) c.solvers.push_back(sgnep::parse_solver(s));
  }
  if (!o.out.empty()) c.output = o.out;
  if (o.max_iter > 0) c.max_iterations = o.max_iter;
  if (!o.tol.empty()) c.tolerance = std::stod(o.tol);
  return c;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Distributed stochastic GNEP solvers"};
  app.require_subcommand(1);

  Overrides gen;
  auto *generate = app.add_subcommand("generate", "write the instance JSON for a config");
  generate->add_option("--config", gen.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  generate->add_option("--seed", gen.seeds, "instance seed (Cournot generator)")->expected(1);
  generate->add_option("--out", gen.out, "output directory");

  Overrides runo;
  bool allow_divergence = false;
  bool no_timing = false;
  unsigned threads = 0;
  auto *run = app.add_subcommand("run", "run every (solver, seed) pair and write CSV traces");
  run->add_option("--config", runo.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  run->add_option("--seed", runo.seeds, "solver seed; repeatable")->take_all();
  run->add_option("--solver", runo.solvers, "SPRG, SpPRG, SpFB, SFBF or SEG; repeatable")->take_all();
  run->add_option("--out", runo.out, "output directory");
  run->add_option("--max-iter", runo.max_iter, "iteration cap")->check(CLI::PositiveNumber);
  run->add_option("--tol", runo.tol, "residual tolerance, or inf to run all iterations");
  run->add_flag("--allow-divergence", allow_divergence, "exit 0 even if a run diverged");
  run->add_flag("--no-timing", no_timing, "write wall_ms as 0 so traces are byte-reproducible");
  run->add_option("--threads", threads, "worker threads (default: all cores)");

  std::string trace_dir;
  std::string cmp_tol;
  std::string cmp_out;
  auto *compare = app.add_subcommand("compare", "summarize the traces in a directory");
  compare->add_option("dir", trace_dir, "trace directory")->required()->check(CLI::ExistingDirectory);
  compare->add_option("--tol", cmp_tol, "tolerance (default: the one recorded in the traces)");
  compare->add_option("--out", cmp_out, "summary CSV path (default: <dir>/summary.csv)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) {
      sgnep::ExperimentConfig c = load(gen);
      if (!gen.seeds.empty()) c.cournot.seed = gen.seeds.front();
      std::cout << sgnep::cmd_generate(c).string() << "\n";
      return 0;
    }
    if (*run) {
      const sgnep::ExperimentConfig c = load(runo);
      const auto report = sgnep::cmd_run(c, {!no_timing, threads});
      for (const auto &w : report.warnings) std::cerr << "warning: " << w << "\n";
      for (const auto &r : report.runs) {
        std::cout << sgnep::to_string(r.kind) << " seed " << r.seed << ": " << sgnep::to_string(r.status)
                  << " after " << r.iterations << " iterations, residual " << r.final_residual << " -> "
                  << r.trace.string() << "\n";
      }
      if (report.any_diverged() && !allow_divergence) {
        std::cerr << "error: at least one run diverged (use --allow-divergence to accept)\n";
        return kExitDiverged;
      }
      return 0;
    }
    if (*compare) {
      std::optional<double> tol;
      if (!cmp_tol.empty()) tol = std::stod(cmp_tol);
      const auto result = sgnep::cmd_compare(trace_dir, tol);
      const std::filesystem::path out = cmp_out.empty() ? std::filesystem::path(trace_dir) / "summary.csv"
                                                          : std::filesystem::path(cmp_out);
      sgnep::write_text_file(out, result.csv);
      std::cout << result.text;
      return 0;
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
