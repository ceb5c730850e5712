#pragma once

// Distributed solvers. Every step is written agent by agent: agent i reads its own blocks
// (x_i, z_i, lambda_i, A_i, b_i, Omega_i) plus the z_j / lambda_j of its graph neighbours.

#include "sgnep/metrics.hpp"
#include "sgnep/stochastic.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <string_view>

namespace sgnep {

enum class SolverKind { sprg, spprg, spfb, sfbf, seg };

inline constexpr std::array<SolverKind, 5> kAllSolvers{SolverKind::sprg, SolverKind::spprg,
                                                      SolverKind::spfb, SolverKind::sfbf,
                                                      SolverKind::seg};

inline std::string_view to_string(SolverKind k) {
  switch (k) {
    case SolverKind::sprg: return "SPRG";
    case SolverKind::spprg: return "SpPRG";
    case SolverKind::spfb: return "SpFB";
    case SolverKind::sfbf: return "SFBF";
    case SolverKind::seg: return "SEG";
  }
  return "?";
}

inline SolverKind parse_solver(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  for (SolverKind k : kAllSolvers) {
    std::string s(to_string(k));
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (s == lower) return k;
  }
  throw std::invalid_argument("unknown solver: " + std::string(name));
}

/// Pseudogradient evaluations per iteration.
inline Index oracle_calls_per_step(SolverKind k) {
  return (k == SolverKind::sfbf || k == SolverKind::seg) ? 2 : 1;
}

/// True for the methods preconditioned by Psi (splitting C + D).
inline bool uses_psi(SolverKind k) { return k == SolverKind::spprg || k == SolverKind::spfb; }

/// Counts pseudogradient evaluations. In sampled mode, call at iteration k averages
/// N_k fresh samples per agent.
class PseudogradientOracle {
 public:
  static PseudogradientOracle mean(const GameSpec &game) { return PseudogradientOracle(game); }

  static PseudogradientOracle sampled(const GameSpec &game, const BatchSchedule &schedule,
                                      std::uint64_t seed) {
    schedule.validate();
    PseudogradientOracle o(game);
    o.schedule_ = schedule;
    o.source_.emplace(seed, game.agents());
    return o;
  }

  Vector operator()(const Vector &x, Index k) {
    ++calls_;
    if (!schedule_) {
      last_batch_ = 1;
      last_error_ = 0.0;
      return game_->pseudograd_mean(x);
    }
    last_batch_ = batch_size(*schedule_, k);
    Vector g = game_->pseudograd_sample(x, last_batch_, *source_);
    last_error_ = (g - game_->pseudograd_mean(x)).norm();
    return g;
  }

  Index calls() const { return calls_; }
  Index last_batch_size() const { return last_batch_; }
  /// ||F^SA - F|| at the last evaluation.
  double last_error_norm() const { return last_error_; }
  bool stochastic() const { return schedule_.has_value(); }

 private:
  explicit PseudogradientOracle(const GameSpec &game) : game_(&game) {}

  const GameSpec *game_;
  std::optional<BatchSchedule> schedule_;
  std::optional<SampleSource> source_;
  Index calls_ = 0;
  Index last_batch_ = 0;
  double last_error_ = 0.0;
};

struct IterateState {
  StackedPoint current;
  StackedPoint previous;
  Index k = 0;
  Index oracle_calls = 0;
  Index projection_calls = 0;

  /// The reflection needs omega^{-1}; it is taken equal to omega^0.
  static IterateState start(StackedPoint w0) { return {w0, std::move(w0), 0, 0, 0}; }
};

namespace detail {

/// sum_j w_ij (v_i - v_j) for agent i's dual block.
inline Vector laplacian_row(const ExtendedProblem &p, const Vector &v, Index i) {
  const auto vi = p.dual_block(v, i);
  Vector out = Vector::Zero(p.coupling_rows());
  for (const auto &nb : p.graph().neighbors(i)) out += nb.weight * (vi - p.dual_block(v, nb.node));
  return out;
}

inline const Matrix &coupling_block(const ExtendedProblem &p, Index i) {
  return p.game().coupling().blocks[static_cast<std::size_t>(i)];
}

inline const Vector &share(const ExtendedProblem &p, Index i) {
  return p.game().coupling().shares[static_cast<std::size_t>(i)];
}

/// A(omega) assembled agent by agent from the local data and neighbour blocks.
inline StackedPoint agent_forward_ab(const ExtendedProblem &p, const StackedPoint &w, const Vector &grad) {
  const GameSpec &g = p.game();
  StackedPoint out = p.zero();
  for (Index i = 0; i < p.agents(); ++i) {
    const Matrix &Ai = coupling_block(p, i);
    const Vector lap_lambda = laplacian_row(p, w.lambda, i);
    g.block(out.x, i) = g.block(grad, i) + Ai.transpose() * p.dual_block(w.lambda, i);
    p.dual_block(out.z, i) = lap_lambda;
    p.dual_block(out.lambda, i) =
        lap_lambda + share(p, i) - Ai * g.block(w.x, i) - laplacian_row(p, w.z, i);
  }
  return out;
}

/// Agent-wise backward step of B after a scaled forward move: omega - steps * direction,
/// then x_i onto Omega_i and lambda_i onto the orthant.
inline StackedPoint agent_backward_b(const ExtendedProblem &p, const StackedPoint &w,
                                     const StackedPoint &direction, const StepSizes &s) {
  const GameSpec &g = p.game();
  StackedPoint out = p.zero();
  for (Index i = 0; i < p.agents(); ++i) {
    g.block(out.x, i) = g.local_set(i).project(g.block(w.x, i) - s.alpha(i) * g.block(direction.x, i));
    p.dual_block(out.z, i) = p.dual_block(w.z, i) - s.nu(i) * p.dual_block(direction.z, i);
    p.dual_block(out.lambda, i) =
        (p.dual_block(w.lambda, i) - s.sigma(i) * p.dual_block(direction.lambda, i)).cwiseMax(0.0);
  }
  return out;
}

inline IterateState advance(const IterateState &s, StackedPoint next, Index oracle_calls,
                            Index projections) {
  return {std::move(next), s.current, s.k + 1, s.oracle_calls + oracle_calls,
          s.projection_calls + projections};
}

/// Shared body of SpPRG (reflect = true) and SpFB (reflect = false).
inline IterateState preconditioned_step(const IterateState &s, const ExtendedProblem &p,
                                        const PreconditionerPsi &psi, PseudogradientOracle &oracle,
                                        bool reflect) {
  psi.require_positive_definite();
  const StepSizes &st = psi.steps();
  const GameSpec &g = p.game();
  const StackedPoint &w = s.current;
  const Vector x_ref = reflect ? Vector(2.0 * w.x - s.previous.x) : w.x;
  const Vector lam_ref = reflect ? Vector(2.0 * w.lambda - s.previous.lambda) : w.lambda;

  const Index before = oracle.calls();
  const Vector grad = oracle(x_ref, s.k);

  StackedPoint next = p.zero();
  // Primal and auxiliary updates from the current duals.
  for (Index i = 0; i < p.agents(); ++i) {
    const Matrix &Ai = coupling_block(p, i);
    g.block(next.x, i) = g.local_set(i).project(
        g.block(w.x, i) - st.alpha(i) * (g.block(grad, i) + Ai.transpose() * p.dual_block(w.lambda, i)));
    p.dual_block(next.z, i) = p.dual_block(w.z, i) - st.nu(i) * laplacian_row(p, w.lambda, i);
  }
  // Duals, once neighbours have published x_i^{k+1} and z_j^{k+1}.
  const Vector z_ext = 2.0 * next.z - w.z;
  for (Index i = 0; i < p.agents(); ++i) {
    const Matrix &Ai = coupling_block(p, i);
    const Vector x_ext = 2.0 * g.block(next.x, i) - g.block(w.x, i);
    p.dual_block(next.lambda, i) =
        (p.dual_block(w.lambda, i) +
         st.sigma(i) * (Ai * x_ext - share(p, i) + laplacian_row(p, z_ext, i) - laplacian_row(p, lam_ref, i)))
            .cwiseMax(0.0);
  }
  return advance(s, std::move(next), oracle.calls() - before, 1);
}

}  // namespace detail

/// Projected reflected gradient on the A + B splitting with Phi = diag(alpha, nu, sigma)^{-1}.
inline IterateState sprg_step(const IterateState &s, const ExtendedProblem &p, const StepSizes &st,
                              PseudogradientOracle &oracle) {
  const GameSpec &g = p.game();
  const StackedPoint &w = s.current;
  const StackedPoint ref = 2.0 * w - s.previous;

  const Index before = oracle.calls();
  const Vector grad = oracle(ref.x, s.k);

  StackedPoint next = p.zero();
  for (Index i = 0; i < p.agents(); ++i) {
    const Matrix &Ai = detail::coupling_block(p, i);
    const auto lam_ref_i = p.dual_block(ref.lambda, i);
    const Vector lap_lambda = detail::laplacian_row(p, ref.lambda, i);
    const Vector lap_z = detail::laplacian_row(p, ref.z, i);
    g.block(next.x, i) = g.local_set(i).project(
        g.block(w.x, i) - st.alpha(i) * (g.block(grad, i) + Ai.transpose() * lam_ref_i));
    p.dual_block(next.z, i) = p.dual_block(w.z, i) - st.nu(i) * lap_lambda;
    p.dual_block(next.lambda, i) =
        (p.dual_block(w.lambda, i) +
         st.sigma(i) * (Ai * g.block(ref.x, i) - detail::share(p, i) + lap_z - lap_lambda))
            .cwiseMax(0.0);
  }
  return detail::advance(s, std::move(next), oracle.calls() - before, 1);
}

/// Preconditioned projected reflected gradient on the C + D splitting.
inline IterateState spprg_step(const IterateState &s, const ExtendedProblem &p,
                               const PreconditionerPsi &psi, PseudogradientOracle &oracle) {
  return detail::preconditioned_step(s, p, psi, oracle, true);
}

/// Preconditioned forward-backward on the C + D splitting.
inline IterateState spfb_step(const IterateState &s, const ExtendedProblem &p,
                              const PreconditionerPsi &psi, PseudogradientOracle &oracle) {
  return detail::preconditioned_step(s, p, psi, oracle, false);
}

/// Forward-backward-forward (Tseng) on A + B. The correction is followed by a projection
/// onto dom B so iterates stay in Omega x R x R_{>=0}.
inline IterateState sfbf_step(const IterateState &s, const ExtendedProblem &p, const StepSizes &st,
                              PseudogradientOracle &oracle) {
  const StackedPoint &w = s.current;
  const Index before = oracle.calls();
  const StackedPoint a0 = detail::agent_forward_ab(p, w, oracle(w.x, s.k));
  const StackedPoint half = detail::agent_backward_b(p, w, a0, st);
  const StackedPoint a1 = detail::agent_forward_ab(p, half, oracle(half.x, s.k));
  StackedPoint next = detail::agent_backward_b(p, half, a1 - a0, st);
  return detail::advance(s, std::move(next), oracle.calls() - before, 2);
}

/// Extragradient on A + B.
inline IterateState seg_step(const IterateState &s, const ExtendedProblem &p, const StepSizes &st,
                             PseudogradientOracle &oracle) {
  const StackedPoint &w = s.current;
  const Index before = oracle.calls();
  const StackedPoint a0 = detail::agent_forward_ab(p, w, oracle(w.x, s.k));
  const StackedPoint half = detail::agent_backward_b(p, w, a0, st);
  const StackedPoint a1 = detail::agent_forward_ab(p, half, oracle(half.x, s.k));
  StackedPoint next = detail::agent_backward_b(p, w, a1, st);
  return detail::advance(s, std::move(next), oracle.calls() - before, 2);
}

/// Step sizes and, for the Psi-preconditioned methods, the assembled Psi.
struct SolverSetup {
  SolverKind kind = SolverKind::sprg;
  StepSizes steps;
  std::optional<PreconditionerPsi> psi;

  static SolverSetup make(SolverKind kind, const ExtendedProblem &p, StepSizes steps) {
    SolverSetup s{kind, std::move(steps), std::nullopt};
    if (uses_psi(kind)) {
      s.psi = PreconditionerPsi::assemble(p, s.steps);
      s.psi->require_positive_definite();
    }
    return s;
  }
};

inline IterateState step(const SolverSetup &setup, const IterateState &s, const ExtendedProblem &p,
                         PseudogradientOracle &oracle) {
  switch (setup.kind) {
    case SolverKind::sprg: return sprg_step(s, p, setup.steps, oracle);
    case SolverKind::spprg: return spprg_step(s, p, *setup.psi, oracle);
    case SolverKind::spfb: return spfb_step(s, p, *setup.psi, oracle);
    case SolverKind::sfbf: return sfbf_step(s, p, setup.steps, oracle);
    case SolverKind::seg: return seg_step(s, p, setup.steps, oracle);
  }
  throw std::logic_error("unhandled solver kind");
}

/// Default step sizes per method. SPRG, SpPRG and SpFB take the per-agent upper bounds
/// with tau (default theta/16) and enlarge the margin until the forward operator passes the
/// metric Lipschitz safeguard; SFBF and SEG take one step safety / ||J_A||.
inline StepSizes default_step_sizes(SolverKind kind, const ExtendedProblem &p, const OperatorConstants &c,
                                    std::optional<double> tau, double safety,
                                    std::vector<std::string> *warnings = nullptr) {
  if (kind == SolverKind::sfbf || kind == SolverKind::seg) return lipschitz_uniform_step_sizes(p, c, safety);
  double margin = 0.0;
  if (c.theta > 0.0) {
    margin = tau.value_or(c.theta / 16.0);
    step_sizes_from_bounds(p, margin, safety, c.theta);  // validates tau in (0, theta/8)
  } else {
    if (tau) margin = *tau;
    if (warnings && uses_psi(kind)) {
      warnings->push_back(std::string(to_string(kind)) +
                          ": pseudogradient is not cocoercive (beta = 0); convergence is not guaranteed");
    }
  }
  return metric_safeguarded_step_sizes(p, uses_psi(kind) ? Splitting::cd : Splitting::ab, c, margin, safety);
}

struct SolverConfig {
  SolverKind kind = SolverKind::sprg;
  std::optional<StepSizes> steps;
  std::optional<OperatorConstants> constants;
  std::optional<double> tau;
  double safety = 0.99;
  BatchSchedule schedule;
  bool stochastic = true;
  Index max_iterations = 1000;
  double tolerance = 1e-6;  // +inf disables the residual stopping rule
  std::uint64_t seed = 1;
  double divergence_threshold = 1e12;
  std::optional<StackedPoint> start;

  void validate() const {
    if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (max_iterations < 1) throw std::invalid_argument("max iterations must be >= 1");
    schedule.validate();
  }
};

enum class RunStatus { converged, max_iterations, diverged };

inline std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_iterations: return "max_iter";
    case RunStatus::diverged: return "diverged";
  }
  return "?";
}

struct TraceRecord {
  Index k = 0;
  double residual = 0.0;
  std::optional<double> dist;
  double consensus = 0.0;
  double error_norm = 0.0;
  Index batch_size = 0;
  Index oracle_calls = 0;
  double wall_ms = 0.0;
};

struct RunTrace {
  SolverKind kind = SolverKind::sprg;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::max_iterations;
  StepSizes steps;
  OperatorConstants constants;
  std::vector<TraceRecord> records;
  IterateState final_state;
  Index feasibility_violations = 0;
  std::vector<std::string> warnings;
};

/// Iterates until the residual reaches the tolerance or the iteration cap is hit. A state norm
/// above the divergence threshold stops the run early. One record per iteration.
inline RunTrace run(const SolverConfig &cfg, const ExtendedProblem &p) {
  cfg.validate();
  RunTrace trace;
  trace.kind = cfg.kind;
  trace.seed = cfg.seed;
  trace.constants = cfg.constants.value_or(estimate_constants(p));
  trace.steps = cfg.steps ? *cfg.steps
                          : default_step_sizes(cfg.kind, p, trace.constants, cfg.tau, cfg.safety, &trace.warnings);
  const SolverSetup setup = SolverSetup::make(cfg.kind, p, trace.steps);
  auto oracle = cfg.stochastic ? PseudogradientOracle::sampled(p.game(), cfg.schedule, cfg.seed)
                               : PseudogradientOracle::mean(p.game());
  StackedPoint w0 = cfg.start.value_or(p.default_start());
  p.check(w0);
  IterateState state = IterateState::start(std::move(w0));

  const bool stop_on_residual = std::isfinite(cfg.tolerance);
  const auto t0 = std::chrono::steady_clock::now();
  trace.records.reserve(static_cast<std::size_t>(std::min<Index>(cfg.max_iterations, 100000)));
  for (Index it = 0; it < cfg.max_iterations; ++it) {
    state = step(setup, state, p, oracle);
    const StackedPoint &w = state.current;

    TraceRecord rec;
    rec.k = state.k;
    rec.batch_size = oracle.last_batch_size();
    rec.oracle_calls = state.oracle_calls;
    rec.error_norm = oracle.last_error_norm();
    if (!p.game().in_local_sets(w.x, 0.0) || (w.lambda.array() < 0.0).any()) ++trace.feasibility_violations;

    const bool diverged = !w.all_finite() || w.norm() > cfg.divergence_threshold;
    if (diverged) {
      rec.residual = std::numeric_limits<double>::quiet_NaN();
      rec.consensus = std::numeric_limits<double>::quiet_NaN();
    } else {
      rec.residual = residual(p.game(), w.x);
      rec.dist = dist_to_solution(p.game(), w.x);
      rec.consensus = dual_consensus(p.agents(), w.lambda);
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    trace.records.push_back(rec);

    if (diverged) {
      trace.status = RunStatus::diverged;
      break;
    }
    if (stop_on_residual && rec.residual <= cfg.tolerance) {
      trace.status = RunStatus::converged;
      break;
    }
  }
  trace.final_state = std::move(state);
  return trace;
}

}  // namespace sgnep
