#pragma once

// Fixtures and independent reference implementations shared by the unit tests and the
// acceptance binary. The references work on dense stacked matrices and never call the
// per-agent step code.

#include "sgnep/algorithms.hpp"
#include "sgnep/games.hpp"

#include <random>

namespace sgnep::testing {

inline ExtendedProblem bilinear_problem(BilinearVariant v = BilinearVariant::unconstrained_monotone,
                                        double sigma = 0.0) {
  return {build_bilinear_game({v, 1.0, sigma}), build_path(2)};
}

inline StackedPoint bilinear_start(const ExtendedProblem &p, double x1 = 1.0, double x2 = 1.0) {
  StackedPoint w = p.zero();
  w.x << x1, x2;
  return w;
}

/// Random connected graph: a random spanning tree plus extra random edges.
inline DualGraph random_graph(Index n, std::mt19937_64 &rng) {
  if (n == 1) return DualGraph::from_edges(1, std::vector<Edge>{});
  std::uniform_real_distribution<double> w(0.5, 1.5);
  std::vector<Edge> edges;
  std::set<std::pair<Index, Index>> seen;
  for (Index i = 1; i < n; ++i) {
    const Index j = static_cast<Index>(rng() % static_cast<std::uint64_t>(i));
    edges.push_back({j, i, w(rng)});
    seen.insert({j, i});
  }
  for (Index a = 0; a < n; ++a) {
    for (Index b = a + 1; b < n; ++b) {
      if (!seen.count({a, b}) && rng() % 3 == 0) edges.push_back({a, b, w(rng)});
    }
  }
  return DualGraph::from_edges(n, edges);
}

/// Random small instance: N <= 5 agents, n_i <= 2, m <= 3 coupling rows.
inline ExtendedProblem random_small_problem(std::uint64_t seed, double noise = 0.0) {
  std::mt19937_64 rng(seed);
  RandomAffineParams params;
  params.agents = 1 + static_cast<Index>(rng() % 5);
  params.max_dim = 2;
  params.coupling_rows = 1 + static_cast<Index>(rng() % 3);
  params.noise_sigma = noise;
  params.seed = rng();
  GameSpec game = build_random_affine_game(params);
  DualGraph graph = random_graph(params.agents, rng);
  return {std::move(game), std::move(graph)};
}

/// Random state with lambda >= 0 and x anywhere (steps must cope with infeasible inputs).
inline StackedPoint random_state(const ExtendedProblem &p, std::mt19937_64 &rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  StackedPoint w = p.zero();
  for (Index i = 0; i < w.x.size(); ++i) w.x(i) = n01(rng);
  for (Index i = 0; i < w.z.size(); ++i) w.z(i) = n01(rng);
  for (Index i = 0; i < w.lambda.size(); ++i) w.lambda(i) = std::abs(n01(rng));
  return w;
}

inline StepSizes random_steps(const ExtendedProblem &p, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(0.05, 0.5);
  StepSizes s;
  s.alpha.resize(p.agents());
  s.nu.resize(p.agents());
  s.sigma.resize(p.agents());
  for (Index i = 0; i < p.agents(); ++i) {
    s.alpha(i) = u(rng);
    s.nu(i) = u(rng);
    s.sigma(i) = u(rng);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Dense compact-form references

inline Vector dense_apply_inverse(const Matrix &P, const Vector &v) { return P.llt().solve(v); }

/// omega+ = J_B(omega - Phi^{-1} A(2 omega - omega_prev)).
inline StackedPoint compact_sprg(const ExtendedProblem &p, const StepSizes &s, const StackedPoint &cur,
                                 const StackedPoint &prev) {
  const StackedPoint ref = 2.0 * cur - prev;
  const Vector d = s.expanded(p);
  const Vector v = cur.flatten() - d.cwiseProduct(forward_ab(p, ref).flatten());
  return resolvent_b(p, p.unflatten(v), PreconditionerPhi{d});
}

/// omega+ = J_{Psi^{-1} D}(omega - Psi^{-1} C(omega_ref)), omega_ref reflected or not.
inline StackedPoint compact_preconditioned(const ExtendedProblem &p, const PreconditionerPsi &psi,
                                           const StackedPoint &cur, const StackedPoint &prev, bool reflect) {
  const StackedPoint ref = reflect ? 2.0 * cur - prev : cur;
  const Vector v = cur.flatten() - dense_apply_inverse(psi.matrix(), forward_cd(p, ref).flatten());
  return resolvent_d(p, p.unflatten(v), psi);
}

inline StackedPoint compact_seg(const ExtendedProblem &p, const StepSizes &s, const StackedPoint &cur) {
  const Vector d = s.expanded(p);
  const PreconditionerPhi phi{d};
  const StackedPoint half =
      resolvent_b(p, p.unflatten(cur.flatten() - d.cwiseProduct(forward_ab(p, cur).flatten())), phi);
  return resolvent_b(p, p.unflatten(cur.flatten() - d.cwiseProduct(forward_ab(p, half).flatten())), phi);
}

inline StackedPoint compact_sfbf(const ExtendedProblem &p, const StepSizes &s, const StackedPoint &cur) {
  const Vector d = s.expanded(p);
  const PreconditionerPhi phi{d};
  const Vector a0 = forward_ab(p, cur).flatten();
  const StackedPoint half = resolvent_b(p, p.unflatten(cur.flatten() - d.cwiseProduct(a0)), phi);
  const Vector a1 = forward_ab(p, half).flatten();
  return resolvent_b(p, p.unflatten(half.flatten() - d.cwiseProduct(a1 - a0)), phi);
}

/// Membership of r in N_Omega(x) x {0} x N_{>=0}(lambda) within tol.
inline bool in_normal_cone_b(const ExtendedProblem &p, const StackedPoint &w, const StackedPoint &r, double tol) {
  const GameSpec &g = p.game();
  for (Index i = 0; i < g.agents(); ++i) {
    const BoxSet &box = g.local_set(i);
    for (Index k = 0; k < box.dim(); ++k) {
      const double x = w.x(g.offset(i) + k), v = r.x(g.offset(i) + k);
      const bool at_lo = std::abs(x - box.lower()(k)) <= tol;
      const bool at_hi = std::abs(x - box.upper()(k)) <= tol;
      if (at_lo && at_hi) continue;
      if (at_lo ? v > tol : at_hi ? v < -tol : std::abs(v) > tol) return false;
    }
  }
  if (r.z.size() && r.z.cwiseAbs().maxCoeff() > tol) return false;
  for (Index j = 0; j < w.lambda.size(); ++j) {
    const double v = r.lambda(j);
    if (w.lambda(j) > tol ? std::abs(v) > tol : v > tol) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Planted equilibrium

/// Affine game built around a chosen point: x* strictly inside the boxes, a shared
/// multiplier lambda* >= 0 with at least one zero entry when m > 1, and q, b, z* chosen so
/// that col(x*, z*, 1 (x) lambda*) is a zero of A + B.
struct Planted {
  ExtendedProblem problem;
  StackedPoint solution;
};

inline Planted planted_equilibrium(std::uint64_t seed, Index agents = 4, Index rows = 2) {
  std::mt19937_64 rng(seed);
  RandomAffineParams params;
  params.agents = agents;
  params.coupling_rows = rows;
  params.seed = rng();
  AffineGameData d = random_affine_data(params);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Index n = d.M.rows();

  Vector xs(n);
  Index off = 0;
  for (const auto &box : d.local_sets) {
    for (Index k = 0; k < box.dim(); ++k) {
      const double lo = box.lower()(k), hi = box.upper()(k);
      xs(off + k) = lo + (0.2 + 0.6 * u(rng)) * (hi - lo);
    }
    off += box.dim();
  }
  Matrix A(rows, n);
  off = 0;
  for (const auto &blk : d.blocks) {
    A.middleCols(off, blk.cols()) = blk;
    off += blk.cols();
  }
  Vector lam(rows);
  for (Index j = 0; j < rows; ++j) lam(j) = (j == rows - 1 && rows > 1) ? 0.0 : 0.5 + u(rng);
  const Vector Ax = A * xs;
  d.b.resize(rows);
  for (Index j = 0; j < rows; ++j) d.b(j) = lam(j) > 0.0 ? Ax(j) : Ax(j) + 0.5;
  d.q = -d.M * xs - A.transpose() * lam;
  d.known_solution = xs;

  std::mt19937_64 grng(rng());
  ExtendedProblem p(build_affine_game(d), random_graph(agents, grng));
  StackedPoint w = p.zero();
  w.x = xs;
  for (Index i = 0; i < agents; ++i) p.dual_block(w.lambda, i) = lam;
  // L z = b - A x + 1 (x) (A x - b) / N has a sum-zero right side, so it is solvable, and
  // leaves A_i x_i - b_i + (L z)_i = (A x - b) / N: zero on active rows, negative elsewhere.
  const Vector slack_avg = (Ax - d.b) / static_cast<double>(agents);
  Vector rhs = p.stacked_shares() - p.stacked_coupling() * xs;
  for (Index i = 0; i < agents; ++i) p.dual_block(rhs, i) += slack_avg;
  w.z = p.expanded_laplacian().completeOrthogonalDecomposition().solve(rhs);
  return {std::move(p), std::move(w)};
}

/// Distance of the stacked point from zer(A + B): A(w) must lie in -B(w).
inline bool is_zero_of_ab(const ExtendedProblem &p, const StackedPoint &w, double tol) {
  const StackedPoint a = forward_ab(p, w);
  return in_normal_cone_b(p, w, -1.0 * a, tol);
}

}  // namespace sgnep::testing
