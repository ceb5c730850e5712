#pragma once

// Extended monotone-inclusion layer over omega = col(x, z, lambda):
//
//   A(omega) = col(F(x), 0, L lambda + b) + S omega,   B = N_Omega x {0} x N_{>=0}
//   C(omega) = col(F(x), 0, b + L lambda),              D = B + S
//
// with the skew block S = [[0, 0, A'], [0, 0, L], [-A, -L, 0]], A = blkdiag(A_i),
// L = Laplacian kron I_m, b = col(b_i).

#include "sgnep/game.hpp"
#include "sgnep/graph.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <random>

namespace sgnep {

class ExtendedProblem {
 public:
  ExtendedProblem(GameSpec game, DualGraph graph) : game_(std::move(game)), graph_(std::move(graph)) {
    if (graph_.nodes() != game_.agents()) {
      throw DimensionError("dual graph must have one node per agent");
    }
    const Index N = game_.agents();
    const Index m = game_.coupling_rows();
    A_ = Matrix::Zero(N * m, game_.dim());
    b_ = Vector::Zero(N * m);
    for (Index i = 0; i < N; ++i) {
      const auto s = static_cast<std::size_t>(i);
      A_.block(i * m, game_.offset(i), m, game_.dim(i)) = game_.coupling().blocks[s];
      b_.segment(i * m, m) = game_.coupling().shares[s];
    }
    L_ = laplacian_expand(graph_.laplacian(), m);
  }

  const GameSpec &game() const { return game_; }
  const DualGraph &graph() const { return graph_; }

  Index agents() const { return game_.agents(); }
  Index primal_dim() const { return game_.dim(); }
  Index coupling_rows() const { return game_.coupling_rows(); }
  Index dual_dim() const { return game_.agents() * game_.coupling_rows(); }
  Index total_dim() const { return primal_dim() + 2 * dual_dim(); }

  /// blkdiag(A_1, ..., A_N), (N m) x n.
  const Matrix &stacked_coupling() const { return A_; }
  /// L kron I_m.
  const Matrix &expanded_laplacian() const { return L_; }
  /// col(b_1, ..., b_N).
  const Vector &stacked_shares() const { return b_; }

  auto dual_block(Vector &v, Index i) const { return v.segment(i * coupling_rows(), coupling_rows()); }
  auto dual_block(const Vector &v, Index i) const {
    return v.segment(i * coupling_rows(), coupling_rows());
  }

  Matrix skew() const {
    const Index n = primal_dim(), d = dual_dim();
    Matrix S = Matrix::Zero(total_dim(), total_dim());
    S.block(0, n + d, n, d) = A_.transpose();
    S.block(n, n + d, d, d) = L_;
    S.block(n + d, 0, d, n) = -A_;
    S.block(n + d, n, d, d) = -L_;
    return S;
  }

  StackedPoint zero() const {
    return {Vector::Zero(primal_dim()), Vector::Zero(dual_dim()), Vector::Zero(dual_dim())};
  }

  /// x at the box midpoints, z = 0, lambda = 0.
  StackedPoint default_start() const {
    StackedPoint w = zero();
    w.x = game_.midpoint();
    return w;
  }

  void check(const StackedPoint &w) const {
    require_size(w.x.size(), primal_dim(), "stacked x");
    require_size(w.z.size(), dual_dim(), "stacked z");
    require_size(w.lambda.size(), dual_dim(), "stacked lambda");
  }

  StackedPoint unflatten(const Vector &v) const {
    return StackedPoint::unflatten(v, primal_dim(), dual_dim());
  }

 private:
  GameSpec game_;
  DualGraph graph_;
  Matrix A_;
  Matrix L_;
  Vector b_;
};

// ---------------------------------------------------------------------------
// Forward operators

/// A(omega) with the pseudogradient value supplied (mean or sampled).
inline StackedPoint forward_ab(const ExtendedProblem &p, const StackedPoint &w, const Vector &grad) {
  p.check(w);
  require_size(grad.size(), p.primal_dim(), "forward_ab pseudogradient");
  const Matrix &A = p.stacked_coupling();
  const Matrix &L = p.expanded_laplacian();
  const Vector Llam = L * w.lambda;
  return {grad + A.transpose() * w.lambda, Llam, Llam + p.stacked_shares() - A * w.x - L * w.z};
}

inline StackedPoint forward_ab(const ExtendedProblem &p, const StackedPoint &w) {
  return forward_ab(p, w, p.game().pseudograd_mean(w.x));
}

/// C(omega) with the pseudogradient value supplied.
inline StackedPoint forward_cd(const ExtendedProblem &p, const StackedPoint &w, const Vector &grad) {
  p.check(w);
  require_size(grad.size(), p.primal_dim(), "forward_cd pseudogradient");
  return {grad, Vector::Zero(p.dual_dim()),
          p.stacked_shares() + p.expanded_laplacian() * w.lambda};
}

inline StackedPoint forward_cd(const ExtendedProblem &p, const StackedPoint &w) {
  return forward_cd(p, w, p.game().pseudograd_mean(w.x));
}

// ---------------------------------------------------------------------------
// Step sizes and preconditioners

/// Per-agent step sizes alpha_i (primal), nu_i (auxiliary), sigma_i (dual).
struct StepSizes {
  Vector alpha;
  Vector nu;
  Vector sigma;
  double tau = 0.0;  // margin used in the denominators, when built from the bounds

  static StepSizes uniform(Index agents, double step) {
    return {Vector::Constant(agents, step), Vector::Constant(agents, step),
            Vector::Constant(agents, step), 0.0};
  }

  /// col(alpha, nu, sigma) expanded to the stacked layout (the diagonal of Phi^{-1}).
  Vector expanded(const ExtendedProblem &p) const {
    require_size(alpha.size(), p.agents(), "alpha");
    require_size(nu.size(), p.agents(), "nu");
    require_size(sigma.size(), p.agents(), "sigma");
    const Index n = p.primal_dim(), d = p.dual_dim(), m = p.coupling_rows();
    Vector out(p.total_dim());
    for (Index i = 0; i < p.agents(); ++i) {
      out.segment(p.game().offset(i), p.game().dim(i)).setConstant(alpha(i));
      out.segment(n + i * m, m).setConstant(nu(i));
      out.segment(n + d + i * m, m).setConstant(sigma(i));
    }
    return out;
  }
};

/// Phi = diag(alpha^{-1}, nu^{-1}, sigma^{-1}).
struct PreconditionerPhi {
  Vector steps;  // diagonal of Phi^{-1}

  static PreconditionerPhi from(const ExtendedProblem &p, const StepSizes &s) {
    PreconditionerPhi phi{s.expanded(p)};
    if ((phi.steps.array() < 0.0).any()) throw std::invalid_argument("Phi needs nonnegative steps");
    return phi;
  }

  Vector apply_inverse(const Vector &v) const { return steps.cwiseProduct(v); }
};

struct PdCheck {
  bool positive_definite = false;
  double min_eig = 0.0;
};

inline PdCheck psi_pd_check(const Matrix &psi) {
  if (psi.size() == 0) return {true, std::numeric_limits<double>::infinity()};
  if (!psi.allFinite()) return {false, -std::numeric_limits<double>::infinity()};
  Eigen::SelfAdjointEigenSolver<Matrix> es(psi, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  return {lo > 0.0, lo};
}

/// Psi = [[alpha^{-1}, 0, -A'], [0, nu^{-1}, -L], [-A, -L, sigma^{-1}]].
class PreconditionerPsi {
 public:
  static PreconditionerPsi assemble(const ExtendedProblem &p, const StepSizes &s) {
    PreconditionerPsi psi;
    psi.steps_ = s;
    psi.diag_ = s.expanded(p);
    const Index n = p.primal_dim(), d = p.dual_dim();
    Matrix M = Matrix::Zero(p.total_dim(), p.total_dim());
    M.diagonal() = psi.diag_.cwiseInverse();
    M.block(0, n + d, n, d) = -p.stacked_coupling().transpose();
    M.block(n + d, 0, d, n) = -p.stacked_coupling();
    M.block(n, n + d, d, d) = -p.expanded_laplacian();
    M.block(n + d, n, d, d) = -p.expanded_laplacian();
    psi.matrix_ = std::move(M);
    psi.check_ = psi_pd_check(psi.matrix_);
    return psi;
  }

  const Matrix &matrix() const { return matrix_; }
  const StepSizes &steps() const { return steps_; }
  /// col(alpha, nu, sigma) in the stacked layout.
  const Vector &step_diagonal() const { return diag_; }
  const PdCheck &pd() const { return check_; }

  void require_positive_definite() const {
    if (!check_.positive_definite) {
      throw std::domain_error("preconditioner Psi is not positive definite (min eigenvalue " +
                              std::to_string(check_.min_eig) + ")");
    }
  }

 private:
  Matrix matrix_;
  StepSizes steps_;
  Vector diag_;
  PdCheck check_;
};

inline PdCheck psi_pd_check(const PreconditionerPsi &psi) { return psi.pd(); }

// ---------------------------------------------------------------------------
// Resolvents

/// (Id + Phi^{-1} B)^{-1}: with Phi diagonal the normal cones decouple into projections.
inline StackedPoint resolvent_b(const ExtendedProblem &p, const StackedPoint &w,
                                const PreconditionerPhi &phi) {
  p.check(w);
  require_size(phi.steps.size(), p.total_dim(), "Phi");
  return {p.game().project_local(w.x), w.z, w.lambda.cwiseMax(0.0)};
}

/// (Id + Psi^{-1} D)^{-1}(v): the unique omega+ with Psi (v - omega+) in D(omega+).
/// The lower block structure of Psi gives a sequential x -> z -> lambda solve:
///   x+ = proj_Omega(x_v - alpha A' lambda_v)
///   z+ = z_v - nu L lambda_v
///   lambda+ = proj_{>=0}(lambda_v + sigma (A (2 x+ - x_v) + L (2 z+ - z_v)))
inline StackedPoint resolvent_d(const ExtendedProblem &p, const StackedPoint &v,
                                const PreconditionerPsi &psi) {
  p.check(v);
  psi.require_positive_definite();
  const Index n = p.primal_dim(), d = p.dual_dim();
  const Vector &steps = psi.step_diagonal();
  const Matrix &A = p.stacked_coupling();
  const Matrix &L = p.expanded_laplacian();
  StackedPoint out;
  out.x = p.game().project_local(v.x - steps.head(n).cwiseProduct(A.transpose() * v.lambda));
  out.z = v.z - steps.segment(n, d).cwiseProduct(L * v.lambda);
  out.lambda = (v.lambda + steps.tail(d).cwiseProduct(A * (2.0 * out.x - v.x) +
                                                      L * (2.0 * out.z - v.z)))
                   .cwiseMax(0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Operator constants and step-size rules

struct OperatorConstants {
  double theta = 0.0;      // cocoercivity bound for C: min{1/(2 d*), beta}
  double beta = 0.0;       // cocoercivity of F (0: not cocoercive or unknown)
  double lipschitz = 0.0;  // Lipschitz estimate of F
};

/// Lipschitz constant from sampled pairs in the local sets (exact spectral norm for
/// affine maps); beta = lambda_min(M_sym) / ||M||^2 for affine F with M_sym PSD.
inline OperatorConstants estimate_constants(const ExtendedProblem &p, Index samples = 200,
                                            std::uint64_t seed = 7) {
  const GameSpec &g = p.game();
  OperatorConstants c;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&] {
    Vector x(g.dim());
    for (Index i = 0; i < g.agents(); ++i) {
      const BoxSet &box = g.local_set(i);
      for (Index k = 0; k < box.dim(); ++k) {
        const double lo = box.lower()(k), hi = box.upper()(k);
        x(g.offset(i) + k) = std::isfinite(lo) && std::isfinite(hi)
                                 ? lo + (hi - lo) * unit(rng)
                                 : box.midpoint()(k) + normal(rng);
      }
    }
    return x;
  };
  for (Index s = 0; s < samples; ++s) {
    const Vector x = draw(), y = draw();
    const double dx = (x - y).norm();
    if (dx > 0.0) {
      c.lipschitz = std::max(c.lipschitz, (g.pseudograd_mean(x) - g.pseudograd_mean(y)).norm() / dx);
    }
  }
  if (g.affine_mean()) {
    const Matrix &M = g.affine_mean()->M;
    Eigen::JacobiSVD<Matrix> svd(M);
    const double norm = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    c.lipschitz = std::max(c.lipschitz, norm);
    const Matrix S = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()(0);
    c.beta = (norm > 0.0 && lo > 1e-12 * norm) ? lo / (norm * norm) : 0.0;
  }
  const double dstar = p.graph().max_degree();
  c.theta = dstar > 0.0 ? std::min(1.0 / (2.0 * dstar), c.beta) : c.beta;
  return c;
}

/// The per-agent upper bounds with margin tau in every denominator, scaled by safety:
///   alpha_i = s / (max_j sum_k |[A_i']_{jk}| + tau)
///   nu_i    = s / (2 d_i + tau)
///   sigma_i = s / (max_j sum_k |[A_i]_{jk}| + 2 d_i + tau)
inline StepSizes assumption_bounds(const ExtendedProblem &p, double tau, double safety) {
  const GameSpec &g = p.game();
  StepSizes s;
  s.tau = tau;
  s.alpha.resize(g.agents());
  s.nu.resize(g.agents());
  s.sigma.resize(g.agents());
  for (Index i = 0; i < g.agents(); ++i) {
    const Matrix &Ai = g.coupling().blocks[static_cast<std::size_t>(i)];
    const double col = Ai.size() ? Ai.cwiseAbs().colwise().sum().maxCoeff() : 0.0;
    const double row = Ai.size() ? Ai.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
    const double di = p.graph().degree(i);
    s.alpha(i) = safety / (col + tau);
    s.nu(i) = safety / (2.0 * di + tau);
    s.sigma(i) = safety / (row + 2.0 * di + tau);
  }
  return s;
}

/// Step sizes at the upper bounds, for tau in (0, theta/8) and safety in (0, 1].
inline StepSizes step_sizes_from_bounds(const ExtendedProblem &p, double tau, double safety,
                                        double theta) {
  if (!(tau > 0.0) || !(tau < theta / 8.0)) {
    throw std::invalid_argument("tau must lie in (0, theta/8)");
  }
  if (!(safety > 0.0) || safety > 1.0) throw std::invalid_argument("safety must lie in (0, 1]");
  return assumption_bounds(p, tau, safety);
}

enum class Splitting { ab, cd };

/// Jacobian of A (splitting ab) or C (splitting cd); F enters through its affine part,
/// or as lipschitz * I when F is not affine.
inline Matrix forward_jacobian(const ExtendedProblem &p, Splitting split, const OperatorConstants &c) {
  const Index n = p.primal_dim(), d = p.dual_dim();
  Matrix J = Matrix::Zero(p.total_dim(), p.total_dim());
  if (p.game().affine_mean()) {
    J.topLeftCorner(n, n) = p.game().affine_mean()->M;
  } else {
    J.topLeftCorner(n, n).diagonal().setConstant(c.lipschitz);
  }
  J.bottomRightCorner(d, d) = p.expanded_laplacian();
  if (split == Splitting::ab) J += p.skew();
  return J;
}

namespace detail {

inline double spectral_norm(const Matrix &B) {
  if (B.size() == 0) return 0.0;
  if (!B.allFinite()) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(B.transpose() * B, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues()(es.eigenvalues().size() - 1)));
}

}  // namespace detail

/// Lipschitz constant of P^{-1} J in the P-norm, ||P^{-1/2} J P^{-1/2}||, with P = Phi for
/// splitting ab and P = Psi for cd. Infinite when P is not positive definite.
inline double metric_lipschitz(const ExtendedProblem &p, const StepSizes &s, Splitting split,
                               const OperatorConstants &c) {
  const Matrix J = forward_jacobian(p, split, c);
  const Vector steps = s.expanded(p);
  if (!steps.allFinite() || (steps.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
  if (split == Splitting::ab) {
    const Vector r = steps.cwiseSqrt();
    return detail::spectral_norm(r.asDiagonal() * J * r.asDiagonal());
  }
  const PreconditionerPsi psi = PreconditionerPsi::assemble(p, s);
  Eigen::LLT<Matrix> llt(psi.matrix());
  if (llt.info() != Eigen::Success || !psi.pd().positive_definite) {
    return std::numeric_limits<double>::infinity();
  }
  const Matrix X = llt.matrixL().solve(J);                                 // L^{-1} J
  const Matrix B = llt.matrixL().solve(X.transpose()).transpose();        // L^{-1} J L^{-T}
  return detail::spectral_norm(B);
}

/// Threshold on the metric Lipschitz constant under which the reflected iteration is stable.
inline double reflected_lipschitz_target(double safety) { return safety * (std::sqrt(2.0) - 1.0); }

/// Per-agent step bounds with the smallest margin >= tau for which the forward operator of the
/// given splitting is Lipschitz below safety * (sqrt(2) - 1) in the preconditioner metric.
/// The result still satisfies the bounds for the requested tau, since a larger margin only
/// shrinks the steps.
inline StepSizes metric_safeguarded_step_sizes(const ExtendedProblem &p, Splitting split,
                                               const OperatorConstants &c, double tau,
                                               double safety) {
  if (!(tau >= 0.0)) throw std::invalid_argument("margin must be nonnegative");
  if (!(safety > 0.0) || safety > 1.0) throw std::invalid_argument("safety must lie in (0, 1]");
  const double target = reflected_lipschitz_target(safety);
  auto ok = [&](double margin) {
    return metric_lipschitz(p, assumption_bounds(p, margin, safety), split, c) <= target;
  };
  if (tau > 0.0 && ok(tau)) return assumption_bounds(p, tau, safety);
  double hi = std::max(tau, 1e-3);
  for (int it = 0; !ok(hi); ++it) {
    if (it > 200) throw std::runtime_error("no step-size margin satisfies the Lipschitz safeguard");
    hi *= 2.0;
  }
  double lo = tau > 0.0 ? tau : hi * 1e-12;
  if (ok(lo)) return assumption_bounds(p, lo, safety);
  // Bisection in log scale to 0.1% relative accuracy; hi is always admissible.
  while (hi / lo > 1.001) {
    const double mid = std::sqrt(lo * hi);
    (ok(mid) ? hi : lo) = mid;
  }
  return assumption_bounds(p, hi, safety);
}

/// One step gamma = safety / ||J_A|| for every block (the Euclidean metric).
inline StepSizes lipschitz_uniform_step_sizes(const ExtendedProblem &p, const OperatorConstants &c,
                                              double safety) {
  const double ell = detail::spectral_norm(forward_jacobian(p, Splitting::ab, c));
  return StepSizes::uniform(p.agents(), ell > 0.0 ? safety / ell : safety);
}

}  // namespace sgnep
