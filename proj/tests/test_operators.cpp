#include "support.hpp"

#include <gtest/gtest.h>

using namespace sgnep;
using namespace sgnep::testing;

namespace {

/// Identity pseudogradient on R^n split into agents of the given dims, no coupling.
ExtendedProblem identity_problem(Index agents) {
  AffineGameData d;
  for (Index i = 0; i < agents; ++i) d.local_sets.push_back(BoxSet::unbounded(1));
  d.M = Matrix::Identity(agents, agents);
  d.q = Vector::Zero(agents);
  d.noise_sigma = Vector::Zero(agents);
  return {build_affine_game(d), build_path(agents)};
}

/// Three agents on a triangle; agent 0 holds two variables with A_0 = [1 1].
ExtendedProblem hand_problem() {
  AffineGameData d;
  d.local_sets = {BoxSet(Vector::Zero(2), Vector::Ones(2)), BoxSet(Vector::Zero(1), Vector::Ones(1)),
                  BoxSet(Vector::Zero(1), Vector::Ones(1))};
  d.blocks = {Matrix::Ones(1, 2), Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
  d.b = Vector::Constant(1, 3.0);
  d.M = Matrix::Identity(4, 4);
  d.q = Vector::Zero(4);
  d.noise_sigma = Vector::Zero(3);
  return {build_affine_game(d), build_cycle_plus(3, {})};
}

double p_inner(const Matrix &P, const Vector &a, const Vector &b) { return a.dot(P * b); }

}  // namespace

TEST(Forward, ZeroStateZeroDataIsZero) {
  const ExtendedProblem p = bilinear_problem();
  EXPECT_TRUE(forward_ab(p, p.zero()).flatten().isZero(0.0));
  EXPECT_TRUE(forward_cd(p, p.zero()).flatten().isZero(0.0));
}

TEST(Forward, ConsensusDualsGiveZeroLaplacianTerms) {
  const ExtendedProblem p = random_small_problem(4);
  StackedPoint w = p.zero();
  for (Index i = 0; i < p.agents(); ++i) p.dual_block(w.lambda, i).setConstant(0.7);
  const StackedPoint c = forward_cd(p, w, Vector::Zero(p.primal_dim()));
  EXPECT_TRUE((c.lambda - p.stacked_shares()).isZero(1e-12));
  EXPECT_TRUE(c.x.isZero(0.0));
}

TEST(Forward, SkewDecompositionAndDifference) {
  std::mt19937_64 rng(1);
  for (std::uint64_t s = 0; s < 30; ++s) {
    const ExtendedProblem p = random_small_problem(s);
    const StackedPoint w = random_state(p, rng);
    const Matrix S = p.skew();
    const Vector v = w.flatten();
    EXPECT_NEAR(v.dot(S * v), 0.0, 1e-10);
    EXPECT_TRUE((S + S.transpose()).isZero(0.0));

    const Vector a = forward_ab(p, w).flatten();
    const Vector c = forward_cd(p, w).flatten();
    EXPECT_TRUE((a - c - S * v).isZero(1e-12));

    Vector structured = Vector::Zero(p.total_dim());
    structured.head(p.primal_dim()) = p.game().pseudograd_mean(w.x);
    structured.tail(p.dual_dim()) = p.expanded_laplacian() * w.lambda + p.stacked_shares();
    EXPECT_TRUE((a - structured - S * v).isZero(1e-12));
  }
}

TEST(Forward, SampledAtMeanBatchEqualsMeanMode) {
  const ExtendedProblem p = random_small_problem(7, 0.3);
  std::mt19937_64 rng(2);
  const StackedPoint w = random_state(p, rng);
  std::vector<Matrix> batch;
  for (Index i = 0; i < p.agents(); ++i) batch.push_back(p.game().noise(i).mean);
  const Vector g = p.game().pseudograd_sample(w.x, batch);
  EXPECT_TRUE((forward_ab(p, w, g).flatten() - forward_ab(p, w).flatten()).isZero(1e-14));
  EXPECT_TRUE((forward_cd(p, w, g).flatten() - forward_cd(p, w).flatten()).isZero(1e-14));
  EXPECT_THROW(forward_ab(p, w, Vector::Zero(p.primal_dim() + 1)), DimensionError);
}

TEST(ResolventB, ProjectsOntoDomain) {
  const ExtendedProblem p = hand_problem();
  const PreconditionerPhi phi = PreconditionerPhi::from(p, StepSizes::uniform(3, 0.1));
  StackedPoint inside = p.zero();
  inside.x.setConstant(0.5);
  inside.lambda.setConstant(0.2);
  inside.z.setConstant(-3.0);
  const StackedPoint same = resolvent_b(p, inside, phi);
  EXPECT_EQ(same.flatten(), inside.flatten());

  StackedPoint out = inside;
  out.x(0) = 2.0;
  out.x(1) = -1.0;
  out.lambda(1) = -0.4;
  const StackedPoint r = resolvent_b(p, out, phi);
  EXPECT_DOUBLE_EQ(r.x(0), 1.0);
  EXPECT_DOUBLE_EQ(r.x(1), 0.0);
  EXPECT_DOUBLE_EQ(r.lambda(1), 0.0);
  EXPECT_EQ(resolvent_b(p, r, phi).flatten(), r.flatten());
}

TEST(ResolventD, SatisfiesInclusion) {
  std::mt19937_64 rng(3);
  for (std::uint64_t s = 0; s < 100; ++s) {
    const ExtendedProblem p = random_small_problem(s);
    const OperatorConstants c = estimate_constants(p);
    const PreconditionerPsi psi = PreconditionerPsi::assemble(p, assumption_bounds(p, std::max(c.theta / 16, 1e-3), 0.99));
    ASSERT_TRUE(psi.pd().positive_definite);
    const StackedPoint v = random_state(p, rng);
    const StackedPoint w = resolvent_d(p, v, psi);
    // Psi (v - w) - S w must be a normal vector of dom B at w.
    const Vector r = psi.matrix() * (v.flatten() - w.flatten()) - p.skew() * w.flatten();
    EXPECT_TRUE(in_normal_cone_b(p, w, p.unflatten(r), 1e-9)) << "seed " << s;
  }
}

TEST(ResolventD, MatchesProjectedFixedPointSolve) {
  // N = 2, n_i = 1, m = 1.
  AffineGameData d;
  d.local_sets = {BoxSet(Vector::Zero(1), Vector::Ones(1)), BoxSet(Vector::Zero(1), Vector::Ones(1))};
  d.blocks = {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 2.0)};
  d.b = Vector::Constant(1, 1.0);
  d.M = Matrix::Identity(2, 2);
  d.q = Vector::Zero(2);
  d.noise_sigma = Vector::Zero(2);
  const ExtendedProblem p(build_affine_game(d), build_path(2));
  const PreconditionerPsi psi = PreconditionerPsi::assemble(p, assumption_bounds(p, 0.05, 0.99));
  ASSERT_TRUE(psi.pd().positive_definite);
  const Matrix &P = psi.matrix();
  const Matrix S = p.skew();
  const PreconditionerPhi identity{Vector::Ones(p.total_dim())};

  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const StackedPoint v = 2.0 * random_state(p, rng);
    // w = P_dom(w - gamma (Psi (w - v) + S w)), a contraction for small gamma.
    const Matrix G = P + S;
    const double gamma = Eigen::SelfAdjointEigenSolver<Matrix>(P).eigenvalues()(0) /
                         std::pow(G.jacobiSvd().singularValues()(0), 2);
    Vector w = v.flatten();
    for (int it = 0; it < 2000000; ++it) {
      const Vector next =
          resolvent_b(p, p.unflatten(w - gamma * (P * (w - v.flatten()) + S * w)), identity).flatten();
      const double change = (next - w).norm();
      w = next;
      if (change < 1e-15) break;
    }
    EXPECT_LT((resolvent_d(p, v, psi).flatten() - w).norm(), 1e-10);
  }
}

TEST(ResolventD, FixesZerosWithInteriorComponents) {
  const Planted pl = planted_equilibrium(5);
  const ExtendedProblem &p = pl.problem;
  const PreconditionerPsi psi = PreconditionerPsi::assemble(p, assumption_bounds(p, 1.0, 0.99));
  // Zero of D alone: x interior, z free, lambda > 0 in consensus gives D(w) = S w;
  // the resolvent of v = w + Psi^{-1} S w returns w.
  StackedPoint w = p.zero();
  w.x = pl.solution.x;
  w.lambda.setConstant(0.3);
  w.z = pl.solution.z;
  const Vector sw = p.skew() * w.flatten();
  const StackedPoint v = p.unflatten(w.flatten() + psi.matrix().llt().solve(sw));
  EXPECT_LT((resolvent_d(p, v, psi).flatten() - w.flatten()).norm(), 1e-10);
}

TEST(Resolvents, FirmlyNonexpansiveInTheirMetrics) {
  std::mt19937_64 rng(6);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const ExtendedProblem p = random_small_problem(s);
    const StepSizes st = assumption_bounds(p, 0.5, 0.9);
    const PreconditionerPsi psi = PreconditionerPsi::assemble(p, st);
    ASSERT_TRUE(psi.pd().positive_definite);
    const PreconditionerPhi phi = PreconditionerPhi::from(p, st);
    const Matrix Phi = Matrix(phi.steps.cwiseInverse().asDiagonal());
    const StackedPoint a = 3.0 * random_state(p, rng), b = 3.0 * random_state(p, rng);
    StackedPoint an = a, bn = b;
    an.lambda = -a.lambda;  // exercise the clipping as well
    bn.lambda.head(bn.lambda.size() / 2) *= -1.0;

    const Vector ja = resolvent_b(p, an, phi).flatten(), jb = resolvent_b(p, bn, phi).flatten();
    const Vector da = ja - jb, dw = an.flatten() - bn.flatten();
    EXPECT_LE(p_inner(Phi, da, da), p_inner(Phi, da, dw) + 1e-9);

    const Vector ka = resolvent_d(p, an, psi).flatten(), kb = resolvent_d(p, bn, psi).flatten();
    const Vector dk = ka - kb;
    EXPECT_LE(p_inner(psi.matrix(), dk, dk), p_inner(psi.matrix(), dk, dw) + 1e-9);
  }
}

TEST(StepSizes, HandEvaluatedBounds) {
  const ExtendedProblem p = hand_problem();
  const StepSizes s = assumption_bounds(p, 0.1, 1.0);
  EXPECT_DOUBLE_EQ(s.alpha(0), 1.0 / 1.1);
  EXPECT_DOUBLE_EQ(s.nu(0), 1.0 / 4.1);
  EXPECT_DOUBLE_EQ(s.sigma(0), 1.0 / 6.1);
  EXPECT_DOUBLE_EQ(s.sigma(1), 1.0 / 5.1);
  EXPECT_TRUE(PreconditionerPsi::assemble(p, s).pd().positive_definite);
}

TEST(StepSizes, NuLimitWithoutCoupling) {
  const ExtendedProblem p = bilinear_problem();
  const StepSizes s = assumption_bounds(p, 1e-12, 1.0);
  EXPECT_NEAR(s.nu(0), 0.5, 1e-11);
  EXPECT_NEAR(s.nu(1), 0.5, 1e-11);
}

TEST(StepSizes, FromBoundsValidatesAndAttainsBounds) {
  const ExtendedProblem p = random_small_problem(3);
  const OperatorConstants c = estimate_constants(p);
  ASSERT_GT(c.theta, 0.0);
  EXPECT_THROW(step_sizes_from_bounds(p, c.theta / 8, 0.99, c.theta), std::invalid_argument);
  EXPECT_THROW(step_sizes_from_bounds(p, 0.0, 0.99, c.theta), std::invalid_argument);
  EXPECT_THROW(step_sizes_from_bounds(p, c.theta / 16, 1.5, c.theta), std::invalid_argument);
  EXPECT_THROW(step_sizes_from_bounds(p, 1e-3, 0.99, 0.0), std::invalid_argument);

  const double tau = c.theta / 16;
  const StepSizes s = step_sizes_from_bounds(p, tau, 1.0, c.theta);
  for (Index i = 0; i < p.agents(); ++i) {
    const Matrix &Ai = p.game().coupling().blocks[static_cast<std::size_t>(i)];
    double col = 0.0, row = 0.0;
    for (Index k = 0; k < Ai.cols(); ++k) col = std::max(col, Ai.col(k).cwiseAbs().sum());
    for (Index j = 0; j < Ai.rows(); ++j) row = std::max(row, Ai.row(j).cwiseAbs().sum());
    const double di = p.graph().degree(i);
    EXPECT_DOUBLE_EQ(s.alpha(i), 1.0 / (col + tau));
    EXPECT_DOUBLE_EQ(s.nu(i), 1.0 / (2 * di + tau));
    EXPECT_DOUBLE_EQ(s.sigma(i), 1.0 / (row + 2 * di + tau));
  }
}

TEST(Psi, PositiveDefiniteUnderBoundsOnRandomInstances) {
  for (std::uint64_t s = 100; s < 150; ++s) {
    const ExtendedProblem p = random_small_problem(s);
    const OperatorConstants c = estimate_constants(p);
    const StepSizes st = step_sizes_from_bounds(p, c.theta / 16, 0.99, c.theta);
    const PdCheck pd = psi_pd_check(PreconditionerPsi::assemble(p, st));
    EXPECT_TRUE(pd.positive_definite) << "seed " << s << " min eig " << pd.min_eig;
    EXPECT_GT(pd.min_eig, 0.0);
  }
}

TEST(Psi, DiagonalCaseAndViolatedBounds) {
  const Vector diag = (Vector(3) << 2.0, 5.0, 4.0).finished();
  const PdCheck d = psi_pd_check(Matrix(diag.asDiagonal()));
  EXPECT_TRUE(d.positive_definite);
  EXPECT_DOUBLE_EQ(d.min_eig, 2.0);

  const ExtendedProblem p = identity_problem(3);  // no coupling: Psi = diag(1/alpha)
  const PreconditionerPsi psi = PreconditionerPsi::assemble(p, StepSizes::uniform(3, 0.25));
  EXPECT_NEAR(psi.pd().min_eig, 4.0, 1e-12);

  const ExtendedProblem h = hand_problem();
  StepSizes big = assumption_bounds(h, 0.1, 0.99);
  big.alpha *= 1e3;
  const PreconditionerPsi bad = PreconditionerPsi::assemble(h, big);
  EXPECT_FALSE(bad.pd().positive_definite);
  EXPECT_LT(bad.pd().min_eig, 0.0);
  EXPECT_THROW(bad.require_positive_definite(), std::domain_error);
  EXPECT_THROW(resolvent_d(h, h.zero(), bad), std::domain_error);
}

TEST(Constants, IdentityBilinearAndCournot) {
  const OperatorConstants id = estimate_constants(identity_problem(2));
  EXPECT_NEAR(id.lipschitz, 1.0, 1e-12);
  EXPECT_NEAR(id.beta, 1.0, 1e-12);

  const OperatorConstants bl = estimate_constants(bilinear_problem());
  EXPECT_EQ(bl.beta, 0.0);
  EXPECT_EQ(bl.theta, 0.0);
  EXPECT_NEAR(bl.lipschitz, 1.0, 1e-12);

  const GameSpec g = build_cournot_game(CournotParams{});
  const std::array<std::pair<Index, Index>, 2> extra{{{2, 15}, {6, 13}}};
  const ExtendedProblem cp(g, build_cycle_plus(20, extra));
  const OperatorConstants cc = estimate_constants(cp);
  const Matrix S = 0.5 * (g.affine_mean()->M + g.affine_mean()->M.transpose());
  ASSERT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(S).eigenvalues()(0), 0.0);
  EXPECT_GT(cc.beta, 0.0);
  EXPECT_DOUBLE_EQ(cc.theta, std::min(1.0 / 6.0, cc.beta));
}

TEST(StepSizes, MetricSafeguardMeetsTargetWithinBounds) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const ExtendedProblem p = random_small_problem(s);
    const OperatorConstants c = estimate_constants(p);
    const double tau = c.theta / 16;
    const StepSizes bound = step_sizes_from_bounds(p, tau, 0.99, c.theta);
    for (Splitting split : {Splitting::ab, Splitting::cd}) {
      const StepSizes st = metric_safeguarded_step_sizes(p, split, c, tau, 0.99);
      EXPECT_LE(metric_lipschitz(p, st, split, c), reflected_lipschitz_target(0.99) * (1 + 1e-12));
      EXPECT_GE(st.tau, tau);
      EXPECT_TRUE((st.alpha.array() <= bound.alpha.array()).all());
      EXPECT_TRUE((st.nu.array() <= bound.nu.array()).all());
      EXPECT_TRUE((st.sigma.array() <= bound.sigma.array()).all());
      EXPECT_TRUE(PreconditionerPsi::assemble(p, st).pd().positive_definite);
    }
  }
}

TEST(StepSizes, LipschitzUniform) {
  const ExtendedProblem p = bilinear_problem();
  const OperatorConstants c = estimate_constants(p);
  const StepSizes st = lipschitz_uniform_step_sizes(p, c, 0.99);
  EXPECT_NEAR(st.alpha(0), 0.99, 1e-12);  // ||J_A|| = 1 without coupling
  EXPECT_EQ(st.alpha(0), st.sigma(1));
}
