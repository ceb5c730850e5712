#pragma once

#include "sgnep/operators.hpp"

#include <optional>

namespace sgnep {

class ProjectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProjectionOptions {
  double tolerance = 1e-10;
  Index max_sweeps = 200000;
};

/// Euclidean projection onto Omega and {A y <= b} by Dykstra's alternating projections
/// over the box and each half-space.
inline Vector project_feasible(const GameSpec &game, const Vector &v, ProjectionOptions opt = {}) {
  require_size(v.size(), game.dim(), "project_feasible");
  if (game.coupling_rows() == 0) return game.project_local(v);

  const Matrix A = game.coupling().assembled();
  const Vector &b = game.coupling().b;
  const Index m = A.rows();
  const Vector row_sq = A.rowwise().squaredNorm();
  for (Index j = 0; j < m; ++j) {
    if (row_sq(j) == 0.0 && b(j) < 0.0) throw ProjectionError("infeasible coupling row");
  }

  Vector y = game.project_local(v);
  if (((A * y - b).array() <= 0.0).all() && y == v) return y;

  y = v;
  Vector box_inc = Vector::Zero(v.size());
  Matrix half_inc = Matrix::Zero(v.size(), m);
  for (Index sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    const Vector start = y;
    Vector t = y + box_inc;
    y = game.project_local(t);
    box_inc = t - y;
    for (Index j = 0; j < m; ++j) {
      if (row_sq(j) == 0.0) continue;
      t = y + half_inc.col(j);
      const double excess = A.row(j).dot(t) - b(j);
      y = excess > 0.0 ? Vector(t - (excess / row_sq(j)) * A.row(j).transpose()) : t;
      half_inc.col(j) = t - y;
    }
    const double viol = std::max(0.0, (A * y - b).maxCoeff());
    const double box_viol = (y - game.project_local(y)).cwiseAbs().maxCoeff();
    if ((y - start).norm() <= opt.tolerance && viol <= opt.tolerance && box_viol <= opt.tolerance) {
      return y;
    }
  }
  throw ProjectionError("feasible-set projection did not converge within " +
                        std::to_string(opt.max_sweeps) + " sweeps");
}

/// ||x - proj_X(x - F(x))||, zero exactly at solutions of the variational inequality.
inline double residual(const GameSpec &game, const Vector &x, ProjectionOptions opt = {}) {
  require_size(x.size(), game.dim(), "residual");
  return (x - project_feasible(game, x - game.pseudograd_mean(x), opt)).norm();
}

inline std::optional<double> dist_to_solution(const GameSpec &game, const Vector &x) {
  if (!game.known_solution()) return std::nullopt;
  return (x - *game.known_solution()).norm();
}

/// Mean of the N dual blocks of length m.
inline Vector dual_average(Index agents, const Vector &lambda) {
  if (agents < 1 || lambda.size() % agents != 0) throw DimensionError("dual_average layout");
  const Index m = lambda.size() / agents;
  return lambda.reshaped(m, agents).rowwise().mean();
}

/// max_i ||lambda_i - mean||.
inline double dual_consensus(Index agents, const Vector &lambda) {
  if (agents < 1 || lambda.size() % agents != 0) throw DimensionError("dual_consensus layout");
  const Index m = lambda.size() / agents;
  if (m == 0) return 0.0;
  const Matrix blocks = lambda.reshaped(m, agents);
  const Vector avg = blocks.rowwise().mean();
  return (blocks.colwise() - avg).colwise().norm().maxCoeff();
}

inline double dual_consensus(const DualGraph &graph, const Vector &lambda) {
  return dual_consensus(graph.nodes(), lambda);
}

/// Natural-map residual of the KKT system at (x, mean of the lambda_i).
inline double kkt_residual(const ExtendedProblem &p, const StackedPoint &w) {
  p.check(w);
  const GameSpec &g = p.game();
  const Vector lam = dual_average(p.agents(), w.lambda);
  Vector grad = g.pseudograd_mean(w.x);
  if (g.coupling_rows() == 0) return (w.x - g.project_local(w.x - grad)).norm();
  const Matrix A = g.coupling().assembled();
  grad += A.transpose() * lam;
  const Vector rx = w.x - g.project_local(w.x - grad);
  const Vector rl = lam - (lam + (A * w.x - g.coupling().b)).cwiseMax(0.0);
  return std::sqrt(rx.squaredNorm() + rl.squaredNorm());
}

struct MetricsReport {
  double residual = 0.0;
  std::optional<double> dist_to_solution;
  double dual_consensus = 0.0;
  double kkt_residual = 0.0;
};

inline MetricsReport evaluate(const ExtendedProblem &p, const StackedPoint &w) {
  return {residual(p.game(), w.x), dist_to_solution(p.game(), w.x),
          dual_consensus(p.agents(), w.lambda), kkt_residual(p, w)};
}

// ---------------------------------------------------------------------------
// Gap function on the two-dimensional fixtures over [0,1]^2

enum class GapFixture {
  pseudomonotone,  // F(x) = col(-x2, 2 x1), gap 2 x2
  monotone,        // F(x) = col(-x2, x1), gap x2
};

inline Eigen::Vector2d gap_fixture_map(GapFixture f, const Eigen::Vector2d &y) {
  return {-y(1), (f == GapFixture::pseudomonotone ? 2.0 : 1.0) * y(0)};
}

/// Distance from x in [0,1]^2 to the solution set {x2 = 0}.
inline double gap_fixture_distance(const Eigen::Vector2d &x) { return std::abs(x(1)); }

/// max over the grid {0, 1/r, ..., 1}^2 of <F(y), x - y>.
inline double gap_function_small(GapFixture f, const Eigen::Vector2d &x, Index resolution) {
  if (resolution < 100) throw std::invalid_argument("gap grid resolution must be >= 100");
  double best = -std::numeric_limits<double>::infinity();
  const double h = 1.0 / static_cast<double>(resolution);
  for (Index i = 0; i <= resolution; ++i) {
    for (Index j = 0; j <= resolution; ++j) {
      const Eigen::Vector2d y(static_cast<double>(i) * h, static_cast<double>(j) * h);
      best = std::max(best, gap_fixture_map(f, y).dot(x - y));
    }
  }
  return best;
}

}  // namespace sgnep
