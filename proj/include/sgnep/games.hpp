#pragma once

// Builders for concrete game instances. Affine games back both custom instances and the
// random test fixtures.

#include "sgnep/game.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <set>
#include <string_view>

namespace sgnep {

namespace detail {

/// Agents j != i whose block (i, j) of M is nonzero.
inline std::vector<std::vector<Index>> interference_from(const Matrix &M,
                                                         std::span<const Index> dims) {
  std::vector<Index> off{0};
  for (Index d : dims) off.push_back(off.back() + d);
  const auto n = dims.size();
  std::vector<std::vector<Index>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (!M.block(off[i], off[j], dims[i], dims[j]).isZero(0.0)) {
        out[i].push_back(static_cast<Index>(j));
      }
    }
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bilinear two-player games

enum class BilinearVariant {
  monotone,                // F = col(-x2, x1) on [0,1]^2
  pseudomonotone,          // F = col(-x2, 2 x1) on [0,1]^2
  unconstrained_monotone,  // F = col(R1 x2, -R2 x1) on R^2
};

inline std::string_view to_string(BilinearVariant v) {
  switch (v) {
    case BilinearVariant::monotone: return "monotone";
    case BilinearVariant::pseudomonotone: return "pseudomonotone";
    case BilinearVariant::unconstrained_monotone: return "unconstrained-monotone";
  }
  return "?";
}

inline BilinearVariant parse_bilinear_variant(std::string_view s) {
  if (s == "monotone") return BilinearVariant::monotone;
  if (s == "pseudomonotone") return BilinearVariant::pseudomonotone;
  if (s == "unconstrained-monotone") return BilinearVariant::unconstrained_monotone;
  throw std::invalid_argument("unknown bilinear variant: " + std::string(s));
}

struct BilinearParams {
  BilinearVariant variant = BilinearVariant::unconstrained_monotone;
  double noise_mean = 1.0;
  double noise_sigma = 0.5;
};

/// Each agent's coefficient R_i is its scalar noise sample.
inline GameSpec build_bilinear_game(const BilinearParams &params) {
  if (params.noise_sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
  // F_1 = c1 * R1 * x2, F_2 = c2 * R2 * x1
  double c1 = 0.0, c2 = 0.0;
  std::vector<BoxSet> boxes;
  std::optional<Vector> solution;
  switch (params.variant) {
    case BilinearVariant::unconstrained_monotone:
      c1 = 1.0;
      c2 = -1.0;
      boxes = {BoxSet::unbounded(1), BoxSet::unbounded(1)};
      solution = Vector::Zero(2);
      break;
    case BilinearVariant::monotone:
    case BilinearVariant::pseudomonotone:
      c1 = -1.0;
      c2 = params.variant == BilinearVariant::monotone ? 1.0 : 2.0;
      boxes = {BoxSet(Vector::Zero(1), Vector::Ones(1)), BoxSet(Vector::Zero(1), Vector::Ones(1))};
      break;
  }
  Matrix M(2, 2);
  M << 0.0, c1 * params.noise_mean, c2 * params.noise_mean, 0.0;

  std::vector<Index> dims{1, 1};
  GameSpec::Parts parts;
  parts.name = "bilinear-" + std::string(to_string(params.variant));
  parts.local_sets = std::move(boxes);
  parts.coupling = CouplingConstraints::none(dims);
  parts.noise = {GaussianNoise{Vector::Constant(1, params.noise_mean),
                               Vector::Constant(1, params.noise_sigma)},
                 GaussianNoise{Vector::Constant(1, params.noise_mean),
                               Vector::Constant(1, params.noise_sigma)}};
  parts.gradient = [c1, c2](const Vector &x, Index agent, const Vector &r) -> Vector {
    return agent == 0 ? Vector::Constant(1, c1 * r(0) * x(1)) : Vector::Constant(1, c2 * r(0) * x(0));
  };
  parts.interference = {{1}, {0}};
  parts.affine_mean = AffineMap{M, Vector::Zero(2)};
  parts.known_solution = std::move(solution);
  return GameSpec(std::move(parts));
}

// ---------------------------------------------------------------------------
// Networked Cournot market with capacity constraints

struct CournotParams {
  Index companies = 20;
  Index markets = 7;
  Index max_markets_per_company = 3;
  double limit_low = 1.0, limit_high = 1.5;
  double capacity_low = 0.5, capacity_high = 1.0;
  double sensitivity_low = 0.5, sensitivity_high = 1.0;
  bool dense_sensitivity = false;  // off: D is diagonal
  double cost_slope = 1.5;
  double price_mean = 3.0;
  double price_sigma = 0.5;
  std::optional<std::vector<std::vector<Index>>> participation;  // markets of each company
  std::uint64_t seed = 42;
};

/// Generated Cournot data; everything the game needs, so it can be serialized.
struct CournotData {
  std::vector<std::vector<Index>> participation;
  std::vector<Vector> production_limits;  // gamma_i, one entry per market served
  Vector capacities;                      // b
  Matrix sensitivity;                     // D
  Vector price_mean;
  double price_sigma = 0.5;
  double cost_slope = 1.5;
  Vector cost_offsets;  // q_i, no effect on gradients
  std::uint64_t seed = 0;

  Index companies() const { return static_cast<Index>(participation.size()); }
  Index markets() const { return capacities.size(); }

  /// A_i: column c selects market participation[i][c].
  Matrix block(Index i) const {
    const auto &mk = participation[static_cast<std::size_t>(i)];
    Matrix a = Matrix::Zero(markets(), static_cast<Index>(mk.size()));
    for (std::size_t c = 0; c < mk.size(); ++c) a(mk[c], static_cast<Index>(c)) = 1.0;
    return a;
  }
};

inline CournotData generate_cournot_data(const CournotParams &p) {
  if (p.companies < 1 || p.markets < 1) throw std::invalid_argument("cournot: empty market");
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  CournotData d;
  d.seed = p.seed;
  if (p.participation) {
    d.participation = *p.participation;
  } else {
    const Index cap = std::clamp<Index>(p.max_markets_per_company, 1, p.markets);
    std::vector<Index> all(static_cast<std::size_t>(p.markets));
    std::iota(all.begin(), all.end(), Index{0});
    for (Index i = 0; i < p.companies; ++i) {
      const Index k = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(cap));
      std::shuffle(all.begin(), all.end(), rng);
      std::vector<Index> mk(all.begin(), all.begin() + k);
      std::sort(mk.begin(), mk.end());
      d.participation.push_back(std::move(mk));
    }
    // Every market gets at least one seller: market j falls back to company j mod N.
    for (Index j = 0; j < p.markets; ++j) {
      const bool served = std::any_of(d.participation.begin(), d.participation.end(),
                                      [j](const auto &mk) {
                                        return std::find(mk.begin(), mk.end(), j) != mk.end();
                                      });
      if (!served) {
        auto &mk = d.participation[static_cast<std::size_t>(j % p.companies)];
        mk.push_back(j);
        std::sort(mk.begin(), mk.end());
      }
    }
  }
  for (const auto &mk : d.participation) {
    d.production_limits.emplace_back(static_cast<Index>(mk.size()));
    for (Index c = 0; c < d.production_limits.back().size(); ++c) {
      d.production_limits.back()(c) = uniform(p.limit_low, p.limit_high);
    }
  }
  d.capacities.resize(p.markets);
  for (Index j = 0; j < p.markets; ++j) d.capacities(j) = uniform(p.capacity_low, p.capacity_high);
  d.sensitivity = Matrix::Zero(p.markets, p.markets);
  for (Index r = 0; r < p.markets; ++r) {
    for (Index c = 0; c < p.markets; ++c) {
      if (p.dense_sensitivity || r == c) d.sensitivity(r, c) = uniform(p.sensitivity_low, p.sensitivity_high);
    }
  }
  d.price_mean = Vector::Constant(p.markets, p.price_mean);
  d.price_sigma = p.price_sigma;
  d.cost_slope = p.cost_slope;
  d.cost_offsets.resize(p.companies);
  for (Index i = 0; i < p.companies; ++i) d.cost_offsets(i) = uniform(0.0, 1.0);
  return d;
}

/// J_i(x, xi) = c 1'x_i + q_i - (P(xi) - D A x)' A_i x_i, so
/// grad_i = c 1 - A_i'(P(xi) - D A x) + A_i' D' A_i x_i.
inline GameSpec build_cournot_game(const CournotData &d) {
  const Index N = d.companies();
  const Index m = d.markets();
  if (N < 1) throw std::invalid_argument("cournot: no companies");
  if (d.production_limits.size() != d.participation.size()) {
    throw DimensionError("cournot: one limit vector per company");
  }
  require_size(d.sensitivity.rows(), m, "cournot sensitivity rows");
  require_size(d.sensitivity.cols(), m, "cournot sensitivity cols");
  require_size(d.price_mean.size(), m, "cournot price mean");
  std::vector<Index> served(static_cast<std::size_t>(m), 0);
  for (const auto &mk : d.participation) {
    if (mk.empty()) throw std::invalid_argument("cournot: company without market");
    for (Index j : mk) {
      if (j < 0 || j >= m) throw std::out_of_range("cournot: market index");
      ++served[static_cast<std::size_t>(j)];
    }
  }
  if (std::find(served.begin(), served.end(), 0) != served.end()) {
    throw std::invalid_argument("cournot: market without participants");
  }

  struct Shared {
    std::vector<Matrix> blocks;
    std::vector<Matrix> self;  // A_i' D' A_i
    Matrix DA;                 // D A
    std::vector<Index> offsets;
    double cost_slope;
  };
  auto sh = std::make_shared<Shared>();
  sh->cost_slope = d.cost_slope;
  std::vector<BoxSet> boxes;
  std::vector<Index> dims;
  sh->offsets.push_back(0);
  for (Index i = 0; i < N; ++i) {
    Matrix a = d.block(i);
    require_size(d.production_limits[static_cast<std::size_t>(i)].size(), a.cols(), "cournot limits");
    boxes.emplace_back(Vector::Zero(a.cols()), d.production_limits[static_cast<std::size_t>(i)]);
    dims.push_back(a.cols());
    sh->offsets.push_back(sh->offsets.back() + a.cols());
    sh->self.push_back(a.transpose() * d.sensitivity.transpose() * a);
    sh->blocks.push_back(std::move(a));
  }
  auto coupling = CouplingConstraints::with_uniform_shares(sh->blocks, d.capacities);
  const Matrix A = coupling.assembled();
  sh->DA = d.sensitivity * A;

  const Index n = A.cols();
  Matrix M = A.transpose() * sh->DA;
  for (Index i = 0; i < N; ++i) {
    const auto s = static_cast<std::size_t>(i);
    M.block(sh->offsets[s], sh->offsets[s], dims[s], dims[s]) += sh->self[s];
  }
  Vector q = Vector::Constant(n, d.cost_slope) - A.transpose() * d.price_mean;

  GameSpec::Parts parts;
  parts.name = "cournot";
  parts.interference = detail::interference_from(M, dims);
  parts.local_sets = std::move(boxes);
  parts.coupling = std::move(coupling);
  for (Index i = 0; i < N; ++i) {
    parts.noise.push_back({d.price_mean, Vector::Constant(m, d.price_sigma)});
  }
  parts.gradient = [sh](const Vector &x, Index i, const Vector &price) -> Vector {
    const auto s = static_cast<std::size_t>(i);
    const Matrix &a = sh->blocks[s];
    const auto xi = x.segment(sh->offsets[s], a.cols());
    return Vector::Constant(a.cols(), sh->cost_slope) - a.transpose() * (price - sh->DA * x) +
           sh->self[s] * xi;
  };
  parts.affine_mean = AffineMap{std::move(M), std::move(q)};
  return GameSpec(std::move(parts));
}

inline GameSpec build_cournot_game(const CournotParams &p) {
  return build_cournot_game(generate_cournot_data(p));
}

// ---------------------------------------------------------------------------
// Affine games with additive noise: F(x, xi) = M x + q + xi, xi ~ N(0, sigma_i^2 I)

struct AffineGameData {
  std::string name = "affine";
  std::vector<BoxSet> local_sets;
  std::vector<Matrix> blocks;  // may be empty when there is no coupling
  Vector b;
  Matrix M;
  Vector q;
  Vector noise_sigma;  // one per agent
  std::optional<Vector> known_solution;
};

inline GameSpec build_affine_game(const AffineGameData &d) {
  const auto N = static_cast<Index>(d.local_sets.size());
  std::vector<Index> dims;
  for (const auto &box : d.local_sets) dims.push_back(box.dim());
  require_size(d.noise_sigma.size(), N, "affine noise sigma");

  auto shared = std::make_shared<AffineMap>(AffineMap{d.M, d.q});
  std::vector<Index> offsets{0};
  for (Index dim : dims) offsets.push_back(offsets.back() + dim);

  GameSpec::Parts parts;
  parts.name = d.name;
  parts.local_sets = d.local_sets;
  parts.coupling = d.blocks.empty() ? CouplingConstraints::none(dims)
                                    : CouplingConstraints::with_uniform_shares(d.blocks, d.b);
  for (Index i = 0; i < N; ++i) {
    const Index ni = dims[static_cast<std::size_t>(i)];
    parts.noise.push_back({Vector::Zero(ni), Vector::Constant(ni, d.noise_sigma(i))});
  }
  parts.gradient = [shared, offsets](const Vector &x, Index i, const Vector &xi) -> Vector {
    const auto s = static_cast<std::size_t>(i);
    const Index ni = offsets[s + 1] - offsets[s];
    return shared->M.middleRows(offsets[s], ni) * x + shared->q.segment(offsets[s], ni) + xi;
  };
  parts.interference = detail::interference_from(d.M, dims);
  parts.affine_mean = *shared;
  parts.known_solution = d.known_solution;
  return GameSpec(std::move(parts));
}

struct RandomAffineParams {
  Index agents = 3;
  Index max_dim = 2;
  Index coupling_rows = 2;
  double skew_weight = 0.5;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
};

/// Random affine game with positive definite symmetric part, boxes around 0 and
/// capacities b > 0, so x = 0 is strictly feasible.
inline AffineGameData random_affine_data(const RandomAffineParams &p) {
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto fill = [&](Index r, Index c) {
    Matrix out(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) out(i, j) = unit(rng);
    return out;
  };
  AffineGameData d;
  d.name = "random-affine";
  Index n = 0;
  for (Index i = 0; i < p.agents; ++i) {
    const Index ni = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(p.max_dim));
    Vector lo(ni), hi(ni);
    for (Index k = 0; k < ni; ++k) {
      lo(k) = -1.0 + 0.5 * unit(rng);
      hi(k) = 1.0 + 0.5 * unit(rng);
    }
    d.local_sets.emplace_back(lo, hi);
    n += ni;
  }
  if (p.coupling_rows > 0) {
    for (const auto &box : d.local_sets) d.blocks.push_back(fill(p.coupling_rows, box.dim()));
    d.b = (Vector::Ones(p.coupling_rows) + 0.5 * fill(p.coupling_rows, 1).col(0)).eval();
  }
  const Matrix B = fill(n, n);
  const Matrix S = fill(n, n);
  d.M = B.transpose() * B / static_cast<double>(n) + 0.2 * Matrix::Identity(n, n) +
        p.skew_weight * (S - S.transpose());
  d.q = fill(n, 1).col(0);
  d.noise_sigma = Vector::Constant(p.agents, p.noise_sigma);
  return d;
}

inline GameSpec build_random_affine_game(const RandomAffineParams &p) {
  return build_affine_game(random_affine_data(p));
}

}  // namespace sgnep
