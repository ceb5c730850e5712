#pragma once

#include "sgnep/sampling.hpp"
#include "sgnep/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sgnep {

/// Closed box {v : lower <= v <= upper}; infinite bounds are allowed.
class BoxSet {
 public:
  BoxSet() = default;
  BoxSet(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    require_size(upper_.size(), lower_.size(), "BoxSet upper bound");
    for (Index i = 0; i < lower_.size(); ++i) {
      if (std::isnan(lower_(i)) || std::isnan(upper_(i)) || lower_(i) > upper_(i)) {
        throw std::invalid_argument("BoxSet requires lower <= upper elementwise");
      }
    }
  }

  static BoxSet unbounded(Index n) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {Vector::Constant(n, -inf), Vector::Constant(n, inf)};
  }

  Index dim() const { return lower_.size(); }
  const Vector &lower() const { return lower_; }
  const Vector &upper() const { return upper_; }

  Vector project(const Vector &v) const { return v.cwiseMax(lower_).cwiseMin(upper_); }

  bool contains(const Vector &v, double tol = 0.0) const {
    return ((v - lower_).array() >= -tol).all() && ((upper_ - v).array() >= -tol).all();
  }

  /// Midpoint of each bounded coordinate, the finite bound for half-lines, 0 otherwise.
  Vector midpoint() const {
    Vector out(dim());
    for (Index i = 0; i < dim(); ++i) {
      const bool lo = std::isfinite(lower_(i));
      const bool hi = std::isfinite(upper_(i));
      if (lo && hi) {
        out(i) = 0.5 * (lower_(i) + upper_(i));
      } else if (lo) {
        out(i) = lower_(i);
      } else if (hi) {
        out(i) = upper_(i);
      } else {
        out(i) = 0.0;
      }
    }
    return out;
  }

  bool bounded() const { return lower_.allFinite() && upper_.allFinite(); }

 private:
  Vector lower_;
  Vector upper_;
};

/// Shared affine constraints sum_i A_i x_i <= b, with b split into per-agent shares b_i.
struct CouplingConstraints {
  std::vector<Matrix> blocks;  // A_i, m x n_i
  Vector b;
  std::vector<Vector> shares;  // b_i, sum_i b_i = b

  Index rows() const { return b.size(); }

  static CouplingConstraints none(std::span<const Index> dims) {
    CouplingConstraints c;
    for (Index d : dims) {
      c.blocks.emplace_back(0, d);
      c.shares.emplace_back(0);
    }
    c.b = Vector(0);
    return c;
  }

  /// b_i = b / N. Any split with sum b works; the uniform one treats agents alike.
  static CouplingConstraints with_uniform_shares(std::vector<Matrix> blocks, Vector b) {
    CouplingConstraints c;
    const auto n = static_cast<double>(blocks.size());
    c.shares.assign(blocks.size(), b / n);
    c.blocks = std::move(blocks);
    c.b = std::move(b);
    return c;
  }

  /// A = [A_1, ..., A_N].
  Matrix assembled() const {
    Index cols = 0;
    for (const auto &blk : blocks) cols += blk.cols();
    Matrix out(rows(), cols);
    Index off = 0;
    for (const auto &blk : blocks) {
      out.middleCols(off, blk.cols()) = blk;
      off += blk.cols();
    }
    return out;
  }

  void validate(std::span<const Index> dims) const {
    if (blocks.size() != dims.size() || shares.size() != dims.size()) {
      throw DimensionError("coupling: one block and one share per agent required");
    }
    Vector total = Vector::Zero(rows());
    for (std::size_t i = 0; i < dims.size(); ++i) {
      require_size(blocks[i].rows(), rows(), "coupling block rows");
      require_size(blocks[i].cols(), dims[i], "coupling block cols");
      require_size(shares[i].size(), rows(), "coupling share");
      total += shares[i];
    }
    if (rows() > 0 && (total - b).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + b.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument("coupling shares must sum to b");
    }
  }
};

/// Mean pseudogradient in the form F(x) = M x + q.
struct AffineMap {
  Matrix M;
  Vector q;
};

enum class Feasibility { feasible, violated_local, violated_coupling };

inline const char *to_string(Feasibility f) {
  switch (f) {
    case Feasibility::feasible: return "feasible";
    case Feasibility::violated_local: return "violated-local";
    case Feasibility::violated_coupling: return "violated-coupling";
  }
  return "?";
}

/// Gradient of J_i in x_i at the full profile x for one sample of agent i's noise.
/// Must be affine in the sample: the mean map is this gradient at the noise mean.
using AgentGradient = std::function<Vector(const Vector &x, Index agent, const Vector &sample)>;

/// A stochastic generalized Nash equilibrium problem with box-local sets and shared
/// affine constraints. Immutable after construction.
class GameSpec {
 public:
  struct Parts {
    std::string name;
    std::vector<BoxSet> local_sets;
    CouplingConstraints coupling;
    std::vector<GaussianNoise> noise;
    AgentGradient gradient;
    std::vector<std::vector<Index>> interference;  // agents j != i whose x_j enter J_i
    std::optional<AffineMap> affine_mean;
    std::optional<Vector> known_solution;
  };

  explicit GameSpec(Parts parts) : p_(std::move(parts)) {
    const auto n_agents = p_.local_sets.size();
    if (n_agents == 0) throw std::invalid_argument("game needs at least one agent");
    if (!p_.gradient) throw std::invalid_argument("game needs a gradient oracle");
    dims_.reserve(n_agents);
    offsets_.reserve(n_agents + 1);
    offsets_.push_back(0);
    for (const auto &box : p_.local_sets) {
      dims_.push_back(box.dim());
      offsets_.push_back(offsets_.back() + box.dim());
    }
    p_.coupling.validate(dims_);
    if (p_.noise.size() != n_agents) throw DimensionError("one noise model per agent required");
    for (const auto &nz : p_.noise) require_size(nz.stddev.size(), nz.dim(), "noise stddev");
    if (p_.interference.empty()) p_.interference.resize(n_agents);
    if (p_.interference.size() != n_agents) throw DimensionError("interference sets");
    if (p_.affine_mean) {
      require_size(p_.affine_mean->M.rows(), dim(), "affine map rows");
      require_size(p_.affine_mean->M.cols(), dim(), "affine map cols");
      require_size(p_.affine_mean->q.size(), dim(), "affine map offset");
    }
    if (p_.known_solution) require_size(p_.known_solution->size(), dim(), "known solution");
  }

  const std::string &name() const { return p_.name; }
  Index agents() const { return static_cast<Index>(dims_.size()); }
  Index dim() const { return offsets_.back(); }
  Index dim(Index i) const { return dims_[static_cast<std::size_t>(i)]; }
  Index offset(Index i) const { return offsets_[static_cast<std::size_t>(i)]; }
  std::span<const Index> dims() const { return dims_; }
  Index coupling_rows() const { return p_.coupling.rows(); }

  const BoxSet &local_set(Index i) const { return p_.local_sets[static_cast<std::size_t>(i)]; }
  const std::vector<BoxSet> &local_sets() const { return p_.local_sets; }
  const CouplingConstraints &coupling() const { return p_.coupling; }
  const GaussianNoise &noise(Index i) const { return p_.noise[static_cast<std::size_t>(i)]; }
  const std::vector<Index> &interference(Index i) const {
    return p_.interference[static_cast<std::size_t>(i)];
  }
  const std::optional<AffineMap> &affine_mean() const { return p_.affine_mean; }
  const std::optional<Vector> &known_solution() const { return p_.known_solution; }

  auto block(Vector &v, Index i) const { return v.segment(offset(i), dim(i)); }
  auto block(const Vector &v, Index i) const { return v.segment(offset(i), dim(i)); }

  Vector project_local(const Vector &x) const {
    require_size(x.size(), dim(), "project_local");
    Vector out(dim());
    for (Index i = 0; i < agents(); ++i) block(out, i) = local_set(i).project(block(x, i));
    return out;
  }

  bool in_local_sets(const Vector &x, double tol) const {
    for (Index i = 0; i < agents(); ++i) {
      if (!local_set(i).contains(block(x, i), tol)) return false;
    }
    return true;
  }

  Vector midpoint() const {
    Vector out(dim());
    for (Index i = 0; i < agents(); ++i) block(out, i) = local_set(i).midpoint();
    return out;
  }

  /// Gradient of J_i at one explicit sample.
  Vector agent_gradient(const Vector &x, Index i, const Vector &sample) const {
    require_size(sample.size(), noise(i).dim(), "agent sample");
    Vector g = p_.gradient(x, i, sample);
    require_size(g.size(), dim(i), "agent gradient");
    return g;
  }

  /// Expected-value pseudogradient, stacked in agent order.
  Vector pseudograd_mean(const Vector &x) const {
    require_size(x.size(), dim(), "pseudograd_mean");
    Vector out(dim());
    for (Index i = 0; i < agents(); ++i) block(out, i) = agent_gradient(x, i, noise(i).mean);
    return out;
  }

  /// Sample-average pseudogradient over an explicit batch; batch[i] holds agent i's
  /// samples as columns and all agents need the same batch size.
  Vector pseudograd_sample(const Vector &x, std::span<const Matrix> batch) const {
    require_size(x.size(), dim(), "pseudograd_sample");
    require_size(static_cast<Index>(batch.size()), agents(), "sample batch agents");
    Vector out(dim());
    for (Index i = 0; i < agents(); ++i) {
      const Matrix &samples = batch[static_cast<std::size_t>(i)];
      if (samples.cols() == 0) throw std::invalid_argument("empty sample batch");
      require_size(samples.rows(), noise(i).dim(), "sample dimension");
      Vector acc = Vector::Zero(dim(i));
      for (Index s = 0; s < samples.cols(); ++s) acc += agent_gradient(x, i, samples.col(s));
      block(out, i) = acc / static_cast<double>(samples.cols());
    }
    return out;
  }

  /// Sample-average pseudogradient with batch_size fresh draws per agent. Gradients are
  /// affine in the sample, so the gradient at the batch mean equals the batch average.
  Vector pseudograd_sample(const Vector &x, Index batch_size, SampleSource &source) const {
    require_size(x.size(), dim(), "pseudograd_sample");
    if (batch_size < 1) throw std::invalid_argument("empty sample batch");
    if (source.streams() < agents()) throw std::invalid_argument("too few sample streams");
    Vector out(dim());
    for (Index i = 0; i < agents(); ++i) {
      block(out, i) = agent_gradient(x, i, source.draw_batch_mean(i, noise(i), batch_size));
    }
    return out;
  }

  bool deterministic() const {
    return std::all_of(p_.noise.begin(), p_.noise.end(),
                       [](const GaussianNoise &nz) { return nz.stddev.isZero(0.0); });
  }

 private:
  Parts p_;
  std::vector<Index> dims_;
  std::vector<Index> offsets_;
};

/// Classifies x against the local boxes first, then against A x <= b.
inline Feasibility check_feasible(const GameSpec &game, const Vector &x, double tol = 1e-9) {
  require_size(x.size(), game.dim(), "check_feasible");
  if (!game.in_local_sets(x, tol)) return Feasibility::violated_local;
  if (game.coupling_rows() > 0) {
    const Vector slack = game.coupling().b - game.coupling().assembled() * x;
    if (slack.minCoeff() < -tol) return Feasibility::violated_coupling;
  }
  return Feasibility::feasible;
}

}  // namespace sgnep
