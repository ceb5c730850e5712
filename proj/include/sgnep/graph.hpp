#pragma once

#include "sgnep/types.hpp"

#include <algorithm>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace sgnep {

/// Undirected weighted edge between zero-based node indices.
struct Edge {
  Index from = 0;
  Index to = 0;
  double weight = 1.0;
};

/// Communication graph for the local dual copies. Validated as undirected, loop-free
/// and connected at construction.
class DualGraph {
 public:
  struct Neighbor {
    Index node;
    double weight;
  };

  static DualGraph from_edges(Index nodes, std::span<const Edge> edges) {
    if (nodes < 1) throw std::invalid_argument("graph needs at least one node");
    DualGraph g;
    g.W_ = Matrix::Zero(nodes, nodes);
    std::set<std::pair<Index, Index>> seen;
    for (const auto &e : edges) {
      if (e.from < 0 || e.to < 0 || e.from >= nodes || e.to >= nodes) {
        throw std::out_of_range("graph edge endpoint out of range");
      }
      if (e.from == e.to) throw std::invalid_argument("graph self-loop");
      if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
        throw std::invalid_argument("graph edge weight must be positive");
      }
      if (!seen.insert(std::minmax(e.from, e.to)).second) {
        throw std::invalid_argument("duplicate graph edge");
      }
      g.W_(e.from, e.to) = e.weight;
      g.W_(e.to, e.from) = e.weight;
      g.edges_.push_back({std::min(e.from, e.to), std::max(e.from, e.to), e.weight});
    }
    g.degrees_ = g.W_.rowwise().sum();
    g.L_ = Matrix(g.degrees_.asDiagonal()) - g.W_;
    g.neighbors_.resize(static_cast<std::size_t>(nodes));
    for (Index i = 0; i < nodes; ++i) {
      for (Index j = 0; j < nodes; ++j) {
        if (g.W_(i, j) != 0.0) g.neighbors_[static_cast<std::size_t>(i)].push_back({j, g.W_(i, j)});
      }
    }
    if (nodes > 1 && !(g.algebraic_connectivity() > 1e-10)) {
      throw std::invalid_argument("dual graph must be connected");
    }
    return g;
  }

  Index nodes() const { return W_.rows(); }
  const Matrix &adjacency() const { return W_; }
  const Matrix &laplacian() const { return L_; }
  const Vector &degrees() const { return degrees_; }
  double degree(Index i) const { return degrees_(i); }
  double max_degree() const { return degrees_.size() ? degrees_.maxCoeff() : 0.0; }
  const std::vector<Edge> &edges() const { return edges_; }
  const std::vector<Neighbor> &neighbors(Index i) const {
    return neighbors_[static_cast<std::size_t>(i)];
  }

  /// Second-smallest Laplacian eigenvalue; 0 for a single node.
  double algebraic_connectivity() const {
    if (nodes() < 2) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(L_, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(1);
  }

 private:
  Matrix W_;
  Matrix L_;
  Vector degrees_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Neighbor>> neighbors_;
};

/// Unit-weight cycle 1-2-...-n-1 plus extra chords given as one-based pairs.
inline DualGraph build_cycle_plus(Index n, std::span<const std::pair<Index, Index>> extra_one_based,
                                  double weight = 1.0) {
  if (n < 3) throw std::invalid_argument("cycle graph needs at least 3 nodes");
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n, weight});
  for (const auto &[a, b] : extra_one_based) edges.push_back({a - 1, b - 1, weight});
  return DualGraph::from_edges(n, edges);
}

/// Path graph 1-2-...-n (a single edge for two agents).
inline DualGraph build_path(Index n, double weight = 1.0) {
  std::vector<Edge> edges;
  for (Index i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, weight});
  return DualGraph::from_edges(n, edges);
}

/// L kron I_m.
inline Matrix laplacian_expand(const Matrix &L, Index m) {
  if (m < 0) throw std::invalid_argument("dual dimension must be nonnegative");
  const Index N = L.rows();
  Matrix out = Matrix::Zero(N * m, N * m);
  for (Index i = 0; i < N; ++i) {
    for (Index j = 0; j < N; ++j) {
      if (L(i, j) != 0.0) out.block(i * m, j * m, m, m).diagonal().setConstant(L(i, j));
    }
  }
  return out;
}

/// ||(L kron I_m) lambda||_2.
inline double consensus_residual(const Matrix &L_expanded, const Vector &lambda) {
  require_size(lambda.size(), L_expanded.cols(), "consensus_residual");
  return (L_expanded * lambda).norm();
}

}  // namespace sgnep
