#pragma once

// Weighted communication graph of the robot team and the horizon-stacked
// network information matrix blkdiag(L_tau (x) I3).

#include <netsel/matkit.hpp>

#include <cmath>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace netsel {

/// Undirected link stored with the lower index as the leaving node.
struct Edge {
  int from = 0;
  int to = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// omega_ij = alpha * exp(-beta * |x_i - x_j|).
struct WeightLaw {
  double alpha = 1.0;
  double beta = 0.0;

  void validate() const {
    if (!(alpha > 0.0)) throw Error("weight law: alpha must be positive");
    if (!(beta >= 0.0)) throw Error("weight law: beta must be nonnegative");
  }
  double operator()(const Vec3& a, const Vec3& b) const {
    return alpha * std::exp(-beta * (a - b).norm());
  }
};

class CommGraph {
 public:
  CommGraph() = default;
  CommGraph(int num_nodes, std::vector<Edge> edges, std::vector<double> weights)
      : num_nodes_(num_nodes), edges_(std::move(edges)), weights_(std::move(weights)) {
    if (num_nodes_ < 1) throw Error("graph needs at least one node");
    if (edges_.size() != weights_.size()) throw Error("graph: one weight per edge required");
    std::set<std::pair<int, int>> seen;
    for (auto& e : edges_) {
      if (e.from < 0 || e.to < 0 || e.from >= num_nodes_ || e.to >= num_nodes_)
        throw Error("graph: edge references an invalid node index");
      if (e.from == e.to) throw Error("graph: self-loop");
      if (e.from > e.to) std::swap(e.from, e.to);
      if (!seen.emplace(e.from, e.to).second) throw Error("graph: duplicate edge");
    }
    for (double w : weights_)
      if (!(w >= 0.0)) throw Error("graph: negative edge weight");
  }

  int num_nodes() const { return num_nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<double>& weights() const { return weights_; }

  /// Returns a copy with one more weighted edge.
  CommGraph with_edge(Edge e, double w) const {
    auto edges = edges_;
    auto weights = weights_;
    edges.push_back(e);
    weights.push_back(w);
    return CommGraph(num_nodes_, std::move(edges), std::move(weights));
  }

 private:
  int num_nodes_ = 1;
  std::vector<Edge> edges_;
  std::vector<double> weights_;
};

inline std::vector<Edge> complete_topology(int n) {
  std::vector<Edge> out;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) out.push_back({i, j});
  return out;
}

inline std::vector<Edge> path_topology(int n) {
  std::vector<Edge> out;
  for (int i = 0; i + 1 < n; ++i) out.push_back({i, i + 1});
  return out;
}

inline std::vector<Edge> ring_topology(int n) {
  auto out = path_topology(n);
  if (n > 2) out.push_back({0, n - 1});
  return out;
}

/// Edges of `topology` weighted by the distance law. Weights that underflow
/// are kept so the edge set is identical for every beta.
inline CommGraph build_graph(std::span<const Vec3> positions, const WeightLaw& law,
                             std::vector<Edge> topology) {
  law.validate();
  const int n = static_cast<int>(positions.size());
  std::vector<double> weights;
  weights.reserve(topology.size());
  for (const auto& e : topology) {
    if (e.from < 0 || e.to < 0 || e.from >= n || e.to >= n)
      throw Error("build_graph: edge references an invalid node index");
    weights.push_back(law(positions[e.from], positions[e.to]));
  }
  return CommGraph(n, std::move(topology), std::move(weights));
}

/// N x |E| incidence matrix: -1 at the leaving node, +1 at the entering node.
inline Mat incidence(const CommGraph& g) {
  Mat c = Mat::Zero(g.num_nodes(), static_cast<Index>(g.edges().size()));
  for (std::size_t k = 0; k < g.edges().size(); ++k) {
    c(g.edges()[k].from, static_cast<Index>(k)) = -1.0;
    c(g.edges()[k].to, static_cast<Index>(k)) = 1.0;
  }
  return c;
}

inline Mat weight_matrix(const CommGraph& g) {
  Vec w(static_cast<Index>(g.weights().size()));
  for (std::size_t k = 0; k < g.weights().size(); ++k) w(static_cast<Index>(k)) = g.weights()[k];
  return w.asDiagonal();
}

/// L = C W C^T, assembled edge by edge.
inline Mat laplacian(const CommGraph& g) {
  Mat l = Mat::Zero(g.num_nodes(), g.num_nodes());
  for (std::size_t k = 0; k < g.edges().size(); ++k) {
    const auto [i, j] = g.edges()[k];
    const double w = g.weights()[k];
    l(i, i) += w;
    l(j, j) += w;
    l(i, j) -= w;
    l(j, i) -= w;
  }
  return l;
}

/// Noise covariance of the stacked relative measurements, P = (W (x) I3)^{-1}.
/// Zero-weight edges carry infinite variance.
inline Mat relative_noise_cov_block(const CommGraph& g, std::size_t edge) {
  return Mat3::Identity() / g.weights().at(edge);
}

/// blkdiag(L_tau (x) I3) over the horizon; dim 3N(M+1).
inline Mat horizon_network_info(std::span<const CommGraph> graphs, int horizon) {
  if (graphs.size() != static_cast<std::size_t>(horizon) + 1)
    throw Error("horizon_network_info: need M+1 graphs");
  const int n = graphs.front().num_nodes();
  std::vector<Mat> blocks;
  blocks.reserve(graphs.size());
  const Mat i3 = Mat::Identity(3, 3);
  for (const auto& g : graphs) {
    if (g.num_nodes() != n) throw Error("horizon_network_info: inconsistent node count");
    blocks.push_back(kron(laplacian(g), i3));
  }
  return block_diag(blocks);
}

}  // namespace netsel
