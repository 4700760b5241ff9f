#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dpbm/types.hpp"

namespace dpbm {

/// Undirected simple graph on nodes 0..n-1.
class Graph {
 public:
  explicit Graph(Index n = 0);

  Index size() const { return static_cast<Index>(adj_.size()); }
  void add_edge(Index i, Index j);
  bool has_edge(Index i, Index j) const;
  const std::vector<Index>& neighbors(Index i) const { return adj_[static_cast<std::size_t>(i)]; }
  Index degree(Index i) const { return static_cast<Index>(neighbors(i).size()); }
  std::vector<std::pair<Index, Index>> edges() const;
  bool connected() const;

 private:
  std::vector<std::vector<Index>> adj_;
};

enum class Topology { ring, path, star, complete, random_connected };

Topology parse_topology(const std::string& name);
std::string to_string(Topology t);

/// Builds a connected topology. Random graphs are Erdos-Renyi G(n, p),
/// resampled until connected.
Graph build_topology(Topology kind, Index n, double edge_probability = 0.5, std::uint64_t seed = 0);

/// Reads `i j` pairs (0-based), one edge per line. `n` = 0 infers the size.
Graph load_edge_list(const std::string& path, Index n = 0);

/// Metropolis-Hastings weights: w_ij = 1 / (1 + max(deg_i, deg_j)) on edges,
/// diagonal takes the remainder.
Matrix metropolis_weights(const Graph& g);

struct WeightReport {
  bool ok = true;
  std::string message;
};

/// Checks symmetry, unit row sums, nonnegativity and the graph sparsity pattern.
WeightReport validate_averaging(const Matrix& W, const Graph& g, double tol = 1e-12);

/// w_hat_ij = w_ij gamma_i / alpha off the diagonal, 1 - (1 - w_ii) gamma_i / alpha on it.
/// Throws std::domain_error naming the node when gamma_i >= alpha / (1 - w_ii).
Matrix hat_weights(const Matrix& W, const Vector& gamma, double alpha);

}  // namespace dpbm
