#include "dpbm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dpbm {

Graph::Graph(Index n) : adj_(static_cast<std::size_t>(n)) {}

void Graph::add_edge(Index i, Index j) {
  if (i < 0 || j < 0 || i >= size() || j >= size()) throw std::out_of_range("edge endpoint out of range");
  if (i == j) throw std::invalid_argument("self-loops are not allowed");
  if (has_edge(i, j)) return;
  auto& ai = adj_[static_cast<std::size_t>(i)];
  auto& aj = adj_[static_cast<std::size_t>(j)];
  ai.insert(std::lower_bound(ai.begin(), ai.end(), j), j);
  aj.insert(std::lower_bound(aj.begin(), aj.end(), i), i);
}

bool Graph::has_edge(Index i, Index j) const {
  const auto& ai = neighbors(i);
  return std::binary_search(ai.begin(), ai.end(), j);
}

std::vector<std::pair<Index, Index>> Graph::edges() const {
  std::vector<std::pair<Index, Index>> out;
  for (Index i = 0; i < size(); ++i)
    for (Index j : neighbors(i))
      if (i < j) out.emplace_back(i, j);
  return out;
}

bool Graph::connected() const {
  if (size() == 0) return false;
  std::vector<char> seen(static_cast<std::size_t>(size()), 0);
  std::vector<Index> stack{0};
  seen[0] = 1;
  Index count = 1;
  while (!stack.empty()) {
    const Index u = stack.back();
    stack.pop_back();
    for (Index v : neighbors(u)) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == size();
}

Topology parse_topology(const std::string& name) {
  if (name == "ring") return Topology::ring;
  if (name == "path") return Topology::path;
  if (name == "star") return Topology::star;
  if (name == "complete") return Topology::complete;
  if (name == "random" || name == "random_connected") return Topology::random_connected;
  throw std::invalid_argument("unknown topology '" + name + "'");
}

std::string to_string(Topology t) {
  switch (t) {
    case Topology::ring: return "ring";
    case Topology::path: return "path";
    case Topology::star: return "star";
    case Topology::complete: return "complete";
    case Topology::random_connected: return "random_connected";
  }
  return "?";
}

Graph build_topology(Topology kind, Index n, double edge_probability, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("topology needs at least 2 nodes");
  Graph g(n);
  switch (kind) {
    case Topology::ring:
      for (Index i = 0; i < n; ++i) g.add_edge(i, (i + 1) % n);
      break;
    case Topology::path:
      for (Index i = 0; i + 1 < n; ++i) g.add_edge(i, i + 1);
      break;
    case Topology::star:
      for (Index i = 1; i < n; ++i) g.add_edge(0, i);
      break;
    case Topology::complete:
      for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) g.add_edge(i, j);
      break;
    case Topology::random_connected: {
      if (!(edge_probability > 0.0 && edge_probability <= 1.0))
        throw std::invalid_argument("edge probability must be in (0, 1]");
      std::mt19937_64 rng(seed);
      std::bernoulli_distribution coin(edge_probability);
      constexpr int kMaxTries = 1000;
      for (int attempt = 0; attempt < kMaxTries; ++attempt) {
        Graph trial(n);
        for (Index i = 0; i < n; ++i)
          for (Index j = i + 1; j < n; ++j)
            if (coin(rng)) trial.add_edge(i, j);
        if (trial.connected()) return trial;
      }
      throw std::runtime_error("random topology: no connected sample after 1000 draws");
    }
  }
  return g;
}

Graph load_edge_list(const std::string& path, Index n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list '" + path + "'");
  std::vector<std::pair<Index, Index>> pairs;
  Index max_node = -1;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t\r")] == '#')
      continue;
    std::istringstream ls(line);
    Index i = -1, j = -1;
    if (!(ls >> i >> j) || i < 0 || j < 0)
      throw std::runtime_error("edge list line " + std::to_string(lineno) + ": expected two node ids");
    pairs.emplace_back(i, j);
    max_node = std::max({max_node, i, j});
  }
  const Index size = n > 0 ? n : max_node + 1;
  Graph g(size);
  for (auto [i, j] : pairs) g.add_edge(i, j);
  if (!g.connected()) throw std::runtime_error("edge list '" + path + "' describes a disconnected graph");
  return g;
}

Matrix metropolis_weights(const Graph& g) {
  if (!g.connected()) throw std::invalid_argument("metropolis weights need a connected graph");
  const Index n = g.size();
  Matrix W = Matrix::Zero(n, n);
  for (auto [i, j] : g.edges()) {
    const double w = 1.0 / (1.0 + static_cast<double>(std::max(g.degree(i), g.degree(j))));
    W(i, j) = w;
    W(j, i) = w;
  }
  for (Index i = 0; i < n; ++i) W(i, i) = 1.0 - (W.row(i).sum() - W(i, i));
  return W;
}

WeightReport validate_averaging(const Matrix& W, const Graph& g, double tol) {
  const Index n = g.size();
  auto fail = [](std::string msg) { return WeightReport{false, std::move(msg)}; };
  if (W.rows() != n || W.cols() != n) return fail("matrix size does not match graph");
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (W(i, j) != W(j, i))
        return fail("asymmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      if (W(i, j) < 0.0) return fail("negative entry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      const bool allowed = i == j || g.has_edge(i, j);
      if (allowed && !(W(i, j) > 0.0))
        return fail("zero weight on (" + std::to_string(i) + "," + std::to_string(j) + ")");
      if (!allowed && W(i, j) != 0.0)
        return fail("weight off the graph pattern at (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
    if (std::abs(W.row(i).sum() - 1.0) > tol) return fail("row " + std::to_string(i) + " does not sum to 1");
  }
  return {};
}

Matrix hat_weights(const Matrix& W, const Vector& gamma, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (gamma.size() != W.rows()) throw std::invalid_argument("one step size per node expected");
  const Index n = W.rows();
  Matrix H = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    if (!(gamma[i] >= 0.0)) throw std::domain_error("node " + std::to_string(i) + ": negative step size");
    const double ratio = gamma[i] / alpha;
    const double diag = 1.0 - (1.0 - W(i, i)) * ratio;
    if (!(diag > 0.0))
      throw std::domain_error("node " + std::to_string(i) + ": step size " + std::to_string(gamma[i]) +
                              " reaches alpha/(1-w_ii) = " + std::to_string(alpha / (1.0 - W(i, i))));
    for (Index j = 0; j < n; ++j) H(i, j) = j == i ? diag : W(i, j) * ratio;
  }
  return H;
}

}  // namespace dpbm
