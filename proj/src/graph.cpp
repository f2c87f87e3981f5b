#include "cpgnn/graph.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <string>

#include "cpgnn/error.hpp"
#include "cpgnn/rng.hpp"

namespace cpgnn {

namespace {

bool all_finite(const Matrix& m) {
  return std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

RoadGraph RoadGraph::build(std::size_t num_nodes, std::span<const std::pair<NodeId, NodeId>> edges,
                           Matrix node_features, Matrix edge_features, BuildStats* stats) {
  if (num_nodes > std::numeric_limits<NodeId>::max()) throw DataError("too many nodes");
  if (node_features.empty() && node_features.rows() == 0) node_features = Matrix(num_nodes, 0);
  if (node_features.rows() != num_nodes) {
    throw DataError("node feature rows (" + std::to_string(node_features.rows()) + ") != num_nodes (" +
                    std::to_string(num_nodes) + ")");
  }
  const bool has_edge_features = edge_features.rows() > 0 || edge_features.cols() > 0;
  if (has_edge_features && edge_features.rows() != edges.size()) {
    throw DataError("edge feature rows (" + std::to_string(edge_features.rows()) + ") != edge list length (" +
                    std::to_string(edges.size()) + ")");
  }
  if (!all_finite(node_features)) throw DataError("non-finite node feature value");
  if (!all_finite(edge_features)) throw DataError("non-finite edge feature value");

  BuildStats local;
  // (canonical edge, input position); stable sort keeps the first occurrence first.
  std::vector<std::pair<Edge, std::size_t>> canon;
  canon.reserve(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto [a, b] = edges[e];
    if (a >= num_nodes || b >= num_nodes) {
      throw DataError("dangling node id " + std::to_string(std::max(a, b)) + " in edge " + std::to_string(e));
    }
    if (a == b) {
      ++local.self_loops_dropped;
      continue;
    }
    canon.push_back({Edge{std::min(a, b), std::max(a, b)}, e});
  }
  std::stable_sort(canon.begin(), canon.end(),
                   [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<std::pair<Edge, std::size_t>> unique;
  unique.reserve(canon.size());
  for (const auto& item : canon) {
    if (!unique.empty() && unique.back().first == item.first) {
      ++local.duplicates_collapsed;
      continue;
    }
    unique.push_back(item);
  }

  RoadGraph g;
  const std::size_t d2 = edge_features.cols();
  g.edge_features_ = Matrix(unique.size(), d2);
  g.edges_.reserve(unique.size());
  for (std::size_t e = 0; e < unique.size(); ++e) {
    g.edges_.push_back(unique[e].first);
    if (has_edge_features) {
      auto src = edge_features.row(unique[e].second);
      std::copy(src.begin(), src.end(), g.edge_features_.row(e).begin());
    }
  }

  std::vector<EdgeOffset> degree(num_nodes + 1, 0);
  for (const auto& e : g.edges_) {
    ++degree[e.u + 1];
    ++degree[e.v + 1];
  }
  std::partial_sum(degree.begin(), degree.end(), degree.begin());
  g.offsets_ = degree;
  g.neighbors_.assign(2 * g.edges_.size(), 0);
  std::vector<EdgeOffset> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  for (const auto& e : g.edges_) {
    g.neighbors_[cursor[e.u]++] = e.v;
    g.neighbors_[cursor[e.v]++] = e.u;
  }
  for (std::size_t i = 0; i < num_nodes; ++i) {
    std::sort(g.neighbors_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i]),
              g.neighbors_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i + 1]));
  }
  g.node_features_ = std::move(node_features);
  if (stats) *stats = local;
  return g;
}

RoadGraph RoadGraph::from_csr(std::vector<EdgeOffset> offsets, std::vector<NodeId> neighbors,
                              std::vector<Edge> edges, Matrix node_features, Matrix edge_features) {
  RoadGraph g;
  const std::size_t n = offsets.empty() ? 0 : offsets.size() - 1;
  if (edges.empty()) {
    // Derive from the upper triangle of the rows; whatever is malformed stays visible to validate().
    for (std::size_t i = 0; i < n; ++i) {
      for (EdgeOffset p = offsets[i]; p < offsets[i + 1] && p < neighbors.size(); ++p) {
        if (neighbors[p] > i) edges.push_back(Edge{static_cast<NodeId>(i), neighbors[p]});
      }
    }
  }
  if (node_features.rows() == 0 && node_features.cols() == 0) node_features = Matrix(n, 0);
  if (edge_features.rows() == 0 && edge_features.cols() == 0) edge_features = Matrix(edges.size(), 0);
  g.offsets_ = std::move(offsets);
  g.neighbors_ = std::move(neighbors);
  g.edges_ = std::move(edges);
  g.node_features_ = std::move(node_features);
  g.edge_features_ = std::move(edge_features);
  return g;
}

RoadGraph RoadGraph::with_node_features(Matrix features) const {
  if (features.rows() != num_nodes()) throw DataError("feature rows do not match num_nodes");
  if (!all_finite(features)) throw DataError("non-finite node feature value");
  RoadGraph g = *this;
  g.node_features_ = std::move(features);
  return g;
}

ValidationReport validate(const RoadGraph& graph) {
  ValidationReport report;
  auto& v = report.violations;
  const auto& off = graph.offsets();
  const auto& nbr = graph.neighbor_ids();
  if (off.empty()) {
    v.push_back("empty offsets array");
    return report;
  }
  const std::size_t n = off.size() - 1;
  if (off.front() != 0) v.push_back("offsets[0] != 0");
  bool monotone = true;
  for (std::size_t i = 0; i + 1 < off.size(); ++i) {
    if (off[i] > off[i + 1]) {
      monotone = false;
      v.push_back("non-monotone offsets at row " + std::to_string(i));
      break;
    }
  }
  if (off.back() != nbr.size()) v.push_back("offsets[N] != neighbor array length");
  if (nbr.size() % 2 != 0) v.push_back("odd neighbor array length");
  if (!monotone || off.back() > nbr.size() || off.front() != 0) return report;

  for (std::size_t i = 0; i < n; ++i) {
    for (EdgeOffset p = off[i]; p < off[i + 1]; ++p) {
      const NodeId j = nbr[p];
      if (j >= n) {
        v.push_back("neighbor id " + std::to_string(j) + " out of range in row " + std::to_string(i));
        continue;
      }
      if (j == i) v.push_back("self-loop at node " + std::to_string(i));
      if (p > off[i]) {
        if (nbr[p - 1] == j) {
          v.push_back("duplicate neighbor " + std::to_string(j) + " in row " + std::to_string(i));
        } else if (nbr[p - 1] > j) {
          v.push_back("unsorted neighbor row " + std::to_string(i));
        }
      }
      auto back = std::span<const NodeId>(nbr.data() + off[j], static_cast<std::size_t>(off[j + 1] - off[j]));
      if (std::find(back.begin(), back.end(), static_cast<NodeId>(i)) == back.end()) {
        v.push_back("asymmetric edge " + std::to_string(i) + "->" + std::to_string(j));
      }
    }
  }

  const auto& edges = graph.edges();
  if (!edges.empty() || graph.num_edges() > 0) {
    if (edges.size() != graph.num_edges()) {
      v.push_back("edge list length " + std::to_string(edges.size()) + " != E " +
                  std::to_string(graph.num_edges()));
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (edges[e].u >= edges[e].v) v.push_back("non-canonical edge " + std::to_string(e));
      if (e > 0 && !(edges[e - 1] < edges[e])) v.push_back("edge list not strictly ascending at " + std::to_string(e));
    }
  }
  if (graph.node_features().rows() != n) v.push_back("node feature rows != N");
  if (graph.edge_features().rows() != edges.size()) v.push_back("edge feature rows != E");
  if (!all_finite(graph.node_features())) v.push_back("non-finite node feature");
  if (!all_finite(graph.edge_features())) v.push_back("non-finite edge feature");
  return report;
}

ValidationReport validate_split(const Split& split, const LabelVector& labels) {
  ValidationReport report;
  std::vector<int> seen(labels.size(), 0);
  auto mark = [&](const std::vector<NodeId>& set, const char* name, bool needs_label) {
    for (NodeId i : set) {
      if (i >= labels.size()) {
        report.violations.push_back(std::string(name) + " id " + std::to_string(i) + " out of range");
        continue;
      }
      if (seen[i]++) report.violations.push_back("node " + std::to_string(i) + " in more than one set");
      if (needs_label && !is_known(labels[i])) {
        report.violations.push_back(std::string(name) + " node " + std::to_string(i) + " has unknown label");
      }
    }
  };
  mark(split.train, "train", true);
  mark(split.valid, "valid", true);
  mark(split.test, "test", false);
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] == 0) {
      report.violations.push_back("node " + std::to_string(i) + " not assigned");
      break;
    }
  }
  return report;
}

Split stratified_split(const LabelVector& labels, SplitRatios ratios, std::uint64_t seed) {
  if (!(ratios.train > 0.0 && ratios.valid > 0.0 && ratios.test > 0.0)) {
    throw ConfigError("split ratios must all be positive");
  }
  if (std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
  std::array<std::vector<NodeId>, 2> members;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!is_known(labels[i])) throw DataError("stratified split needs every label known (node " + std::to_string(i) + ")");
    members[class_index(labels[i])].push_back(static_cast<NodeId>(i));
  }
  Split split;
  for (int c = 0; c < 2; ++c) {
    auto& ids = members[c];
    if (ids.size() < 3) {
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(ids.size()) +
                      " members; at least 3 are needed for a three-way split");
    }
    Rng rng(derive_seed(seed, 0x5e1175ULL, static_cast<std::uint64_t>(c)));
    rng.shuffle(std::span<NodeId>(ids));
    const double size = static_cast<double>(ids.size());
    const auto n_valid = static_cast<std::size_t>(std::floor(ratios.valid * size));
    const auto n_test = static_cast<std::size_t>(std::floor(ratios.test * size));
    split.valid.insert(split.valid.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_valid));
    split.test.insert(split.test.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_valid),
                      ids.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test));
    split.train.insert(split.train.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test), ids.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.valid.begin(), split.valid.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace cpgnn
