#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpgnn/matrix.hpp"

namespace cpgnn {

using NodeId = std::uint32_t;
using EdgeOffset = std::uint64_t;

/// Undirected edge with canonical orientation u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

/// Immutable monolithic road graph.
///
/// Adjacency is stored as CSR with each undirected edge present in both endpoint
/// rows, neighbor lists sorted ascending. `edges()` lists the undirected edges in
/// canonical (u < v, lexicographic) order; row e of `edge_features()` belongs to
/// `edges()[e]`.
class RoadGraph {
 public:
  RoadGraph() = default;

  /// Checked construction from an edge list. Edges are symmetrized, self-loops and
  /// duplicates are removed (the first occurrence keeps its features). Throws
  /// DataError on out-of-range ids, shape mismatch or non-finite features.
  struct BuildStats {
    std::size_t self_loops_dropped = 0;
    std::size_t duplicates_collapsed = 0;
  };
  static RoadGraph build(std::size_t num_nodes, std::span<const std::pair<NodeId, NodeId>> edges,
                         Matrix node_features = {}, Matrix edge_features = {},
                         BuildStats* stats = nullptr);

  /// Raw assembly, no checks. Use `validate` on the result.
  static RoadGraph from_csr(std::vector<EdgeOffset> offsets, std::vector<NodeId> neighbors,
                            std::vector<Edge> edges = {}, Matrix node_features = {},
                            Matrix edge_features = {});

  std::size_t num_nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_edges() const { return neighbors_.size() / 2; }

  std::span<const NodeId> neighbors(NodeId i) const {
    return {neighbors_.data() + offsets_[i], static_cast<std::size_t>(offsets_[i + 1] - offsets_[i])};
  }
  std::size_t degree(NodeId i) const { return static_cast<std::size_t>(offsets_[i + 1] - offsets_[i]); }

  const std::vector<EdgeOffset>& offsets() const { return offsets_; }
  const std::vector<NodeId>& neighbor_ids() const { return neighbors_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Matrix& node_features() const { return node_features_; }
  const Matrix& edge_features() const { return edge_features_; }

  /// Same topology, replaced node features (row count must equal num_nodes).
  RoadGraph with_node_features(Matrix features) const;

  bool operator==(const RoadGraph&) const = default;

 private:
  std::vector<EdgeOffset> offsets_{0};
  std::vector<NodeId> neighbors_;
  std::vector<Edge> edges_;
  Matrix node_features_;
  Matrix edge_features_;
};

enum class Label : std::uint8_t { Negative = 0, Positive = 1, Unknown = 2 };

using LabelVector = std::vector<Label>;

inline bool is_known(Label l) { return l != Label::Unknown; }
inline int class_index(Label l) { return static_cast<int>(l); }
inline Label label_from_class(int c) { return c == 1 ? Label::Positive : Label::Negative; }

/// Disjoint train/valid/test node sets, each sorted ascending.
struct Split {
  std::vector<NodeId> train;
  std::vector<NodeId> valid;
  std::vector<NodeId> test;
  bool operator==(const Split&) const = default;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks every RoadGraph invariant. Pure; violations are reported, never thrown.
ValidationReport validate(const RoadGraph& graph);

/// Checks the Split invariants against N and the labels.
ValidationReport validate_split(const Split& split, const LabelVector& labels);

/// Fractions for train, valid, test.
struct SplitRatios {
  double train = 0.6;
  double valid = 0.2;
  double test = 0.2;
};

/// Per-class stratified split. Within each class, valid and test receive
/// floor(ratio * class_size) members and train the remainder. Members are drawn by a
/// seeded shuffle of the class's node ids in ascending order.
Split stratified_split(const LabelVector& labels, SplitRatios ratios, std::uint64_t seed);

// ---- CSV / JSON file formats ----

struct Dataset {
  RoadGraph graph;
  LabelVector labels;
  RoadGraph::BuildStats load_stats;
};

/// Reads nodes.csv (`node_id,f_0..,label`) and edges.csv (`src,dst,g_0..`).
Dataset load_graph(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path);

/// Writes the same two formats. Numbers use shortest round-trip representation.
void save_graph(const RoadGraph& graph, const LabelVector& labels, const std::filesystem::path& nodes_path,
                const std::filesystem::path& edges_path);

Split load_split(const std::filesystem::path& path);
void save_split(const Split& split, const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace cpgnn
