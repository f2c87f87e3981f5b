#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cpgnn/graph.hpp"
#include "json.hpp"

namespace cpgnn {

/// Hop grid used when none is given.
inline const std::vector<unsigned> kDefaultHops{1, 2, 4, 8, 10};

/// Frontier BFS over a RoadGraph with an epoch-stamped visited array, so repeated
/// scans from different sources do not reallocate or clear.
///
/// One scanner per thread; the graph is shared read-only.
class KhopScanner {
 public:
  explicit KhopScanner(const RoadGraph& graph);

  /// Visits every node j != source with hop distance in [1, max_hops], in BFS layer order.
  /// `visit(j, depth)` is called once per reached node.
  template <typename Visit>
  void scan(NodeId source, unsigned max_hops, Visit&& visit);

 private:
  const RoadGraph& graph_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
  std::vector<NodeId> frontier_;
  std::vector<NodeId> next_;
};

/// Nodes j != i within k hops of i, ascending.
std::vector<NodeId> khop_neighbors(const RoadGraph& graph, NodeId i, unsigned k);

/// Fraction of positive k-hop neighbors; nullopt for an empty neighborhood.
std::optional<double> ncd(const RoadGraph& graph, const LabelVector& labels, NodeId i, unsigned k);

/// 1 when some k-hop neighbor is positive, else 0 (also 0 for isolated nodes).
int ncc(const RoadGraph& graph, const LabelVector& labels, NodeId i, unsigned k);

/// Class-conditional average. Nodes of class z with an empty k-hop neighborhood are
/// left out of the mean and counted in `excluded_isolated`.
struct ClassAverage {
  double value = 0.0;
  std::size_t counted_nodes = 0;
  std::size_t excluded_isolated = 0;
  bool operator==(const ClassAverage&) const = default;
};

ClassAverage ancd(const RoadGraph& graph, const LabelVector& labels, int z, unsigned k);
ClassAverage ancc(const RoadGraph& graph, const LabelVector& labels, int z, unsigned k);

struct MetricCell {
  double ancd = 0.0;
  double ancc = 0.0;
  std::size_t counted_nodes = 0;
  std::size_t excluded_isolated = 0;
  bool operator==(const MetricCell&) const = default;
};

/// ANCD/ANCC for both classes at every requested hop bound.
struct MetricReport {
  std::vector<unsigned> ks;
  // cells[z][kidx]
  std::vector<MetricCell> cells[2];

  const MetricCell& at(int z, unsigned k) const;
  bool has_k(unsigned k) const;
  bool operator==(const MetricReport& o) const {
    return ks == o.ks && cells[0] == o.cells[0] && cells[1] == o.cells[1];
  }
};

/// Runs one bounded BFS per node (up to max(ks)) across `workers` threads and
/// reduces the per-node results sequentially in node-id order, so the report is
/// bitwise identical for any worker count. workers == 0 picks hardware concurrency.
MetricReport metric_report(const RoadGraph& graph, const LabelVector& labels, std::vector<unsigned> ks,
                           unsigned workers = 1);

nlohmann::json to_json(const MetricReport& report);
MetricReport metric_report_from_json(const nlohmann::json& j);

// ---- template implementation ----

template <typename Visit>
void KhopScanner::scan(NodeId source, unsigned max_hops, Visit&& visit) {
  if (++epoch_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    epoch_ = 1;
  }
  stamp_[source] = epoch_;
  frontier_.clear();
  frontier_.push_back(source);
  for (unsigned depth = 1; depth <= max_hops && !frontier_.empty(); ++depth) {
    next_.clear();
    for (NodeId u : frontier_) {
      for (NodeId w : graph_.neighbors(u)) {
        if (stamp_[w] == epoch_) continue;
        stamp_[w] = epoch_;
        next_.push_back(w);
        visit(w, depth);
      }
    }
    frontier_.swap(next_);
  }
}

}  // namespace cpgnn
