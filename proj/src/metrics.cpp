#include "cpgnn/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <string>
#include <thread>

#include "cpgnn/error.hpp"

namespace cpgnn {

KhopScanner::KhopScanner(const RoadGraph& graph) : graph_(graph), stamp_(graph.num_nodes(), 0) {}

namespace {

void check_node(const RoadGraph& graph, NodeId i) {
  if (i >= graph.num_nodes()) {
    throw DataError("node id " + std::to_string(i) + " out of range (N=" + std::to_string(graph.num_nodes()) + ")");
  }
}

void check_hops(unsigned k) {
  if (k < 1) throw ConfigError("hop bound k must be >= 1");
}

void check_all_known(const LabelVector& labels, std::size_t n) {
  if (labels.size() != n) throw DataError("label vector length != num_nodes");
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_known(labels[i])) {
      throw DataError("neighbor metrics need every label known; node " + std::to_string(i) + " is unknown");
    }
  }
}

struct HopCounts {
  std::uint32_t reached = 0;
  std::uint32_t positive = 0;
};

}  // namespace

std::vector<NodeId> khop_neighbors(const RoadGraph& graph, NodeId i, unsigned k) {
  check_node(graph, i);
  check_hops(k);
  KhopScanner scanner(graph);
  std::vector<NodeId> out;
  scanner.scan(i, k, [&](NodeId j, unsigned) { out.push_back(j); });
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<double> ncd(const RoadGraph& graph, const LabelVector& labels, NodeId i, unsigned k) {
  check_node(graph, i);
  check_hops(k);
  if (labels.size() != graph.num_nodes()) throw DataError("label vector length != num_nodes");
  KhopScanner scanner(graph);
  std::size_t reached = 0, positive = 0;
  scanner.scan(i, k, [&](NodeId j, unsigned) {
    if (!is_known(labels[j])) throw DataError("unknown label at node " + std::to_string(j) + " in neighbor set");
    ++reached;
    positive += labels[j] == Label::Positive;
  });
  if (reached == 0) return std::nullopt;
  return static_cast<double>(positive) / static_cast<double>(reached);
}

int ncc(const RoadGraph& graph, const LabelVector& labels, NodeId i, unsigned k) {
  check_node(graph, i);
  check_hops(k);
  if (labels.size() != graph.num_nodes()) throw DataError("label vector length != num_nodes");
  KhopScanner scanner(graph);
  int found = 0;
  scanner.scan(i, k, [&](NodeId j, unsigned) { found |= labels[j] == Label::Positive; });
  return found;
}

ClassAverage ancd(const RoadGraph& graph, const LabelVector& labels, int z, unsigned k) {
  const auto report = metric_report(graph, labels, {k});
  const auto& c = report.at(z, k);
  return {c.ancd, c.counted_nodes, c.excluded_isolated};
}

ClassAverage ancc(const RoadGraph& graph, const LabelVector& labels, int z, unsigned k) {
  const auto report = metric_report(graph, labels, {k});
  const auto& c = report.at(z, k);
  return {c.ancc, c.counted_nodes, c.excluded_isolated};
}

const MetricCell& MetricReport::at(int z, unsigned k) const {
  if (z != 0 && z != 1) throw ConfigError("class must be 0 or 1");
  const auto it = std::find(ks.begin(), ks.end(), k);
  if (it == ks.end()) throw DataError("k not computed: " + std::to_string(k));
  return cells[z][static_cast<std::size_t>(it - ks.begin())];
}

bool MetricReport::has_k(unsigned k) const { return std::find(ks.begin(), ks.end(), k) != ks.end(); }

MetricReport metric_report(const RoadGraph& graph, const LabelVector& labels, std::vector<unsigned> ks,
                           unsigned workers) {
  if (ks.empty()) throw ConfigError("empty hop list");
  for (unsigned k : ks) check_hops(k);
  const std::size_t n = graph.num_nodes();
  check_all_known(labels, n);
  const unsigned kmax = *std::max_element(ks.begin(), ks.end());
  const std::size_t nk = ks.size();

  // counts[i * nk + kidx]: cumulative reach/positives of node i within ks[kidx] hops.
  std::vector<HopCounts> counts(n * nk);
  auto run_range = [&](std::atomic<std::size_t>& next_block) {
    constexpr std::size_t kBlock = 256;
    KhopScanner scanner(graph);
    std::vector<HopCounts> by_depth(kmax + 1);
    for (std::size_t begin = next_block.fetch_add(kBlock); begin < n; begin = next_block.fetch_add(kBlock)) {
      const std::size_t end = std::min(n, begin + kBlock);
      for (std::size_t i = begin; i < end; ++i) {
        std::fill(by_depth.begin(), by_depth.end(), HopCounts{});
        scanner.scan(static_cast<NodeId>(i), kmax, [&](NodeId j, unsigned depth) {
          ++by_depth[depth].reached;
          by_depth[depth].positive += labels[j] == Label::Positive;
        });
        for (unsigned d = 1; d <= kmax; ++d) {
          by_depth[d].reached += by_depth[d - 1].reached;
          by_depth[d].positive += by_depth[d - 1].positive;
        }
        for (std::size_t kidx = 0; kidx < nk; ++kidx) counts[i * nk + kidx] = by_depth[ks[kidx]];
      }
    }
  };

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(1, n)));
  std::atomic<std::size_t> next_block{0};
  if (workers <= 1) {
    run_range(next_block);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back([&] { run_range(next_block); });
  }

  MetricReport report;
  report.ks = std::move(ks);
  for (int z = 0; z < 2; ++z) {
    report.cells[z].resize(nk);
    for (std::size_t kidx = 0; kidx < nk; ++kidx) {
      double density_sum = 0.0, continuity_sum = 0.0;
      std::size_t counted = 0, excluded = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (class_index(labels[i]) != z) continue;
        const auto& c = counts[i * nk + kidx];
        if (c.reached == 0) {
          ++excluded;
          continue;
        }
        ++counted;
        density_sum += static_cast<double>(c.positive) / static_cast<double>(c.reached);
        continuity_sum += c.positive > 0 ? 1.0 : 0.0;
      }
      if (counted == 0) {
        throw DataError("no class-" + std::to_string(z) + " node with a non-empty " +
                        std::to_string(report.ks[kidx]) + "-hop neighborhood");
      }
      auto& cell = report.cells[z][kidx];
      cell.ancd = density_sum / static_cast<double>(counted);
      cell.ancc = continuity_sum / static_cast<double>(counted);
      cell.counted_nodes = counted;
      cell.excluded_isolated = excluded;
    }
  }
  return report;
}

nlohmann::json to_json(const MetricReport& report) {
  nlohmann::json j;
  j["k"] = report.ks;
  for (const char* key : {"ancd", "ancc", "excluded", "counted"}) j[key] = nlohmann::json::object();
  for (int z = 0; z < 2; ++z) {
    const std::string zs = std::to_string(z);
    auto& ancd_arr = j["ancd"][zs] = nlohmann::json::array();
    auto& ancc_arr = j["ancc"][zs] = nlohmann::json::array();
    auto& excl_arr = j["excluded"][zs] = nlohmann::json::array();
    auto& cnt_arr = j["counted"][zs] = nlohmann::json::array();
    for (const auto& c : report.cells[z]) {
      ancd_arr.push_back(c.ancd);
      ancc_arr.push_back(c.ancc);
      excl_arr.push_back(c.excluded_isolated);
      cnt_arr.push_back(c.counted_nodes);
    }
  }
  return j;
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
  try {
    MetricReport r;
    r.ks = j.at("k").get<std::vector<unsigned>>();
    for (int z = 0; z < 2; ++z) {
      const std::string zs = std::to_string(z);
      const auto ancd_v = j.at("ancd").at(zs).get<std::vector<double>>();
      const auto ancc_v = j.at("ancc").at(zs).get<std::vector<double>>();
      const auto excl_v = j.at("excluded").at(zs).get<std::vector<std::size_t>>();
      std::vector<std::size_t> cnt_v(r.ks.size(), 0);
      if (j.contains("counted")) cnt_v = j.at("counted").at(zs).get<std::vector<std::size_t>>();
      if (ancd_v.size() != r.ks.size() || ancc_v.size() != r.ks.size() || excl_v.size() != r.ks.size() ||
          cnt_v.size() != r.ks.size()) {
        throw DataError("metric report arrays do not match the k list");
      }
      for (std::size_t i = 0; i < r.ks.size(); ++i) r.cells[z].push_back({ancd_v[i], ancc_v[i], cnt_v[i], excl_v[i]});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed metric report: ") + e.what());
  }
}

}  // namespace cpgnn
