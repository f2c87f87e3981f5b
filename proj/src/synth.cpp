#include "cpgnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cpgnn/error.hpp"

namespace cpgnn {

namespace {

constexpr std::uint64_t kTopologyStream = 0x70b0ULL;
constexpr std::uint64_t kLabelStream = 0x1abeULL;
constexpr std::uint64_t kFeatureStream = 0xfea7ULL;
constexpr std::uint64_t kSuiteStream = 0x5017eULL;
constexpr std::uint64_t kJitterStream = 0x7177eULL;

RoadGraph grid_graph(std::size_t n, std::size_t width) {
  if (width == 0) width = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t col = i % width;
    if (col + 1 < width && i + 1 < n) edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(i + 1)});
    if (i + width < n) edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(i + width)});
  }
  return RoadGraph::build(n, edges);
}

RoadGraph random_geometric_graph(std::size_t n, double radius, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kTopologyStream));
  std::vector<double> px(n), py(n);
  for (std::size_t i = 0; i < n; ++i) {
    px[i] = rng.uniform();
    py[i] = rng.uniform();
  }
  // Bucket points into cells of side >= radius so only adjacent cells need checking.
  const double max_cells = std::max(1.0, std::ceil(std::sqrt(static_cast<double>(n))));
  const auto cells = static_cast<std::size_t>(std::clamp(std::floor(1.0 / radius), 1.0, max_cells));
  auto cell_of = [&](double v) { return std::min(cells - 1, static_cast<std::size_t>(v * static_cast<double>(cells))); };
  std::vector<std::vector<NodeId>> bucket(cells * cells);
  for (std::size_t i = 0; i < n; ++i) bucket[cell_of(py[i]) * cells + cell_of(px[i])].push_back(static_cast<NodeId>(i));

  const double r2 = radius * radius;
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cx = cell_of(px[i]), cy = cell_of(py[i]);
    for (std::size_t y = cy == 0 ? 0 : cy - 1; y <= std::min(cells - 1, cy + 1); ++y) {
      for (std::size_t x = cx == 0 ? 0 : cx - 1; x <= std::min(cells - 1, cx + 1); ++x) {
        for (NodeId j : bucket[y * cells + x]) {
          if (j <= i) continue;
          const double dx = px[i] - px[j], dy = py[i] - py[j];
          if (dx * dx + dy * dy <= r2) edges.push_back({static_cast<NodeId>(i), j});
        }
      }
    }
  }
  RoadGraph full = RoadGraph::build(n, edges);

  // Largest connected component, ids relabeled in ascending original order.
  std::vector<std::uint32_t> comp(n, 0);
  std::uint32_t ncomp = 0, best = 0;
  std::size_t best_size = 0;
  std::vector<NodeId> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s]) continue;
    ++ncomp;
    std::size_t size = 0;
    stack.push_back(static_cast<NodeId>(s));
    comp[s] = ncomp;
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      ++size;
      for (NodeId w : full.neighbors(u)) {
        if (!comp[w]) {
          comp[w] = ncomp;
          stack.push_back(w);
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best = ncomp;
    }
  }
  if (2 * best_size < n) {
    throw ConfigError("radius too small: largest component holds " + std::to_string(best_size) + " of " +
                      std::to_string(n) + " nodes");
  }
  std::vector<NodeId> new_id(n, 0);
  NodeId next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (comp[i] == best) new_id[i] = next++;
  }
  std::vector<std::pair<NodeId, NodeId>> kept;
  for (const auto& e : full.edges()) {
    if (comp[e.u] == best) kept.push_back({new_id[e.u], new_id[e.v]});
  }
  return RoadGraph::build(best_size, kept);
}

}  // namespace

Topology parse_topology(const std::string& s) {
  if (s == "grid") return Topology::Grid;
  if (s == "rgg" || s == "random-geometric") return Topology::RandomGeometric;
  throw ConfigError("topology must be grid or rgg, got '" + s + "'");
}

LabelMode parse_label_mode(const std::string& s) {
  if (s == "planted") return LabelMode::Planted;
  if (s == "independent") return LabelMode::Independent;
  throw ConfigError("label mode must be planted or independent, got '" + s + "'");
}

const char* to_string(Topology t) { return t == Topology::Grid ? "grid" : "rgg"; }
const char* to_string(LabelMode m) { return m == LabelMode::Planted ? "planted" : "independent"; }

void SynthConfig::check() const {
  if (num_nodes < 1) throw ConfigError("num_nodes must be >= 1");
  if (topology == Topology::RandomGeometric && !(geo_radius > 0.0)) throw ConfigError("geo_radius must be > 0");
  if (!(diffusion_prob >= 0.0 && diffusion_prob <= 1.0)) throw ConfigError("diffusion_prob must lie in [0, 1]");
  if (!(target_positive_ratio >= kMinPositiveRatio && target_positive_ratio <= kMaxPositiveRatio)) {
    throw ConfigError("target positive ratio must lie in [0.04, 0.31]");
  }
  if (!(feature_signal >= 0.0 && feature_signal <= 1.0)) throw ConfigError("feature_signal must lie in [0, 1]");
  if (signal_dims > feature_dim) throw ConfigError("signal_dims exceeds feature_dim");
  if (!std::isfinite(signal_shift)) throw ConfigError("signal_shift must be finite");
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"num_nodes", c.num_nodes},
          {"topology", to_string(c.topology)},
          {"grid_width", c.grid_width},
          {"geo_radius", c.geo_radius},
          {"label_mode", to_string(c.label_mode)},
          {"num_seeds", c.num_seeds},
          {"diffusion_prob", c.diffusion_prob},
          {"diffusion_rounds", c.diffusion_rounds},
          {"target_positive_ratio", c.target_positive_ratio},
          {"feature_dim", c.feature_dim},
          {"signal_dims", c.signal_dims},
          {"feature_signal", c.feature_signal},
          {"signal_shift", c.signal_shift},
          {"seed", c.seed}};
}

RoadGraph generate_topology(const SynthConfig& config) {
  config.check();
  if (config.topology == Topology::Grid) return grid_graph(config.num_nodes, config.grid_width);
  return random_geometric_graph(config.num_nodes, config.geo_radius, config.seed);
}

LabelVector plant_labels(const RoadGraph& graph, const SynthConfig& config, Rng& rng) {
  const std::size_t n = graph.num_nodes();
  const double target = config.target_positive_ratio;
  const auto target_count = static_cast<std::size_t>(std::llround(target * static_cast<double>(n)));
  LabelVector labels(n, Label::Negative);

  std::vector<NodeId> ids(n);
  std::iota(ids.begin(), ids.end(), NodeId{0});
  const std::size_t num_seeds = std::min(config.num_seeds, n);
  for (std::size_t i = 0; i < num_seeds; ++i) {
    std::swap(ids[i], ids[i + static_cast<std::size_t>(rng.below(n - i))]);
    labels[ids[i]] = Label::Positive;
  }
  std::size_t count = num_seeds;

  // One coin per (round, node), independent of diffusion_prob, so a higher
  // probability grows a superset of the positives of a lower one.
  const std::uint64_t coin_seed = rng.next();
  std::vector<NodeId> frontier;
  for (std::size_t round = 0; round < config.diffusion_rounds && count < target_count; ++round) {
    frontier.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == Label::Positive) continue;
      const auto nb = graph.neighbors(static_cast<NodeId>(i));
      if (std::any_of(nb.begin(), nb.end(), [&](NodeId j) { return labels[j] == Label::Positive; })) {
        frontier.push_back(static_cast<NodeId>(i));
      }
    }
    if (frontier.empty()) break;
    for (NodeId i : frontier) {
      if (unit_from_bits(derive_seed(coin_seed, round, i)) < config.diffusion_prob) {
        labels[i] = Label::Positive;
        if (++count >= target_count) break;
      }
    }
  }

  const double ratio = static_cast<double>(count) / static_cast<double>(n);
  if (std::abs(ratio - target) > 0.2 * target) {
    throw DataError("unreachable target positive ratio " + std::to_string(target) + ": planted " +
                    std::to_string(count) + " of " + std::to_string(n) + " nodes");
  }
  return labels;
}

LabelVector independent_labels(std::size_t n, double ratio, Rng& rng) {
  LabelVector labels(n, Label::Negative);
  for (auto& l : labels) {
    if (rng.uniform() < ratio) l = Label::Positive;
  }
  return labels;
}

Matrix generate_features(const RoadGraph& graph, const LabelVector& labels, const SynthConfig& config, Rng& rng) {
  const std::size_t n = graph.num_nodes();
  if (labels.size() != n) throw DataError("label count != num_nodes");
  Matrix x(n, config.feature_dim);
  const double shift = config.feature_signal * config.signal_shift;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(i);
    for (double& v : row) v = rng.normal();
    if (labels[i] == Label::Positive) {
      for (std::size_t j = 0; j < config.signal_dims; ++j) row[j] += shift;
    }
  }
  return x;
}

SynthDataset generate_dataset(const SynthConfig& config) {
  SynthDataset ds;
  ds.config = config;
  const RoadGraph topo = generate_topology(config);
  Rng label_rng(derive_seed(config.seed, kLabelStream));
  ds.labels = config.label_mode == LabelMode::Planted
                  ? plant_labels(topo, config, label_rng)
                  : independent_labels(topo.num_nodes(), config.target_positive_ratio, label_rng);
  Rng feature_rng(derive_seed(config.seed, kFeatureStream));
  ds.graph = topo.with_node_features(generate_features(topo, ds.labels, config, feature_rng));
  return ds;
}

std::vector<SynthDataset> generate_suite(std::size_t count, const SynthConfig& base, std::uint64_t seed) {
  base.check();
  std::vector<SynthDataset> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    Rng jitter(derive_seed(seed, kJitterStream, j));
    SynthConfig c = base;
    c.seed = derive_seed(seed, kSuiteStream, j);
    c.grid_width = 0;
    c.num_nodes = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(base.num_nodes) * jitter.uniform(0.8, 1.2))));
    c.target_positive_ratio =
        std::clamp(base.target_positive_ratio * jitter.uniform(0.8, 1.2), kMinPositiveRatio, kMaxPositiveRatio);
    c.num_seeds = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(base.num_seeds) * static_cast<double>(c.num_nodes) /
                                                 static_cast<double>(base.num_nodes))));
    out.push_back(generate_dataset(c));
  }
  return out;
}

}  // namespace cpgnn
