#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpgnn/graph.hpp"
#include "cpgnn/rng.hpp"
#include "json.hpp"

namespace cpgnn {

enum class Topology { Grid, RandomGeometric };
enum class LabelMode { Planted, Independent };

Topology parse_topology(const std::string& s);
LabelMode parse_label_mode(const std::string& s);
const char* to_string(Topology t);
const char* to_string(LabelMode m);

/// Positive ratios across the reference road datasets fall in this band.
inline constexpr double kMinPositiveRatio = 0.04;
inline constexpr double kMaxPositiveRatio = 0.31;

struct SynthConfig {
  std::size_t num_nodes = 2500;
  Topology topology = Topology::Grid;
  std::size_t grid_width = 0;  // 0: ceil(sqrt(num_nodes))
  double geo_radius = 0.04;
  LabelMode label_mode = LabelMode::Planted;
  std::size_t num_seeds = 25;
  double diffusion_prob = 0.5;
  std::size_t diffusion_rounds = 100;
  double target_positive_ratio = 0.10;
  std::size_t feature_dim = 8;
  std::size_t signal_dims = 4;  // leading coordinates that carry the label shift
  double feature_signal = 0.3;
  double signal_shift = 1.0;
  std::uint64_t seed = 0;

  void check() const;
};

nlohmann::json to_json(const SynthConfig& c);

/// Adjacency only (node features are N x 0). Grid: row-major lattice of width w with
/// 4-connectivity, the last row possibly partial. Random geometric: uniform points in
/// the unit square joined when within geo_radius; only the largest component is kept.
RoadGraph generate_topology(const SynthConfig& config);

/// Seeds `num_seeds` positives, then grows them: each round, every negative node
/// adjacent to a positive turns positive with probability diffusion_prob, stopping the
/// moment the target count is reached. Fails when the final ratio is off target by
/// more than 20% relative.
LabelVector plant_labels(const RoadGraph& graph, const SynthConfig& config, Rng& rng);

/// Negative control: every node positive independently with probability `ratio`.
LabelVector independent_labels(std::size_t n, double ratio, Rng& rng);

/// Standard-normal noise plus feature_signal * signal_shift on the first signal_dims
/// coordinates of positive nodes.
Matrix generate_features(const RoadGraph& graph, const LabelVector& labels, const SynthConfig& config, Rng& rng);

struct SynthDataset {
  RoadGraph graph;
  LabelVector labels;
  SynthConfig config;
};

/// Topology, labels and features from independent streams of config.seed.
SynthDataset generate_dataset(const SynthConfig& config);

/// `count` datasets with per-dataset seeds and jittered size/ratio (+-20%).
std::vector<SynthDataset> generate_suite(std::size_t count, const SynthConfig& base, std::uint64_t seed);

}  // namespace cpgnn
