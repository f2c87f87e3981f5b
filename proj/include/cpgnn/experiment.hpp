#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpgnn/eval.hpp"
#include "cpgnn/gnn.hpp"
#include "cpgnn/graph.hpp"
#include "json.hpp"

namespace cpgnn {

struct RunOutcome {
  std::uint64_t seed = 0;
  TrainResult trained;
  EvalResult valid;
  EvalResult test;
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for a single value
  std::size_t n = 0;
};

MeanSd mean_sd(const std::vector<double>& values);

/// Trains `num_seeds` independent runs with seeds config.seed + r, fanned out over
/// `workers` threads. Outcomes are ordered by r regardless of scheduling.
std::vector<RunOutcome> run_arm(const RoadGraph& graph, const LabelVector& labels, const Split& split,
                                const TrainConfig& config, std::size_t num_seeds, unsigned workers = 1);

/// {"f1": MeanSd, "auc": MeanSd} over the chosen subset; runs whose subset AUC is
/// undefined are left out of the AUC summary.
nlohmann::json summarize(const std::vector<RunOutcome>& runs, Subset subset);

nlohmann::json to_json(const MeanSd& m);

/// Worker count from CPGNN_WORKERS, else 1.
unsigned default_workers();

}  // namespace cpgnn
