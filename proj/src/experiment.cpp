#include "cpgnn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "cpgnn/error.hpp"

namespace cpgnn {

MeanSd mean_sd(const std::vector<double>& values) {
  MeanSd m;
  m.n = values.size();
  if (values.empty()) return m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

std::vector<RunOutcome> run_arm(const RoadGraph& graph, const LabelVector& labels, const Split& split,
                                const TrainConfig& config, std::size_t num_seeds, unsigned workers) {
  config.check();
  if (num_seeds < 1) throw ConfigError("need at least one seed");
  std::vector<RunOutcome> runs(num_seeds);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t r = next++; r < num_seeds; r = next++) {
      try {
        TrainConfig c = config;
        c.seed = config.seed + r;
        RunOutcome& out = runs[r];
        out.seed = c.seed;
        out.trained = train(graph, labels, split, c);
        const Matrix probs = predict(out.trained.model, graph, labels, split);
        out.valid = evaluate(probs, labels, split, Subset::Valid);
        out.test = evaluate(probs, labels, split, Subset::Test);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  workers = static_cast<unsigned>(std::clamp<std::size_t>(workers, 1, num_seeds));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return runs;
}

nlohmann::json to_json(const MeanSd& m) { return {{"mean", m.mean}, {"sd", m.sd}, {"n", m.n}}; }

nlohmann::json summarize(const std::vector<RunOutcome>& runs, Subset subset) {
  std::vector<double> f1, auc_values;
  for (const auto& r : runs) {
    const auto& e = subset == Subset::Valid ? r.valid : r.test;
    f1.push_back(e.f1);
    if (e.auc) auc_values.push_back(*e.auc);
  }
  return {{"f1", to_json(mean_sd(f1))}, {"auc", to_json(mean_sd(auc_values))}};
}

unsigned default_workers() {
  if (const char* env = std::getenv("CPGNN_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return 1;
}

}  // namespace cpgnn
