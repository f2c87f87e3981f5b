#include "cpgnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpgnn/error.hpp"

namespace cpgnn {

double f1_score(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw DataError("f1: length mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == 1 && truth[i] == 1) ++tp;
    else if (predicted[i] == 1) ++fp;
    else if (truth[i] == 1) ++fn;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double auc(std::span<const double> scores, std::span<const int> truth) {
  if (scores.size() != truth.size()) throw DataError("auc: length mismatch");
  const std::size_t n = scores.size();
  for (double v : scores) {
    if (!std::isfinite(v)) throw DataError("auc: non-finite score");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (truth[order[t]] == 1) {
        positive_rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("AUC undefined: evaluation set has a single class");
  const double np = static_cast<double>(n_pos);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

EvalResult evaluate(const Matrix& probs, const LabelVector& labels, const Split& split, Subset subset) {
  const auto& ids = subset == Subset::Valid ? split.valid : split.test;
  if (ids.empty()) throw DataError("evaluation subset is empty");
  if (probs.rows() != labels.size()) throw DataError("probability rows != label count");
  if (probs.cols() < 2) throw DataError("need at least two class columns");
  std::vector<int> pred, truth;
  std::vector<double> scores;
  EvalResult r;
  for (NodeId i : ids) {
    if (!is_known(labels[i])) throw DataError("evaluation node " + std::to_string(i) + " has unknown label");
    const auto row = probs.row(i);
    const int cls = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    const int y = class_index(labels[i]);
    pred.push_back(cls == 1 ? 1 : 0);
    truth.push_back(y);
    scores.push_back(row[1]);
    if (cls == 1 && y == 1) ++r.tp;
    else if (cls == 1) ++r.fp;
    else if (y == 1) ++r.fn;
    else ++r.tn;
  }
  r.n_eval = ids.size();
  r.f1 = f1_score(pred, truth);
  try {
    r.auc = auc(scores, truth);
  } catch (const DataError&) {
    r.auc.reset();
  }
  return r;
}

nlohmann::json to_json(const EvalResult& r) {
  nlohmann::json j{{"f1", r.f1}, {"tp", r.tp}, {"fp", r.fp}, {"fn", r.fn}, {"tn", r.tn}, {"n_eval", r.n_eval}};
  j["auc"] = r.auc ? nlohmann::json(*r.auc) : nlohmann::json(nullptr);
  return j;
}

}  // namespace cpgnn
