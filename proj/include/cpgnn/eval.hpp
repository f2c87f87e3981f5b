#pragma once

#include <optional>
#include <span>
#include <string>

#include "cpgnn/graph.hpp"
#include "cpgnn/matrix.hpp"
#include "json.hpp"

namespace cpgnn {

/// Positive-class F1: 2TP / (2TP + FP + FN), 0 when the denominator is 0.
double f1_score(std::span<const int> predicted, std::span<const int> truth);

/// Rank-based ROC AUC (Mann-Whitney U with average ranks for ties).
/// Throws DataError when truth holds a single class.
double auc(std::span<const double> scores, std::span<const int> truth);

enum class Subset { Valid, Test };

struct EvalResult {
  double f1 = 0.0;
  std::optional<double> auc;  // nullopt when the subset has a single class
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t n_eval = 0;
};

/// Scores a probability matrix (N x C, column 1 = positive) on the chosen subset.
/// Hard predictions are the row argmax.
EvalResult evaluate(const Matrix& probs, const LabelVector& labels, const Split& split, Subset subset);

nlohmann::json to_json(const EvalResult& r);

}  // namespace cpgnn
