#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cpgnn/graph.hpp"
#include "cpgnn/matrix.hpp"
#include "cpgnn/rng.hpp"
#include "json.hpp"

namespace cpgnn {

/// Square CSR matrix with explicit values.
struct SparseMatrix {
  std::size_t n = 0;
  std::vector<EdgeOffset> offsets{0};
  std::vector<NodeId> cols;
  std::vector<double> values;

  /// this * dense
  Matrix multiply(const Matrix& dense) const;
  Matrix to_dense() const;
};

/// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
SparseMatrix normalize_adjacency(const RoadGraph& graph);

/// Token ids per node: 0 is the uncertain token, class c maps to c + 1.
using TokenVector = std::vector<std::uint32_t>;

/// Tokens from train labels only; nodes outside train or inside `mask` get 0.
TokenVector tokenize_labels(const LabelVector& labels, const Split& split, std::span<const NodeId> mask);

/// floor(rate * n) distinct node ids drawn uniformly from 0..n-1, ascending.
/// rate must lie in (0, 0.5).
std::vector<NodeId> sample_mask(std::size_t n, double rate, Rng& rng);

/// Two-layer graph convolution classifier. When `token_table` is non-empty the
/// model carries the label-token dictionary ((C+1) x d, row 0 = uncertain) whose
/// rows are added to the first layer's activations.
struct CpGcnModel {
  Matrix w1;               // D1 x d
  std::vector<double> b1;  // d
  Matrix w2;               // d x C
  std::vector<double> b2;  // C
  Matrix token_table;      // (C+1) x d, empty for the baseline

  std::size_t input_dim() const { return w1.rows(); }
  std::size_t hidden_dim() const { return w1.cols(); }
  std::size_t num_classes() const { return w2.cols(); }
  bool uses_cp() const { return !token_table.empty(); }
  std::size_t parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size() + token_table.size();
  }

  /// Glorot-uniform weights, zero biases, token rows uniform in [-1/sqrt(d), 1/sqrt(d)],
  /// drawn from `seed` in that order.
  static CpGcnModel init(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes, bool use_cp,
                         std::uint64_t seed);

  bool operator==(const CpGcnModel&) const = default;
};

/// Extra parameters the token dictionary adds: (C + 1) * d.
std::size_t count_cp_params(std::size_t num_classes, std::size_t hidden_dim);

struct ForwardCache {
  Matrix ax;         // A X
  Matrix pre1;       // A X W1 + b1
  Matrix hidden;     // relu(pre1) (+ token rows)
  Matrix a_hidden;   // A hidden
  Matrix log_probs;  // row-wise log-softmax of A hidden W2 + b2
};

/// Tokens must be given exactly when the model uses CP.
ForwardCache forward(const CpGcnModel& model, const SparseMatrix& adj, const Matrix& x,
                     const TokenVector* tokens);

struct ModelGrads {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
  Matrix token_table;
};

struct LossAndGrads {
  double loss = 0.0;
  ModelGrads grads;
};

/// Mean cross-entropy over `train_idx` and its analytic gradient.
LossAndGrads loss_and_grads(const CpGcnModel& model, const SparseMatrix& adj, const Matrix& x,
                            const TokenVector* tokens, const LabelVector& labels,
                            std::span<const NodeId> train_idx);

struct TrainConfig {
  double mask_rate = 0.25;
  double learning_rate = 0.5;
  double weight_decay = 5e-4;
  std::size_t epochs = 200;
  std::size_t hidden_dim = 16;
  std::uint64_t seed = 0;
  bool use_cp = true;

  /// Throws ConfigError when a field is out of range.
  void check() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double val_f1 = 0.0;
};

struct TrainResult {
  CpGcnModel model;
  std::vector<EpochRecord> history;
};

/// Full-batch gradient descent with L2 weight decay folded into the gradient.
/// CP runs draw a fresh mask each epoch from a stream keyed by (seed, epoch).
TrainResult train(const RoadGraph& graph, const LabelVector& labels, const Split& split,
                  const TrainConfig& config);

/// Class probabilities (N x C) from one unmasked forward pass. CP models see the
/// train labels; every other node carries the uncertain token.
Matrix predict(const CpGcnModel& model, const RoadGraph& graph, const LabelVector& labels, const Split& split);

nlohmann::json checkpoint_to_json(const CpGcnModel& model, const TrainConfig& config);
CpGcnModel model_from_checkpoint(const nlohmann::json& j);

}  // namespace cpgnn
