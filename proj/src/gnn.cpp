#include "cpgnn/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cpgnn/error.hpp"
#include "cpgnn/eval.hpp"

namespace cpgnn {

namespace {

constexpr std::uint64_t kInitStream = 0x1a17ULL;
constexpr std::uint64_t kMaskStream = 0x3a5cULL;

void glorot_uniform(Matrix& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (double& v : m.data()) v = rng.uniform(-limit, limit);
}

void check_tokens(const CpGcnModel& model, const TokenVector* tokens, std::size_t n) {
  if (model.uses_cp() != (tokens != nullptr)) {
    throw ConfigError(model.uses_cp() ? "CP model needs a token vector" : "baseline model takes no token vector");
  }
  if (!tokens) return;
  if (tokens->size() != n) throw DataError("token vector length != num_nodes");
  const auto max_token = static_cast<std::uint32_t>(model.token_table.rows() - 1);
  for (auto t : *tokens) {
    if (t > max_token) throw DataError("token id " + std::to_string(t) + " exceeds number of classes");
  }
}

}  // namespace

Matrix SparseMatrix::multiply(const Matrix& dense) const {
  Matrix out(n, dense.cols());
  for (std::size_t i = 0; i < n; ++i) {
    auto orow = out.row(i);
    for (EdgeOffset p = offsets[i]; p < offsets[i + 1]; ++p) {
      const double w = values[p];
      auto drow = dense.row(cols[p]);
      for (std::size_t j = 0; j < orow.size(); ++j) orow[j] += w * drow[j];
    }
  }
  return out;
}

Matrix SparseMatrix::to_dense() const {
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (EdgeOffset p = offsets[i]; p < offsets[i + 1]; ++p) out(i, cols[p]) += values[p];
  }
  return out;
}

SparseMatrix normalize_adjacency(const RoadGraph& graph) {
  const std::size_t n = graph.num_nodes();
  SparseMatrix s;
  s.n = n;
  s.offsets.assign(n + 1, 0);
  s.cols.reserve(graph.neighbor_ids().size() + n);
  s.values.reserve(graph.neighbor_ids().size() + n);
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(graph.degree(static_cast<NodeId>(i)) + 1));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto nbrs = graph.neighbors(static_cast<NodeId>(i));
    bool self_done = false;
    auto push_self = [&] {
      s.cols.push_back(static_cast<NodeId>(i));
      s.values.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[i]);
      self_done = true;
    };
    for (NodeId j : nbrs) {
      if (!self_done && j > i) push_self();
      s.cols.push_back(j);
      s.values.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    }
    if (!self_done) push_self();
    s.offsets[i + 1] = s.cols.size();
  }
  return s;
}

TokenVector tokenize_labels(const LabelVector& labels, const Split& split, std::span<const NodeId> mask) {
  TokenVector tokens(labels.size(), 0);
  for (NodeId i : split.train) {
    if (i >= labels.size()) throw DataError("train id " + std::to_string(i) + " out of range");
    if (!is_known(labels[i])) throw DataError("train node " + std::to_string(i) + " has unknown label");
    tokens[i] = static_cast<std::uint32_t>(class_index(labels[i])) + 1;
  }
  for (NodeId i : mask) {
    if (i >= labels.size()) throw DataError("mask id " + std::to_string(i) + " out of range");
    tokens[i] = 0;
  }
  return tokens;
}

std::vector<NodeId> sample_mask(std::size_t n, double rate, Rng& rng) {
  if (!(rate > 0.0 && rate < 0.5)) throw ConfigError("mask rate must lie in (0, 0.5)");
  const auto count = static_cast<std::size_t>(std::floor(rate * static_cast<double>(n)));
  std::vector<NodeId> pool(n);
  std::iota(pool.begin(), pool.end(), NodeId{0});
  // Partial Fisher-Yates: the first `count` slots become a uniform sample without replacement.
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

CpGcnModel CpGcnModel::init(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes, bool use_cp,
                            std::uint64_t seed) {
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  Rng rng(derive_seed(seed, kInitStream));
  CpGcnModel m;
  m.w1 = Matrix(input_dim, hidden_dim);
  m.b1.assign(hidden_dim, 0.0);
  m.w2 = Matrix(hidden_dim, num_classes);
  m.b2.assign(num_classes, 0.0);
  glorot_uniform(m.w1, rng);
  glorot_uniform(m.w2, rng);
  if (use_cp) {
    m.token_table = Matrix(num_classes + 1, hidden_dim);
    const double limit = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (double& v : m.token_table.data()) v = rng.uniform(-limit, limit);
  }
  return m;
}

std::size_t count_cp_params(std::size_t num_classes, std::size_t hidden_dim) {
  return (num_classes + 1) * hidden_dim;
}

ForwardCache forward(const CpGcnModel& model, const SparseMatrix& adj, const Matrix& x, const TokenVector* tokens) {
  const std::size_t n = adj.n;
  if (x.rows() != n) throw DataError("feature rows != adjacency size");
  if (x.cols() != model.input_dim()) {
    throw DataError("feature width " + std::to_string(x.cols()) + " != model input dim " +
                    std::to_string(model.input_dim()));
  }
  check_tokens(model, tokens, n);

  ForwardCache c;
  c.ax = adj.multiply(x);
  c.pre1 = matmul(c.ax, model.w1);
  add_row_vector(c.pre1, model.b1);
  c.hidden = c.pre1;
  for (double& v : c.hidden.data()) v = v > 0.0 ? v : 0.0;
  if (tokens) {
    for (std::size_t i = 0; i < n; ++i) {
      auto h = c.hidden.row(i);
      auto t = model.token_table.row((*tokens)[i]);
      for (std::size_t j = 0; j < h.size(); ++j) h[j] += t[j];
    }
  }
  c.a_hidden = adj.multiply(c.hidden);
  c.log_probs = matmul(c.a_hidden, model.w2);
  add_row_vector(c.log_probs, model.b2);
  for (std::size_t i = 0; i < n; ++i) {
    auto z = c.log_probs.row(i);
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (double& v : z) v -= lse;
  }
  return c;
}

LossAndGrads loss_and_grads(const CpGcnModel& model, const SparseMatrix& adj, const Matrix& x,
                            const TokenVector* tokens, const LabelVector& labels,
                            std::span<const NodeId> train_idx) {
  if (train_idx.empty()) throw DataError("empty training set");
  if (labels.size() != adj.n) throw DataError("label count != num_nodes");
  const ForwardCache c = forward(model, adj, x, tokens);
  const std::size_t n = adj.n;
  const std::size_t num_classes = model.num_classes();
  const double scale = 1.0 / static_cast<double>(train_idx.size());

  LossAndGrads out;
  Matrix d_logits(n, num_classes);
  for (NodeId i : train_idx) {
    if (i >= n) throw DataError("train id out of range");
    if (!is_known(labels[i])) throw DataError("train node " + std::to_string(i) + " has unknown label");
    const auto y = static_cast<std::size_t>(class_index(labels[i]));
    out.loss -= c.log_probs(i, y) * scale;
    auto d = d_logits.row(i);
    auto lp = c.log_probs.row(i);
    for (std::size_t k = 0; k < num_classes; ++k) d[k] = (std::exp(lp[k]) - (k == y ? 1.0 : 0.0)) * scale;
  }

  auto& g = out.grads;
  g.w2 = matmul_tn(c.a_hidden, d_logits);
  g.b2 = column_sums(d_logits);
  // The normalized adjacency is symmetric, so its transpose product is another multiply.
  Matrix d_hidden = adj.multiply(matmul_nt(d_logits, model.w2));
  if (tokens) {
    g.token_table = Matrix(model.token_table.rows(), model.token_table.cols());
    for (std::size_t i = 0; i < n; ++i) {
      auto dt = g.token_table.row((*tokens)[i]);
      auto dh = d_hidden.row(i);
      for (std::size_t j = 0; j < dt.size(); ++j) dt[j] += dh[j];
    }
  }
  Matrix& d_pre1 = d_hidden;
  for (std::size_t k = 0; k < d_pre1.size(); ++k) {
    if (!(c.pre1.data()[k] > 0.0)) d_pre1.data()[k] = 0.0;
  }
  g.w1 = matmul_tn(c.ax, d_pre1);
  g.b1 = column_sums(d_pre1);
  return out;
}

void TrainConfig::check() const {
  if (!(mask_rate > 0.0 && mask_rate < 0.5)) throw ConfigError("mask rate must lie in (0, 0.5)");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be > 0");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight decay must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (hidden_dim < 1) throw ConfigError("hidden dim must be >= 1");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"mask_rate", c.mask_rate}, {"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay},
          {"epochs", c.epochs},       {"hidden_dim", c.hidden_dim},       {"seed", c.seed},
          {"use_cp", c.use_cp}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.mask_rate = j.at("mask_rate").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.use_cp = j.at("use_cp").get<bool>();
  return c;
}

namespace {

void step(Matrix& p, const Matrix& g, double lr, double wd) {
  for (std::size_t k = 0; k < p.size(); ++k) p.data()[k] -= lr * (g.data()[k] + wd * p.data()[k]);
}

void step(std::vector<double>& p, const std::vector<double>& g, double lr, double wd) {
  for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * (g[k] + wd * p[k]);
}

bool all_finite(const CpGcnModel& m) {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return ok(m.w1.data()) && ok(m.b1) && ok(m.w2.data()) && ok(m.b2) && ok(m.token_table.data());
}

Matrix probabilities(const ForwardCache& c) {
  Matrix p = c.log_probs;
  for (double& v : p.data()) v = std::exp(v);
  return p;
}

}  // namespace

TrainResult train(const RoadGraph& graph, const LabelVector& labels, const Split& split, const TrainConfig& config) {
  config.check();
  if (labels.size() != graph.num_nodes()) throw DataError("label count != num_nodes");
  if (const auto v = validate_split(split, labels); !v.ok()) throw DataError("invalid split: " + v.violations.front());
  constexpr std::size_t kNumClasses = 2;

  const SparseMatrix adj = normalize_adjacency(graph);
  const Matrix& x = graph.node_features();
  TrainResult result;
  result.model = CpGcnModel::init(x.cols(), config.hidden_dim, kNumClasses, config.use_cp, config.seed);
  auto& model = result.model;
  const TokenVector inference_tokens =
      config.use_cp ? tokenize_labels(labels, split, {}) : TokenVector{};

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    TokenVector tokens;
    if (config.use_cp) {
      Rng mask_rng(derive_seed(config.seed, kMaskStream, epoch));
      const auto mask = sample_mask(graph.num_nodes(), config.mask_rate, mask_rng);
      tokens = tokenize_labels(labels, split, mask);
    }
    auto lg = loss_and_grads(model, adj, x, config.use_cp ? &tokens : nullptr, labels, split.train);
    if (!std::isfinite(lg.loss)) {
      throw DataError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
    }
    step(model.w1, lg.grads.w1, config.learning_rate, config.weight_decay);
    step(model.b1, lg.grads.b1, config.learning_rate, config.weight_decay);
    step(model.w2, lg.grads.w2, config.learning_rate, config.weight_decay);
    step(model.b2, lg.grads.b2, config.learning_rate, config.weight_decay);
    if (config.use_cp) step(model.token_table, lg.grads.token_table, config.learning_rate, config.weight_decay);
    if (!all_finite(model)) {
      throw DataError("training diverged: non-finite weights after epoch " + std::to_string(epoch));
    }

    EpochRecord rec{epoch, lg.loss, 0.0};
    if (!split.valid.empty()) {
      const auto c = forward(model, adj, x, config.use_cp ? &inference_tokens : nullptr);
      rec.val_f1 = evaluate(probabilities(c), labels, split, Subset::Valid).f1;
    }
    result.history.push_back(rec);
  }
  return result;
}

Matrix predict(const CpGcnModel& model, const RoadGraph& graph, const LabelVector& labels, const Split& split) {
  const SparseMatrix adj = normalize_adjacency(graph);
  if (model.uses_cp()) {
    const TokenVector tokens = tokenize_labels(labels, split, {});
    return probabilities(forward(model, adj, graph.node_features(), &tokens));
  }
  return probabilities(forward(model, adj, graph.node_features(), nullptr));
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != rows * cols) throw DataError("checkpoint matrix data does not match its shape");
  return Matrix(rows, cols, std::move(data));
}

}  // namespace

nlohmann::json checkpoint_to_json(const CpGcnModel& model, const TrainConfig& config) {
  return {{"format", "cpgnn-checkpoint-1"},
          {"config", to_json(config)},
          {"input_dim", model.input_dim()},
          {"hidden_dim", model.hidden_dim()},
          {"num_classes", model.num_classes()},
          {"use_cp", model.uses_cp()},
          {"w1", matrix_json(model.w1)},
          {"b1", model.b1},
          {"w2", matrix_json(model.w2)},
          {"b2", model.b2},
          {"token_table", matrix_json(model.token_table)}};
}

CpGcnModel model_from_checkpoint(const nlohmann::json& j) {
  try {
    CpGcnModel m;
    m.w1 = matrix_from_json(j.at("w1"));
    m.b1 = j.at("b1").get<std::vector<double>>();
    m.w2 = matrix_from_json(j.at("w2"));
    m.b2 = j.at("b2").get<std::vector<double>>();
    m.token_table = matrix_from_json(j.at("token_table"));
    if (m.b1.size() != m.hidden_dim() || m.w2.rows() != m.hidden_dim() || m.b2.size() != m.num_classes() ||
        (m.uses_cp() && (m.token_table.rows() != m.num_classes() + 1 || m.token_table.cols() != m.hidden_dim()))) {
      throw DataError("checkpoint shapes are inconsistent");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace cpgnn
