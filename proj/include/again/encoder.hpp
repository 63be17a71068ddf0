#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "again/diffnet/init.hpp"
#include "again/diffnet/ops.hpp"
#include "again/graph.hpp"
#include "again/sampler.hpp"

namespace again {

enum class AggregatorKind { attention, mean, none_mlp };

inline std::string to_string(AggregatorKind k) {
  switch (k) {
    case AggregatorKind::attention: return "attention";
    case AggregatorKind::mean: return "mean";
    case AggregatorKind::none_mlp: return "none-mlp";
  }
  return "?";
}

inline AggregatorKind parse_aggregator(std::string_view s) {
  if (s == "attention") return AggregatorKind::attention;
  if (s == "mean") return AggregatorKind::mean;
  if (s == "none-mlp" || s == "mlp") return AggregatorKind::none_mlp;
  throw config_error("unknown aggregator '" + std::string(s) + "'");
}

inline constexpr double kAttentionSlope = 0.2;

struct EncoderConfig {
  int depth = 2;
  int hidden_dim = 256;
  int attention_vector_dim = 512;
  AggregatorKind aggregator = AggregatorKind::attention;
  int attention_heads = 1;

  void validate() const {
    if (depth < 1) throw config_error("encoder depth must be >= 1");
    if (hidden_dim < 1 || attention_vector_dim < 1) throw config_error("encoder dimensions must be >= 1");
    if (aggregator != AggregatorKind::none_mlp && hidden_dim % 2 != 0)
      throw config_error("hidden_dim must be even so the self and neighbor halves match, got " + std::to_string(hidden_dim));
    if (aggregator == AggregatorKind::attention && attention_vector_dim % 2 != 0)
      throw config_error("attention_vector_dim must be even, got " + std::to_string(attention_vector_dim));
    if (attention_heads != 1) throw config_error("only single-head attention is supported");
  }
};

/// Weights of one aggregation depth. The attention pair is empty for the
/// mean aggregator.
template <class T>
struct LayerParams {
  Parameter<T> attention_weight;  // in x attention_vector_dim/2
  Parameter<T> attention_vector;  // attention_vector_dim x 1, [self half; neighbor half]
  Parameter<T> self_weight;       // in x hidden/2
  Parameter<T> neighbor_weight;   // in x hidden/2
};

template <class T>
struct EncoderParams {
  std::vector<LayerParams<T>> layers;
  // none-mlp only: the hidden layer D -> d
  Parameter<T> mlp_weight;
  Parameter<T> mlp_bias;

  std::vector<Parameter<T>*> tensors() {
    std::vector<Parameter<T>*> out;
    auto add = [&](Parameter<T>& p) {
      if (p.size() > 0) out.push_back(&p);
    };
    for (auto& l : layers) {
      add(l.attention_weight);
      add(l.attention_vector);
      add(l.self_weight);
      add(l.neighbor_weight);
    }
    add(mlp_weight);
    add(mlp_bias);
    return out;
  }
};

template <class T>
struct ClassifierParams {
  Parameter<T> weight;  // d x C
  Parameter<T> bias;    // 1 x C

  std::vector<Parameter<T>*> tensors() { return {&weight, &bias}; }
};

/// Output width of the encoder (the embedding dimension d).
inline Index embedding_dim(const EncoderConfig& cfg) { return cfg.hidden_dim; }

template <class T>
EncoderParams<T> init_encoder(const EncoderConfig& cfg, Index feature_dim, Rng& rng) {
  cfg.validate();
  if (feature_dim < 1) throw config_error("feature dimension must be >= 1");
  EncoderParams<T> p;
  const Index d = cfg.hidden_dim;
  if (cfg.aggregator == AggregatorKind::none_mlp) {
    p.mlp_weight = Parameter<T>("mlp.weight", "encoder", uniform_init<T>(feature_dim, d, feature_dim, rng));
    p.mlp_bias = Parameter<T>("mlp.bias", "encoder", uniform_init<T>(1, d, feature_dim, rng));
    return p;
  }
  const Index half = d / 2, att_half = cfg.attention_vector_dim / 2;
  for (int k = 1; k <= cfg.depth; ++k) {
    const Index in = k == 1 ? feature_dim : d;
    const std::string pre = "layer" + std::to_string(k) + ".";
    LayerParams<T> l;
    if (cfg.aggregator == AggregatorKind::attention) {
      l.attention_weight = Parameter<T>(pre + "attention_weight", "encoder", uniform_init<T>(in, att_half, in, rng));
      l.attention_vector = Parameter<T>(pre + "attention_vector", "encoder",
                                        uniform_init<T>(2 * att_half, 1, 2 * att_half, rng));
    }
    l.self_weight = Parameter<T>(pre + "self_weight", "encoder", uniform_init<T>(in, half, in, rng));
    l.neighbor_weight = Parameter<T>(pre + "neighbor_weight", "encoder", uniform_init<T>(in, half, in, rng));
    p.layers.push_back(std::move(l));
  }
  return p;
}

template <class T>
ClassifierParams<T> init_classifier(Index embedding_dim, Index class_count, Rng& rng) {
  ClassifierParams<T> c;
  c.weight = Parameter<T>("classifier.weight", "classifier", uniform_init<T>(embedding_dim, class_count, embedding_dim, rng));
  c.bias = Parameter<T>("classifier.bias", "classifier", uniform_init<T>(1, class_count, embedding_dim, rng));
  return c;
}

/// Parameters bound to a tape for one pass.
template <class T>
struct LayerVars {
  bool attention = false;
  Var<T> attention_weight, attention_vector, self_weight, neighbor_weight;
};

template <class T>
struct EncoderVars {
  AggregatorKind kind = AggregatorKind::attention;
  std::vector<LayerVars<T>> layers;
  Var<T> mlp_weight, mlp_bias;
};

template <class T>
struct ClassifierVars {
  Var<T> weight, bias;
};

/// trainable=false lets values flow without accumulating into p.grad.
template <class T>
EncoderVars<T> bind(Tape<T>& tape, EncoderParams<T>& p, const EncoderConfig& cfg, bool trainable = true) {
  EncoderVars<T> ev;
  ev.kind = cfg.aggregator;
  if (cfg.aggregator == AggregatorKind::none_mlp) {
    ev.mlp_weight = tape.param(p.mlp_weight, trainable);
    ev.mlp_bias = tape.param(p.mlp_bias, trainable);
    return ev;
  }
  if (static_cast<int>(p.layers.size()) != cfg.depth)
    throw config_error("encoder has " + std::to_string(p.layers.size()) + " layers, config depth " + std::to_string(cfg.depth));
  for (auto& l : p.layers) {
    LayerVars<T> lv;
    lv.attention = cfg.aggregator == AggregatorKind::attention;
    if (lv.attention) {
      lv.attention_weight = tape.param(l.attention_weight, trainable);
      lv.attention_vector = tape.param(l.attention_vector, trainable);
    }
    lv.self_weight = tape.param(l.self_weight, trainable);
    lv.neighbor_weight = tape.param(l.neighbor_weight, trainable);
    ev.layers.push_back(lv);
  }
  return ev;
}

template <class T>
ClassifierVars<T> bind(Tape<T>& tape, ClassifierParams<T>& p, bool trainable = true) {
  return {tape.param(p.weight, trainable), tape.param(p.bias, trainable)};
}

/// Dropout switch for a forward pass. `rng` is required only when training
/// with a positive rate.
struct ForwardMode {
  bool train = false;
  double dropout = 0.0;
  Rng* rng = nullptr;

  bool drops() const { return train && dropout > 0.0; }
};

namespace encoder_detail {

inline void check_groups(const Offsets& groups, Index targets, Index neighbors, const char* op) {
  if (groups.size() != static_cast<std::size_t>(targets) + 1 || groups.front() != 0 ||
      static_cast<Index>(groups.back()) != neighbors)
    throw shape_error(std::string(op) + ": neighbor grouping does not match " + std::to_string(targets) + " targets and " +
                      std::to_string(neighbors) + " neighbor rows");
}

inline std::vector<Index> parent_of(const Offsets& groups) {
  std::vector<Index> parent(groups.back());
  for (std::size_t s = 0; s + 1 < groups.size(); ++s)
    std::fill(parent.begin() + static_cast<std::ptrdiff_t>(groups[s]), parent.begin() + static_cast<std::ptrdiff_t>(groups[s + 1]),
              static_cast<Index>(s));
  return parent;
}

inline Rng& require_rng(const ForwardMode& mode) {
  if (mode.rng == nullptr) throw config_error("training-mode dropout needs a random stream");
  return *mode.rng;
}

template <class T>
Var<T> maybe_dropout(Var<T> v, const ForwardMode& mode) {
  if (!mode.drops()) return v;
  return ops::dropout(v, mode.dropout, require_rng(mode), true);
}

/// Feature rows as a constant sparse matrix; dropout, if on, masks the stored
/// entries.
template <class T>
SparseRows<T> feature_rows(const Matrix<T>& x, const std::vector<Index>& rows, const ForwardMode& mode) {
  SparseRows<T> s(static_cast<Index>(rows.size()), x.cols());
  std::vector<Index> nnz(rows.size(), 0);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Index j = 0; j < x.cols(); ++j)
      if (x(rows[i], j) != T(0)) ++nnz[i];
  s.reserve(nnz);
  const bool drop = mode.drops();
  std::bernoulli_distribution keep(drop ? 1.0 - mode.dropout : 1.0);
  const T scale = drop ? static_cast<T>(1.0 / (1.0 - mode.dropout)) : T(1);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Index j = 0; j < x.cols(); ++j) {
      const T v = x(rows[i], j);
      if (v == T(0)) continue;
      if (drop && !keep(require_rng(mode))) continue;
      s.insert(static_cast<Index>(i), j) = v * scale;
    }
  s.makeCompressed();
  return s;
}

}  // namespace encoder_detail

/// Attention weights from per-row scores: logit(v,u) = leaky(self_score[v] +
/// neighbor_score[u]), normalized within each target's group.
template <class T>
Var<T> attention_from_scores(Var<T> self_scores, Var<T> neighbor_scores, const Offsets& groups) {
  encoder_detail::check_groups(groups, self_scores.rows(), neighbor_scores.rows(), "attention");
  auto logits = ops::leaky_relu(ops::add(ops::gather_rows(self_scores, encoder_detail::parent_of(groups)), neighbor_scores),
                                static_cast<T>(kAttentionSlope));
  return ops::segment_softmax(logits, groups);
}

/// α over each target's neighbor group. aᵀ[W h_v ; W h_u] splits into a self
/// score h_v·(W a_self) and a neighbor score h_u·(W a_nbr).
template <class T>
Var<T> attention_coefficients(const LayerVars<T>& layer, Var<T> h_target, Var<T> h_neighbors, const Offsets& groups) {
  encoder_detail::check_groups(groups, h_target.rows(), h_neighbors.rows(), "attention_coefficients");
  const Index half = layer.attention_weight.cols();
  if (layer.attention_vector.rows() != 2 * half)
    throw shape_error("attention vector has " + std::to_string(layer.attention_vector.rows()) + " rows, expected " +
                      std::to_string(2 * half));
  auto self_dir = ops::matmul(layer.attention_weight, ops::slice_rows(layer.attention_vector, 0, half));
  auto nbr_dir = ops::matmul(layer.attention_weight, ops::slice_rows(layer.attention_vector, half, half));
  return attention_from_scores(ops::matmul(h_target, self_dir), ops::matmul(h_neighbors, nbr_dir), groups);
}

/// h_S per target: α-weighted sum, or the plain mean when `alpha` is null.
template <class T>
Var<T> aggregate(Var<T> h_neighbors, const Var<T>* alpha, const Offsets& groups) {
  if (alpha != nullptr) return ops::segment_weighted_sum(h_neighbors, *alpha, groups);
  return ops::segment_mean(h_neighbors, groups);
}

/// l2norm(relu([self_part ; neighbor_part])).
template <class T>
Var<T> combine(Var<T> self_part, Var<T> neighbor_part) {
  return ops::l2_normalize_rows(ops::relu(ops::concat_rows(self_part, neighbor_part)));
}

/// One aggregation depth over dense previous-depth representations.
template <class T>
Var<T> layer_forward(const LayerVars<T>& layer, Var<T> h_targets, Var<T> h_neighbors, const Offsets& groups,
                     const ForwardMode& mode) {
  encoder_detail::check_groups(groups, h_targets.rows(), h_neighbors.rows(), "layer_forward");
  auto ht = encoder_detail::maybe_dropout(h_targets, mode);
  auto hn = encoder_detail::maybe_dropout(h_neighbors, mode);
  Var<T> alpha;
  if (layer.attention) alpha = attention_coefficients(layer, ht, hn, groups);
  auto h_s = aggregate(hn, layer.attention ? &alpha : nullptr, groups);
  return combine(ops::matmul(ht, layer.self_weight), ops::matmul(h_s, layer.neighbor_weight));
}

/// Embeddings of batch.targets (|B| x d), aggregating inward from depth K.
///
/// Depth 1 reads raw features. It projects each distinct node of the tree
/// once and gathers, aggregating after the neighbor projection (the two
/// orders agree by linearity). Dropout at this depth masks each distinct
/// node's features once.
template <class T>
Var<T> encode(const BasicGraph<T>& g, const SampledBatch& batch, const EncoderVars<T>& ev, const ForwardMode& mode) {
  if (ev.kind == AggregatorKind::none_mlp) throw config_error("the MLP variant has no neighborhood encoder");
  const int depth = static_cast<int>(ev.layers.size());
  if (batch.depth() != depth)
    throw shape_error("batch has depth " + std::to_string(batch.depth()) + ", encoder depth " + std::to_string(depth));

  std::vector<Index> distinct;
  for (int l = 0; l <= depth; ++l) distinct.insert(distinct.end(), batch.level(l).begin(), batch.level(l).end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  auto local = [&](const std::vector<Index>& nodes) {
    std::vector<Index> out(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
      out[i] = std::lower_bound(distinct.begin(), distinct.end(), nodes[i]) - distinct.begin();
    return out;
  };
  std::vector<std::vector<Index>> rows;
  for (int l = 0; l <= depth; ++l) rows.push_back(local(batch.level(l)));

  const auto x = encoder_detail::feature_rows(g.features(), distinct, mode);
  const auto& first = ev.layers.front();
  auto self_proj = ops::matmul(x, first.self_weight);
  auto nbr_proj = ops::matmul(x, first.neighbor_weight);
  Var<T> self_score, nbr_score;
  if (first.attention) {
    const Index half = first.attention_weight.cols();
    self_score = ops::matmul(x, ops::matmul(first.attention_weight, ops::slice_rows(first.attention_vector, 0, half)));
    nbr_score = ops::matmul(x, ops::matmul(first.attention_weight, ops::slice_rows(first.attention_vector, half, half)));
  }

  std::vector<Var<T>> h(static_cast<std::size_t>(depth));
  for (int l = 0; l < depth; ++l) {
    const auto& groups = batch.depth_frontiers[static_cast<std::size_t>(l)].offsets;
    const auto& tgt = rows[static_cast<std::size_t>(l)];
    const auto& nbr = rows[static_cast<std::size_t>(l + 1)];
    Var<T> alpha;
    if (first.attention) alpha = attention_from_scores(ops::gather_rows(self_score, tgt), ops::gather_rows(nbr_score, nbr), groups);
    auto h_s = aggregate(ops::gather_rows(nbr_proj, nbr), first.attention ? &alpha : nullptr, groups);
    h[static_cast<std::size_t>(l)] = combine(ops::gather_rows(self_proj, tgt), h_s);
  }
  for (int k = 2; k <= depth; ++k)
    for (int l = 0; l + k <= depth; ++l)
      h[static_cast<std::size_t>(l)] = layer_forward(ev.layers[static_cast<std::size_t>(k - 1)], h[static_cast<std::size_t>(l)],
                                                     h[static_cast<std::size_t>(l + 1)],
                                                     batch.depth_frontiers[static_cast<std::size_t>(l)].offsets, mode);
  return h.front();
}

/// Class probabilities: softmax(u W + b).
template <class T>
Var<T> classify(Var<T> embeddings, const ClassifierVars<T>& c) {
  if (embeddings.cols() != c.weight.rows())
    throw shape_error("classifier expects " + std::to_string(c.weight.rows()) + "-dim embeddings, got " +
                      std::to_string(embeddings.cols()));
  return ops::softmax_rows(ops::add_bias(ops::matmul(embeddings, c.weight), c.bias));
}

/// Hidden layer of the features-only MLP: relu(x W + b), dropout on x.
template <class T>
Var<T> mlp_hidden(const Matrix<T>& features, const std::vector<Index>& nodes, const EncoderVars<T>& ev, const ForwardMode& mode) {
  if (ev.kind != AggregatorKind::none_mlp) throw config_error("mlp_hidden needs the none-mlp encoder");
  auto x = encoder_detail::feature_rows(features, nodes, mode);
  return ops::relu(ops::add_bias(ops::matmul(std::move(x), ev.mlp_weight), ev.mlp_bias));
}

/// Two-layer MLP over node features: D -> d (ReLU) -> C (softmax).
template <class T>
Var<T> mlp_forward(const Matrix<T>& features, const std::vector<Index>& nodes, const EncoderVars<T>& ev, const ClassifierVars<T>& c,
                   const ForwardMode& mode) {
  return classify(mlp_hidden(features, nodes, ev, mode), c);
}

/// Row-wise argmax.
template <class T>
std::vector<int> predict(const Matrix<T>& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Index i = 0; i < probs.rows(); ++i) {
    Index best = 0;
    probs.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

/// Embedding rows u_v for a list of nodes, in order.
template <class T>
struct EmbeddingBatch {
  std::vector<Index> nodes;
  Matrix<T> embeddings;
};

}  // namespace again
