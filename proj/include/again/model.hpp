#pragma once

#include <vector>

#include "again/config.hpp"

namespace again {

/// Encoder (φ), classifier (ψ) and discriminator (w) tensors. The
/// discriminator is empty outside AGAIN mode.
template <class T>
struct ParameterSet {
  EncoderParams<T> encoder;
  ClassifierParams<T> classifier;
  DiscriminatorParams<T> discriminator;

  /// φ and ψ, the group the supervised optimizer owns.
  std::vector<Parameter<T>*> model_tensors() {
    auto out = encoder.tensors();
    for (auto* p : classifier.tensors()) out.push_back(p);
    return out;
  }
  std::vector<Parameter<T>*> all() {
    auto out = model_tensors();
    for (auto* p : discriminator.tensors()) out.push_back(p);
    return out;
  }
};

/// Seeded initialization in a fixed tensor order.
template <class T>
ParameterSet<T> init_parameters(const TrainConfig& cfg, Index feature_dim, Index class_count) {
  auto rng = make_rng(cfg.seed, Stream::init);
  ParameterSet<T> p;
  p.encoder = init_encoder<T>(cfg.encoder, feature_dim, rng);
  p.classifier = init_classifier<T>(cfg.embedding_dim(), class_count, rng);
  if (cfg.mode == Mode::again) p.discriminator = init_discriminator<T>(cfg.embedding_dim(), cfg.discriminator_hidden, rng);
  return p;
}

/// Embeddings of `nodes` on a fresh neighborhood sample (or the MLP hidden
/// layer, which ignores structure).
template <class T>
Var<T> embed_batch(const BasicGraph<T>& g, const std::vector<Index>& nodes, const EncoderVars<T>& ev, const TrainConfig& cfg,
                   const ForwardMode& mode, Rng& sampling) {
  if (cfg.mode == Mode::mlp) return mlp_hidden(g.features(), nodes, ev, mode);
  auto batch = sample_neighborhood(g, std::span<const Index>(nodes), std::span<const int>(cfg.sample_sizes), sampling);
  return encode(g, batch, ev, mode);
}

/// Inference-mode embeddings; each node's neighborhood is drawn from a
/// stream keyed by (seed, node), so results do not depend on batching.
template <class T>
Var<T> embed_batch_keyed(const BasicGraph<T>& g, const std::vector<Index>& nodes, const EncoderVars<T>& ev, const TrainConfig& cfg,
                         std::uint64_t seed) {
  if (cfg.mode == Mode::mlp) return mlp_hidden(g.features(), nodes, ev, ForwardMode{});
  auto batch = sample_neighborhood_keyed(g, std::span<const Index>(nodes), std::span<const int>(cfg.sample_sizes), seed);
  return encode(g, batch, ev, ForwardMode{});
}

/// Inference-mode class probabilities for `nodes`, in chunks of batch_size.
template <class T>
Matrix<T> predict_proba(const BasicGraph<T>& g, const std::vector<Index>& nodes, ParameterSet<T>& params, const TrainConfig& cfg,
                        std::uint64_t seed) {
  Matrix<T> out(static_cast<Index>(nodes.size()), g.class_count());
  const auto chunk = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t i = 0; i < nodes.size(); i += chunk) {
    const std::size_t end = std::min(nodes.size(), i + chunk);
    std::vector<Index> part(nodes.begin() + static_cast<std::ptrdiff_t>(i), nodes.begin() + static_cast<std::ptrdiff_t>(end));
    Tape<T> tape;
    auto ev = bind(tape, params.encoder, cfg.encoder, false);
    auto cv = bind(tape, params.classifier, false);
    auto probs = classify(embed_batch_keyed(g, part, ev, cfg, seed), cv);
    out.middleRows(static_cast<Index>(i), static_cast<Index>(end - i)) = probs.value();
  }
  return out;
}

/// Inference-mode embeddings for `nodes`.
template <class T>
EmbeddingBatch<T> embed(const BasicGraph<T>& g, const std::vector<Index>& nodes, ParameterSet<T>& params, const TrainConfig& cfg,
                        std::uint64_t seed) {
  EmbeddingBatch<T> out{nodes, Matrix<T>(static_cast<Index>(nodes.size()), cfg.embedding_dim())};
  const auto chunk = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t i = 0; i < nodes.size(); i += chunk) {
    const std::size_t end = std::min(nodes.size(), i + chunk);
    std::vector<Index> part(nodes.begin() + static_cast<std::ptrdiff_t>(i), nodes.begin() + static_cast<std::ptrdiff_t>(end));
    Tape<T> tape;
    auto ev = bind(tape, params.encoder, cfg.encoder, false);
    out.embeddings.middleRows(static_cast<Index>(i), static_cast<Index>(end - i)) =
        embed_batch_keyed(g, part, ev, cfg, seed).value();
  }
  return out;
}

}  // namespace again
