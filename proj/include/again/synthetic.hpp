#pragma once

#include <random>
#include <string>
#include <vector>

#include "again/graph.hpp"

namespace again {

/// Planted-partition graph with bag-of-words features. Each class owns a
/// block of the vocabulary; a node draws each of its words from its class
/// block with probability `topic_purity`, otherwise from the whole vocabulary.
struct SyntheticSpec {
  Index nodes = 600;
  int classes = 3;
  Index feature_dim = 120;
  double p_in = 0.02;   // edge probability within a class
  double p_out = 0.002; // edge probability across classes
  int words_per_node = 8;
  double topic_purity = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (nodes < 2 || classes < 2 || feature_dim < classes) throw config_error("synthetic graph needs >= 2 nodes, >= 2 classes, D >= C");
    if (p_in < 0 || p_in > 1 || p_out < 0 || p_out > 1) throw config_error("edge probabilities must be in [0,1]");
    if (words_per_node < 1) throw config_error("words_per_node must be >= 1");
    if (topic_purity < 0 || topic_purity > 1) throw config_error("topic_purity must be in [0,1]");
  }
};

inline AttributedGraph make_planted_partition(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(mix_seed(spec.seed, 0x5e7));
  const Index n = spec.nodes;
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index v = 0; v < n; ++v) labels[static_cast<std::size_t>(v)] = static_cast<int>(v % spec.classes);
  std::shuffle(labels.begin(), labels.end(), rng);

  const Index block = spec.feature_dim / spec.classes;
  Matrix<float> x = Matrix<float>::Zero(n, spec.feature_dim);
  std::bernoulli_distribution on_topic(spec.topic_purity);
  std::uniform_int_distribution<Index> in_block(0, block - 1), anywhere(0, spec.feature_dim - 1);
  for (Index v = 0; v < n; ++v)
    for (int w = 0; w < spec.words_per_node; ++w) {
      const Index j = on_topic(rng) ? labels[static_cast<std::size_t>(v)] * block + in_block(rng) : anywhere(rng);
      x(v, j) = 1.0f;
    }

  std::vector<std::pair<Index, Index>> edges;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index a = 0; a < n; ++a)
    for (Index b = a + 1; b < n; ++b) {
      const double p = labels[static_cast<std::size_t>(a)] == labels[static_cast<std::size_t>(b)] ? spec.p_in : spec.p_out;
      if (u(rng) < p) edges.emplace_back(a, b);
    }
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(n));
  for (Index v = 0; v < n; ++v) ids.push_back("n" + std::to_string(v));
  return graph_from_edges<float>(n, edges, std::move(x), std::move(labels), spec.classes, std::move(ids));
}

}  // namespace again
