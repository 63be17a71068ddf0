#pragma once

#include <string>
#include <utility>
#include <vector>

#include "again/diffnet/gradcheck.hpp"
#include "again/model.hpp"

namespace again {

/// Six nodes, three features, two classes: a triangle 0-1-2 bridged by 2-3
/// to the path 3-4-5.
inline BasicGraph<double> toy_graph() {
  Matrix<double> x(6, 3);
  x << 1.0, 0.0, 0.5,
       0.8, 0.2, 0.0,
       0.3, 1.0, 0.4,
       0.0, 0.7, 1.2,
       0.5, 0.0, 0.9,
       1.1, 0.6, 0.0;
  const std::vector<std::pair<Index, Index>> edges{{0, 1}, {0, 2}, {1, 2}, {2, 3}, {3, 4}, {4, 5}};
  return graph_from_edges<double>(6, edges, std::move(x), {0, 0, 0, 1, 1, 1}, 2);
}

/// Small dimensions so finite differences over every entry stay cheap.
inline TrainConfig toy_config(Mode mode, std::uint64_t seed = 3) {
  TrainConfig c;
  c.mode = mode;
  c.seed = seed;
  c.encoder.depth = 2;
  c.encoder.hidden_dim = 8;
  c.encoder.attention_vector_dim = 4;
  c.sample_sizes = {2, 2};
  c.discriminator_hidden = {6, 5, 4};
  c.prior.power_exponent = 0;
  c.dropout = 0.0;
  return c.resolved();
}

struct NamedGradCheck {
  std::string name;
  GradCheckReport report;
};

/// Finite-difference checks of the supervised pipeline (encode, classify,
/// cross-entropy), the discriminator loss and the generator loss, all on
/// the toy graph with exhaustive neighborhoods.
inline std::vector<NamedGradCheck> gradcheck_suite(std::uint64_t seed = 3, const GradCheckOptions& opt = {}) {
  const auto g = toy_graph();
  std::vector<Index> nodes{0, 1, 2, 3, 4, 5};
  const auto batch = exhaustive_neighborhood(g, std::span<const Index>(nodes), 2);
  std::vector<NamedGradCheck> out;

  for (Mode mode : {Mode::gain, Mode::gs_mean}) {
    const auto cfg = toy_config(mode, seed);
    auto params = init_parameters<double>(cfg, g.feature_dim(), g.class_count());
    auto forward = [&](Tape<double>& tape) {
      auto ev = bind(tape, params.encoder, cfg.encoder);
      auto cv = bind(tape, params.classifier);
      return ops::cross_entropy(classify(encode(g, batch, ev, ForwardMode{}), cv), g.labels());
    };
    out.push_back({"supervised (" + to_string(mode) + ")", grad_check(forward, params.model_tensors(), opt)});
  }

  const auto cfg = toy_config(Mode::again, seed);
  auto params = init_parameters<double>(cfg, g.feature_dim(), g.class_count());
  auto rng = make_rng(seed, Stream::prior);
  const Matrix<double> real = sample_prior<double>(cfg.prior, 6, rng);
  Matrix<double> fake;
  {
    Tape<double> tape;
    fake = encode(g, batch, bind(tape, params.encoder, cfg.encoder, false), ForwardMode{}).value();
  }
  auto dis = [&](Tape<double>& tape) { return discriminator_loss(tape, real, fake, bind(tape, params.discriminator)); };
  out.push_back({"discriminator", grad_check(dis, params.discriminator.tensors(), opt)});

  auto gen = [&](Tape<double>& tape) {
    auto ev = bind(tape, params.encoder, cfg.encoder);
    return generator_loss(encode(g, batch, ev, ForwardMode{}), bind(tape, params.discriminator, false));
  };
  out.push_back({"generator", grad_check(gen, params.encoder.tensors(), opt)});
  return out;
}

}  // namespace again
