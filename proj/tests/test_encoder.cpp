#include <gtest/gtest.h>

#include "again/again.hpp"
#include "helpers.hpp"
#include "oracle.hpp"

using namespace again;

namespace {

Matrix<double> scalar(double v) { return Matrix<double>::Constant(1, 1, v); }

// One 1-D attention layer with W = [1], a = [1, 1], W_v = W_S = [1].
LayerParams<double> unit_layer() {
  LayerParams<double> l;
  l.attention_weight = Parameter<double>("w", "encoder", scalar(1.0));
  l.attention_vector = Parameter<double>("a", "encoder", Matrix<double>::Ones(2, 1));
  l.self_weight = Parameter<double>("ws", "encoder", scalar(1.0));
  l.neighbor_weight = Parameter<double>("wn", "encoder", scalar(1.0));
  return l;
}

LayerVars<double> bind_layer(Tape<double>& t, LayerParams<double>& l) {
  return {true, t.param(l.attention_weight), t.param(l.attention_vector), t.param(l.self_weight), t.param(l.neighbor_weight)};
}

Matrix<double> col(std::initializer_list<double> v) {
  Matrix<double> m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

std::vector<Index> all_nodes(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

EncoderConfig toy_encoder(AggregatorKind kind, int depth = 2) { return EncoderConfig{depth, 8, 6, kind}; }

}  // namespace

TEST(Attention, HandEvaluatedOneDimensionalExample) {
  auto layer = unit_layer();
  Tape<double> t;
  auto lv = bind_layer(t, layer);
  auto hn = t.constant(col({2.0, 0.0}));
  auto alpha = attention_coefficients(lv, t.constant(scalar(1.0)), hn, Offsets{0, 2});
  // logits leaky(1+2)=3 and leaky(1+0)=1
  const double e = std::exp(2.0);
  EXPECT_NEAR(alpha.value()(0, 0), e / (1.0 + e), 1e-12);
  EXPECT_NEAR(alpha.value()(1, 0), 1.0 / (1.0 + e), 1e-12);
  EXPECT_NEAR(alpha.value()(0, 0), 0.8808, 1e-4);
  auto hs = aggregate(hn, &alpha, Offsets{0, 2});
  EXPECT_NEAR(hs.value()(0, 0), 2.0 * e / (1.0 + e), 1e-12);
  EXPECT_NEAR(hs.value()(0, 0), 1.7616, 1e-4);
}

TEST(Attention, SingletonAndSymmetricCases) {
  auto layer = unit_layer();
  Tape<double> t;
  auto lv = bind_layer(t, layer);
  auto single = attention_coefficients(lv, t.constant(scalar(0.3)), t.constant(scalar(-4.0)), Offsets{0, 1});
  EXPECT_EQ(single.value()(0, 0), 1.0);
  auto twin = attention_coefficients(lv, t.constant(scalar(0.3)), t.constant(col({1.5, 1.5})), Offsets{0, 2});
  EXPECT_DOUBLE_EQ(twin.value()(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(twin.value()(1, 0), 0.5);
}

TEST(Attention, GroupMismatchIsShapeError) {
  auto layer = unit_layer();
  Tape<double> t;
  auto lv = bind_layer(t, layer);
  EXPECT_THROW(attention_coefficients(lv, t.constant(col({1.0, 2.0})), t.constant(col({1.0, 2.0, 3.0})), Offsets{0, 3}), shape_error);
}

TEST(Aggregate, MeanAndSingleNeighbor) {
  Tape<double> t;
  Matrix<double> rows(2, 2);
  rows << 0, 2, 2, 0;
  auto mean = aggregate<double>(t.constant(rows), nullptr, Offsets{0, 2});
  EXPECT_EQ(mean.value(), Matrix<double>::Ones(1, 2));
  Matrix<double> one(1, 2);
  one << 2, 4;
  auto alpha = t.constant(scalar(1.0));
  EXPECT_EQ(aggregate(t.constant(one), &alpha, Offsets{0, 1}).value(), one);
}

TEST(Layer, ConcatReluNormalize) {
  Tape<double> t;
  auto h = combine(t.constant(scalar(3.0)), t.constant(scalar(4.0)));
  EXPECT_NEAR(h.value()(0, 0), 3.0 / (5.0 + 1e-12), 1e-15);
  EXPECT_NEAR(h.value()(0, 1), 4.0 / (5.0 + 1e-12), 1e-15);
  auto zero = combine(t.constant(Matrix<double>::Zero(2, 2)), t.constant(Matrix<double>::Zero(2, 2)));
  EXPECT_EQ(zero.value().norm(), 0.0);
}

TEST(Layer, OneDimensionalLayerForward) {
  // h_v=[3] alone with neighbor h_u=[4]: α=1, pre-norm [3,4].
  auto layer = unit_layer();
  Tape<double> t;
  auto lv = bind_layer(t, layer);
  auto h = layer_forward(lv, t.constant(scalar(3.0)), t.constant(scalar(4.0)), Offsets{0, 1}, ForwardMode{});
  EXPECT_NEAR(h.value()(0, 0), 3.0 / (5.0 + 1e-12), 1e-15);
  EXPECT_NEAR(h.value()(0, 1), 4.0 / (5.0 + 1e-12), 1e-15);
}

TEST(Encoder, MatchesStraightLineOracle) {
  const auto g = toy_graph();
  for (auto kind : {AggregatorKind::attention, AggregatorKind::mean})
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto cfg = toy_encoder(kind);
      Rng rng(seed);
      auto p = init_encoder<double>(cfg, g.feature_dim(), rng);
      const auto nodes = all_nodes(g.node_count());
      const auto batch = exhaustive_neighborhood(g, std::span<const Index>(nodes), 2);
      Tape<double> t;
      const Matrix<double> u = encode(g, batch, bind(t, p, cfg), ForwardMode{}).value();
      const auto expected = oracle::all_depths(g, p, kind == AggregatorKind::attention);
      for (Index v = 0; v < g.node_count(); ++v) {
        double norm = 0.0;
        for (Index j = 0; j < u.cols(); ++j) {
          EXPECT_NEAR(u(v, j), expected[2][static_cast<std::size_t>(v)][static_cast<std::size_t>(j)], 1e-9);
          norm += u(v, j) * u(v, j);
        }
        EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-5);
      }
    }
}

TEST(Encoder, DepthOneIsASingleLayer) {
  const auto g = toy_graph();
  const auto cfg = toy_encoder(AggregatorKind::attention, 1);
  Rng rng(4);
  auto p = init_encoder<double>(cfg, g.feature_dim(), rng);
  const auto nodes = all_nodes(g.node_count());
  const auto batch = exhaustive_neighborhood(g, std::span<const Index>(nodes), 1);
  Tape<double> t;
  auto ev = bind(t, p, cfg);
  const Matrix<double> u = encode(g, batch, ev, ForwardMode{}).value();
  auto direct = layer_forward(ev.layers[0], t.constant(g.features()), t.constant(take_rows(g.features(), batch.level(1))),
                              batch.depth_frontiers[0].offsets, ForwardMode{});
  EXPECT_LT((u - direct.value()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Encoder, AttentionRowsSumToOneAtEveryDepth) {
  const auto g = test::small_synthetic(1, 150).cast<double>();
  const auto cfg = EncoderConfig{2, 16, 8, AggregatorKind::attention};
  Rng rng(5);
  auto p = init_encoder<double>(cfg, g.feature_dim(), rng);
  const std::vector<Index> targets{0, 1, 2, 3, 4, 5, 6, 7};
  const std::vector<int> sizes{6, 4};
  const auto batch = sample_neighborhood(g, std::span<const Index>(targets), std::span<const int>(sizes), std::uint64_t{2});
  Tape<double> t;
  auto ev = bind(t, p, cfg);
  // depth-1 inputs are raw features at every level
  for (int l = 0; l < 2; ++l) {
    const auto& f = batch.depth_frontiers[static_cast<std::size_t>(l)];
    auto alpha = attention_coefficients(ev.layers[0], t.constant(take_rows(g.features(), batch.level(l))),
                                        t.constant(take_rows(g.features(), f.nodes)), f.offsets);
    for (std::size_t s = 0; s < f.parents(); ++s) {
      double sum = 0.0;
      for (std::size_t i = f.offsets[s]; i < f.offsets[s + 1]; ++i) sum += alpha.value()(static_cast<Index>(i), 0);
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
  // depth 2 on random unit rows
  const Matrix<double> ht = test::gaussian(8, 16, 1), hn = test::gaussian(48, 16, 2);
  auto alpha2 = attention_coefficients(ev.layers[1], t.constant(ht), t.constant(hn), batch.depth_frontiers[0].offsets);
  for (Index s = 0; s < 8; ++s) EXPECT_NEAR(alpha2.value().middleRows(s * 6, 6).sum(), 1.0, 1e-6);
}

TEST(Encoder, PermutingSampledNeighborsLeavesOutputUnchanged) {
  const auto g = test::small_synthetic(2, 150).cast<double>();
  for (auto kind : {AggregatorKind::attention, AggregatorKind::mean}) {
    const auto cfg = EncoderConfig{2, 16, 8, kind};
    Rng rng(6);
    auto p = init_encoder<double>(cfg, g.feature_dim(), rng);
    const std::vector<Index> targets{10, 20, 30};
    const std::vector<int> sizes{5, 3};
    const auto batch = sample_neighborhood(g, std::span<const Index>(targets), std::span<const int>(sizes), std::uint64_t{3});
    // reverse each depth-1 group and carry its depth-2 children along
    SampledBatch perm = batch;
    for (std::size_t s = 0; s < targets.size(); ++s)
      for (std::size_t i = 0; i < 5; ++i) {
        const std::size_t from = s * 5 + i, to = s * 5 + (4 - i);
        perm.depth_frontiers[0].nodes[to] = batch.depth_frontiers[0].nodes[from];
        for (std::size_t c = 0; c < 3; ++c) perm.depth_frontiers[1].nodes[to * 3 + c] = batch.depth_frontiers[1].nodes[from * 3 + (2 - c)];
      }
    Tape<double> t;
    auto ev = bind(t, p, cfg);
    const Matrix<double> a = encode(g, batch, ev, ForwardMode{}).value();
    const Matrix<double> b = encode(g, perm, ev, ForwardMode{}).value();
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-6) << to_string(kind);
  }
}

TEST(Encoder, UnrelatedComponentDoesNotChangeEmbeddings) {
  const auto g = toy_graph();
  // Append a disconnected triangle 6-7-8 with its own features.
  Matrix<double> x(9, 3);
  x.topRows(6) = g.features();
  x.bottomRows(3) = test::gaussian(3, 3, 9);
  std::vector<std::pair<Index, Index>> edges{{0, 1}, {0, 2}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {6, 7}, {7, 8}, {6, 8}};
  const auto bigger = graph_from_edges<double>(9, edges, x, {0, 0, 0, 1, 1, 1, 0, 1, 0}, 2);
  const auto cfg = toy_encoder(AggregatorKind::attention);
  Rng rng(7);
  auto p = init_encoder<double>(cfg, 3, rng);
  const auto nodes = all_nodes(6);
  Tape<double> t;
  auto ev = bind(t, p, cfg);
  const Matrix<double> a = encode(g, exhaustive_neighborhood(g, std::span<const Index>(nodes), 2), ev, ForwardMode{}).value();
  const Matrix<double> b = encode(bigger, exhaustive_neighborhood(bigger, std::span<const Index>(nodes), 2), ev, ForwardMode{}).value();
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())));
  // keyed sampling gives each node the same tree in both graphs
  const std::vector<int> sizes{3, 2};
  const Matrix<double> ka =
      encode(g, sample_neighborhood_keyed(g, std::span<const Index>(nodes), std::span<const int>(sizes), 5), ev, ForwardMode{}).value();
  const Matrix<double> kb =
      encode(bigger, sample_neighborhood_keyed(bigger, std::span<const Index>(nodes), std::span<const int>(sizes), 5), ev, ForwardMode{})
          .value();
  EXPECT_EQ(0, std::memcmp(ka.data(), kb.data(), sizeof(double) * static_cast<std::size_t>(ka.size())));
}

TEST(Encoder, UniformAttentionEqualsMeanAggregator) {
  const auto g = test::small_synthetic(3, 120).cast<double>();
  const auto att_cfg = EncoderConfig{2, 16, 8, AggregatorKind::attention};
  const auto mean_cfg = EncoderConfig{2, 16, 8, AggregatorKind::mean};
  Rng rng(8);
  auto att = init_encoder<double>(att_cfg, g.feature_dim(), rng);
  auto mean = init_encoder<double>(mean_cfg, g.feature_dim(), rng);
  for (std::size_t k = 0; k < 2; ++k) {
    att.layers[k].attention_vector.value.setZero();  // every logit 0, so α is uniform
    mean.layers[k].self_weight.value = att.layers[k].self_weight.value;
    mean.layers[k].neighbor_weight.value = att.layers[k].neighbor_weight.value;
  }
  const std::vector<Index> targets{1, 2, 3, 50, 60};
  const std::vector<int> sizes{7, 4};
  const auto batch = sample_neighborhood(g, std::span<const Index>(targets), std::span<const int>(sizes), std::uint64_t{1});
  Tape<double> t;
  const Matrix<double> a = encode(g, batch, bind(t, att, att_cfg), ForwardMode{}).value();
  const Matrix<double> b = encode(g, batch, bind(t, mean, mean_cfg), ForwardMode{}).value();
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Encoder, DropoutOnlyInTrainingAndNeedsRng) {
  const auto g = toy_graph();
  const auto cfg = toy_encoder(AggregatorKind::attention);
  Rng rng(9);
  auto p = init_encoder<double>(cfg, 3, rng);
  const auto nodes = all_nodes(6);
  const auto batch = exhaustive_neighborhood(g, std::span<const Index>(nodes), 2);
  Tape<double> t;
  auto ev = bind(t, p, cfg);
  const Matrix<double> clean = encode(g, batch, ev, ForwardMode{}).value();
  EXPECT_EQ(encode(g, batch, ev, ForwardMode{false, 0.5, nullptr}).value(), clean);
  EXPECT_THROW(encode(g, batch, ev, ForwardMode{true, 0.5, nullptr}), config_error);
  Rng drop(1);
  EXPECT_NE(encode(g, batch, ev, ForwardMode{true, 0.5, &drop}).value(), clean);
}

TEST(Encoder, ConfigAndShapeErrors) {
  EXPECT_THROW((EncoderConfig{2, 7, 8, AggregatorKind::attention}.validate()), config_error);
  EXPECT_THROW((EncoderConfig{2, 8, 7, AggregatorKind::attention}.validate()), config_error);
  EXPECT_THROW((EncoderConfig{0, 8, 8, AggregatorKind::attention}.validate()), config_error);
  EXPECT_THROW((EncoderConfig{2, 8, 8, AggregatorKind::attention, 4}.validate()), config_error);
  EXPECT_NO_THROW((EncoderConfig{2, 7, 8, AggregatorKind::none_mlp}.validate()));
  const auto g = toy_graph();
  const auto cfg = toy_encoder(AggregatorKind::attention);
  Rng rng(1);
  auto p = init_encoder<double>(cfg, 3, rng);
  const auto nodes = all_nodes(6);
  Tape<double> t;
  EXPECT_THROW(encode(g, exhaustive_neighborhood(g, std::span<const Index>(nodes), 1), bind(t, p, cfg), ForwardMode{}), shape_error);
}

TEST(Encoder, DefaultShapes) {
  const auto g = test::small_synthetic(4, 100);
  EncoderConfig cfg;
  Rng rng(1);
  auto p = init_encoder<float>(cfg, g.feature_dim(), rng);
  EXPECT_EQ(p.layers[0].self_weight.value.cols(), 128);
  EXPECT_EQ(p.layers[0].attention_weight.value.cols(), 256);
  EXPECT_EQ(p.layers[1].self_weight.value.rows(), 256);
  const std::vector<Index> targets{0, 1, 2};
  const std::vector<int> sizes{25, 10};
  Tape<float> t;
  auto u = encode(g, sample_neighborhood(g, std::span<const Index>(targets), std::span<const int>(sizes), std::uint64_t{0}),
                  bind(t, p, cfg), ForwardMode{});
  EXPECT_EQ(u.rows(), 3);
  EXPECT_EQ(u.cols(), 256);
}

TEST(Classifier, ZeroWeightsGiveUniformRows) {
  ClassifierParams<double> c{Parameter<double>("w", "classifier", Matrix<double>::Zero(4, 5)),
                             Parameter<double>("b", "classifier", Matrix<double>::Zero(1, 5))};
  Tape<double> t;
  auto probs = classify(t.constant(test::gaussian(3, 4, 1)), bind(t, c));
  EXPECT_LT((probs.value().array() - 0.2).abs().maxCoeff(), 1e-15);
}

TEST(Classifier, MatchesScalarOracle) {
  ClassifierParams<double> c{Parameter<double>("w", "classifier", test::gaussian(4, 3, 2)),
                             Parameter<double>("b", "classifier", test::gaussian(1, 3, 3))};
  const Matrix<double> u = test::gaussian(5, 4, 4);
  Tape<double> t;
  const Matrix<double> probs = classify(t.constant(u), bind(t, c)).value();
  for (Index i = 0; i < 5; ++i) {
    std::vector<double> s(3);
    double z = 0.0;
    for (Index k = 0; k < 3; ++k) {
      s[static_cast<std::size_t>(k)] = c.bias.value(0, k);
      for (Index j = 0; j < 4; ++j) s[static_cast<std::size_t>(k)] += u(i, j) * c.weight.value(j, k);
      z += std::exp(s[static_cast<std::size_t>(k)]);
    }
    for (Index k = 0; k < 3; ++k) EXPECT_NEAR(probs(i, k), std::exp(s[static_cast<std::size_t>(k)]) / z, 1e-12);
  }
  Matrix<double> scores(1, 2);
  scores << 0.9, 0.1;
  EXPECT_EQ(predict(scores), std::vector<int>{0});
}

TEST(Mlp, ZeroWeightsGiveUniformAndChainOracle) {
  EncoderConfig cfg{1, 2, 2, AggregatorKind::none_mlp};
  Rng rng(1);
  auto p = init_encoder<double>(cfg, 2, rng);
  ClassifierParams<double> c{Parameter<double>("w", "classifier", Matrix<double>::Zero(2, 2)),
                             Parameter<double>("b", "classifier", Matrix<double>::Zero(1, 2))};
  Matrix<double> x(2, 2);
  x << 1.0, -2.0, 0.5, 3.0;
  Tape<double> t;
  auto out = mlp_forward(x, {0, 1}, bind(t, p, cfg), bind(t, c), ForwardMode{});
  EXPECT_LT((out.value().array() - 0.5).abs().maxCoeff(), 1e-15);

  // identity weights: hidden = relu(x), scores = relu(x)
  p.mlp_weight.value = Matrix<double>::Identity(2, 2);
  p.mlp_bias.value.setZero();
  c.weight.value = Matrix<double>::Identity(2, 2);
  Tape<double> t2;
  const Matrix<double> probs = mlp_forward(x, {0, 1}, bind(t2, p, cfg), bind(t2, c), ForwardMode{}).value();
  EXPECT_NEAR(probs(0, 0), std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-12);
  EXPECT_NEAR(probs(1, 1), std::exp(3.0) / (std::exp(0.5) + std::exp(3.0)), 1e-12);
  EXPECT_EQ(p.mlp_weight.value.cols(), embedding_dim(cfg));
}

TEST(Gradients, FullPipelinePassesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u})
    for (const auto& r : gradcheck_suite(seed)) EXPECT_LT(r.report.max_rel_error, 1e-3) << r.name << " seed " << seed;
}

TEST(Gradients, EveryParameterIsExercised) {
  for (const auto& r : gradcheck_suite(3))
    for (const auto& e : r.report.entries) EXPECT_GT(e.max_abs_analytic, 0.0) << r.name << " " << e.param;
}
