// Acceptance harness: `again_acceptance --criterion N` runs one criterion and
// ends with a single "PASS criterion N: ..." or "FAIL criterion N: ..." line.
// Exit status 0 on pass, 1 on fail.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "again/again.hpp"
#include "helpers.hpp"
#include "oracle.hpp"

using namespace again;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string summary;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

std::string sci(double v) {
  std::ostringstream out;
  out << std::scientific << std::setprecision(2) << v;
  return out.str();
}

std::vector<Index> all_nodes(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

// ---------------------------------------------------------------- datasets

std::optional<Dataset> find_dataset(const std::string& name, std::string& why) {
  const fs::path dir = default_data_root() / name;
  if (!DatasetPaths{dir}.complete()) {
    why = name + " not found under " + dir.string() + " (set " + kDataRootEnv + ")";
    return std::nullopt;
  }
  return load_dataset(dir, name);
}

std::optional<NodeSplit> planetoid_split(const Dataset& d, int n, std::string& why) {
  if (!d.fixed_split || static_cast<Index>(d.fixed_split->labeled.size()) != static_cast<Index>(n) * d.graph.class_count()) {
    why = d.name + " has no fixed split with " + std::to_string(n) + " labeled nodes per class at " + d.paths.split().string();
    return std::nullopt;
  }
  return d.fixed_split;
}

/// Same size, class count, vocabulary and average degree as Cora.
AttributedGraph cora_sized_synthetic(std::uint64_t seed) {
  SyntheticSpec s;
  s.nodes = 2708;
  s.classes = 7;
  s.feature_dim = 1433;
  s.p_in = 0.009;
  s.p_out = 0.00017;
  s.words_per_node = 18;
  s.topic_purity = 0.5;
  s.seed = seed;
  return make_planted_partition(s);
}

TrainConfig paper_config(const std::string& dataset, Mode mode, int n, std::uint64_t seed) {
  auto cfg = dataset_defaults(dataset, n);
  cfg.mode = mode;
  cfg.seed = seed;
  cfg.log_wall_clock = false;
  return cfg.resolved();
}

struct RunOutcome {
  double accuracy = 0.0;
  double seconds = 0.0;
  ParameterSet<float> params;
  TrainConfig cfg;
};

RunOutcome train_and_evaluate(const Dataset& d, const NodeSplit& split, Mode mode, int n, std::uint64_t seed) {
  RunOutcome r;
  r.cfg = paper_config(d.name, mode, n, seed);
  const auto t0 = std::chrono::steady_clock::now();
  r.params = train(d.graph, split, r.cfg).params;
  r.seconds = seconds_since(t0);
  r.accuracy = evaluate_accuracy(d.graph, split, r.params, r.cfg, seed);
  std::cerr << "  " << d.name << " " << to_string(mode) << " seed " << seed << ": accuracy " << fixed(100 * r.accuracy) << "% in "
            << fixed(r.seconds, 1) << " s\n";
  return r;
}

constexpr int kSeeds = 10;

struct SeedStats {
  MeanStd accuracy;
  double slowest = 0.0;
};

SeedStats over_seeds(const Dataset& d, const NodeSplit& split, Mode mode, int n) {
  std::vector<double> acc;
  SeedStats s;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto r = train_and_evaluate(d, split, mode, n, seed);
    acc.push_back(r.accuracy);
    s.slowest = std::max(s.slowest, r.seconds);
  }
  s.accuracy = mean_std(acc);
  return s;
}

// ---------------------------------------------------------------- criteria

Verdict gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto suite = gradcheck_suite(3);
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : suite) {
    std::cout << "  " << c.name << ": max relative error " << sci(c.report.max_rel_error) << " (" << c.report.worst << ")\n";
    if (c.report.max_rel_error > worst) {
      worst = c.report.max_rel_error;
      worst_name = c.name;
    }
  }
  const bool pass = worst < 1e-3 && elapsed < 10.0;
  return {pass, "max relative error " + sci(worst) + " in " + worst_name + " (< 1e-3), " + fixed(elapsed, 3) + " s (< 10 s)"};
}

Verdict forward_oracle() {
  const auto g = toy_graph();
  const auto nodes = all_nodes(g.node_count());
  const auto batch = exhaustive_neighborhood(g, std::span<const Index>(nodes), 2);
  const auto depth1 = exhaustive_neighborhood(g, std::span<const Index>(nodes), 1);
  double value_err = 0.0, alpha_err = 0.0, sum_err = 0.0, norm_err = 0.0;
  int cases = 0;
  for (auto kind : {AggregatorKind::attention, AggregatorKind::mean})
    for (Index width : {Index{8}, Index{256}})
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        EncoderConfig cfg;
        cfg.aggregator = kind;
        cfg.hidden_dim = width;
        cfg.attention_vector_dim = width == 8 ? 6 : cfg.attention_vector_dim;
        Rng rng(seed);
        auto p = init_encoder<double>(cfg, g.feature_dim(), rng);
        std::vector<std::vector<oracle::Vec>> oracle_alpha;
        const auto expected = oracle::all_depths(g, p, kind == AggregatorKind::attention, &oracle_alpha);

        Tape<double> t;
        auto ev = bind(t, p, cfg);
        const Matrix<double> u = encode(g, batch, ev, ForwardMode{}).value();
        for (Index v = 0; v < g.node_count(); ++v) {
          double sq = 0.0;
          for (Index j = 0; j < u.cols(); ++j) {
            value_err = std::max(value_err, std::abs(u(v, j) - expected[2][static_cast<std::size_t>(v)][static_cast<std::size_t>(j)]));
            sq += u(v, j) * u(v, j);
          }
          norm_err = std::max(norm_err, std::abs(std::sqrt(sq) - 1.0));
        }
        ++cases;
        if (kind != AggregatorKind::attention) continue;

        // Library attention at both layers: layer 1 on raw features, layer 2
        // on the library's own depth-1 representations of every node.
        const auto& f1 = depth1.depth_frontiers[0];
        const auto h1 = layer_forward(ev.layers[0], t.constant(g.features()), t.constant(take_rows(g.features(), f1.nodes)),
                                      f1.offsets, ForwardMode{});
        const auto& f = batch.depth_frontiers[0];
        const Var<double> alphas[2] = {
            attention_coefficients(ev.layers[0], t.constant(g.features()), t.constant(take_rows(g.features(), f.nodes)), f.offsets),
            attention_coefficients(ev.layers[1], h1, t.constant(take_rows(h1.value(), f.nodes)), f.offsets)};
        for (int layer = 0; layer < 2; ++layer)
          for (std::size_t v = 0; v < f.parents(); ++v) {
            double sum = 0.0;
            const auto& reference = oracle_alpha[static_cast<std::size_t>(layer)][v];
            for (std::size_t i = f.offsets[v]; i < f.offsets[v + 1]; ++i) {
              const double a = alphas[layer].value()(static_cast<Index>(i), 0);
              sum += a;
              alpha_err = std::max(alpha_err, std::abs(a - reference.at(i - f.offsets[v])));
            }
            sum_err = std::max(sum_err, std::abs(sum - 1.0));
          }
      }
  const bool pass = value_err <= 1e-9 && alpha_err <= 1e-9 && sum_err <= 1e-6 && norm_err <= 1e-5;
  return {pass, std::to_string(cases) + " encoders: max |u - oracle| " + sci(value_err) + " (<= 1e-9), max |alpha - oracle| " +
                    sci(alpha_err) + ", attention row-sum error " + sci(sum_err) + " (<= 1e-6), unit-norm error " + sci(norm_err) +
                    " (<= 1e-5)"};
}

Verdict citation_accuracy() {
  struct Target {
    const char* dataset;
    Mode mode;
    double lo, hi;
  };
  const Target targets[] = {{"cora", Mode::gain, 75.0, 85.0}, {"citeseer", Mode::again, 65.0, 75.0}, {"pubmed", Mode::again, 72.5, 82.5}};
  bool pass = true;
  std::string summary;
  for (const auto& target : targets) {
    std::string why;
    auto d = find_dataset(target.dataset, why);
    std::optional<NodeSplit> split;
    if (d) split = planetoid_split(*d, 20, why);
    if (!split) {
      pass = false;
      summary += std::string(summary.empty() ? "" : "; ") + why;
      continue;
    }
    const auto s = over_seeds(*d, *split, target.mode, 20);
    const double mean = 100.0 * s.accuracy.mean;
    const bool ok = mean >= target.lo && mean <= target.hi && s.slowest < 20 * 60;
    pass = pass && ok;
    summary += std::string(summary.empty() ? "" : "; ") + to_string(target.mode) + " " + target.dataset + " " + fixed(mean) + " +/- " +
               fixed(100.0 * s.accuracy.std) + " (want [" + fixed(target.lo, 1) + ", " + fixed(target.hi, 1) + "]), slowest run " +
               fixed(s.slowest, 0) + " s";
  }
  return {pass, summary};
}

Verdict ablation_ordering() {
  std::string why;
  auto d = find_dataset("cora", why);
  std::optional<NodeSplit> split;
  if (d) split = planetoid_split(*d, 20, why);
  if (!split) return {false, why};
  const double mlp = 100.0 * over_seeds(*d, *split, Mode::mlp, 20).accuracy.mean;
  const double gain = 100.0 * over_seeds(*d, *split, Mode::gain, 20).accuracy.mean;
  const double gs = 100.0 * over_seeds(*d, *split, Mode::gs_mean, 20).accuracy.mean;
  const bool pass = mlp + 10.0 < gain && std::abs(gs - gain) < 3.0;
  return {pass, "cora n=20: MLP " + fixed(mlp) + ", GAIN " + fixed(gain) + ", GS-mean " + fixed(gs) +
                    " (want MLP + 10 < GAIN and |GS-mean - GAIN| < 3)"};
}

/// Non-increasing, allowing one rise of at most `slack`.
bool degrades(const std::vector<double>& means, double slack) {
  int rises = 0;
  for (std::size_t i = 1; i < means.size(); ++i) {
    const double rise = means[i] - means[i - 1];
    if (rise > 0.0) {
      ++rises;
      if (rise > slack) return false;
    }
  }
  return rises <= 1;
}

Verdict robustness_trend() {
  std::string why;
  auto d = find_dataset("cora", why);
  if (!d) return {false, why};
  const std::vector<double> lambdas{0.0, 0.5, 1.0, 1.5};
  const Mode modes[] = {Mode::gs_mean, Mode::gain, Mode::again};
  std::vector<RobustnessReport> pooled;
  for (Mode mode : modes) {
    std::vector<RobustnessReport> per_seed;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      const auto split = choose_split(*d, 60, 1000, seed);
      auto r = train_and_evaluate(*d, split, mode, 60, seed);
      SweepOptions opt;
      opt.lambdas = lambdas;
      opt.etas = {0.1};
      opt.seeds = {seed};
      per_seed.push_back(robustness_sweep(d->graph, split, r.params, r.cfg, opt));
    }
    pooled.push_back(pool_reports(per_seed));
  }
  bool pass = true;
  std::string summary = "cora n=60, eta=0.1:";
  for (std::size_t m = 0; m < pooled.size(); ++m) {
    std::vector<double> means;
    for (std::size_t li = 0; li < lambdas.size(); ++li) means.push_back(100.0 * pooled[m].cell(li, 0).summary().mean);
    const bool ok = degrades(means, 0.5);
    pass = pass && ok;
    summary += " " + to_string(modes[m]) + " [";
    for (std::size_t i = 0; i < means.size(); ++i) summary += (i ? " " : "") + fixed(means[i]);
    summary += std::string("]") + (ok ? "" : " (not degrading)");
  }
  const double again_at_1 = 100.0 * pooled[2].cell(2, 0).summary().mean;
  const double gs_at_1 = 100.0 * pooled[0].cell(2, 0).summary().mean;
  pass = pass && again_at_1 > gs_at_1;
  summary += "; lambda=1: AGAIN " + fixed(again_at_1) + " vs GS-mean " + fixed(gs_at_1);
  return {pass, summary};
}

/// ||cov(U) - 10^p I||_F over the rows of U.
double prior_distance(const Matrix<float>& embeddings, int power) {
  const Eigen::MatrixXd u = embeddings.cast<double>();
  const Eigen::MatrixXd centered = u.rowwise() - u.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(u.rows() - 1);
  return (cov - std::pow(10.0, power) * Eigen::MatrixXd::Identity(cov.rows(), cov.cols())).norm();
}

Verdict prior_matching() {
  const AttributedGraph graph = cora_sized_synthetic(0);
  bool pass = true;
  std::string summary = "cora-sized random graph, d=256, 200 adversarial-only epochs:";
  for (int power : {-1, 0}) {
    std::vector<double> reductions;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto split = make_split(graph, 20, 1000, seed);
      auto cfg = dataset_defaults("cora", 20);
      cfg.mode = Mode::again;
      cfg.adversarial_only = true;
      cfg.prior.power_exponent = power;
      cfg.seed = seed;
      cfg.log_wall_clock = false;
      cfg = cfg.resolved();
      const auto view = build_training_view(graph, split);
      auto initial = init_parameters<float>(cfg, graph.feature_dim(), graph.class_count());
      const double before = prior_distance(embed(view.graph, view.observed, initial, cfg, seed).embeddings, power);
      const auto t0 = std::chrono::steady_clock::now();
      auto trained = train(graph, split, cfg);
      const double after = prior_distance(embed(view.graph, view.observed, trained.params, cfg, seed).embeddings, power);
      reductions.push_back(1.0 - after / before);
      std::cerr << "  p=" << power << " seed " << seed << ": " << fixed(before, 4) << " -> " << fixed(after, 4) << " ("
                << fixed(100.0 * reductions.back(), 1) << "% reduction, " << fixed(seconds_since(t0), 1) << " s)\n";
    }
    const double mean = mean_std(reductions).mean;
    pass = pass && mean >= 0.25;
    summary += " p=" + std::to_string(power) + " mean reduction " + fixed(100.0 * mean, 1) + "%";
  }
  summary += " (want >= 25% for each p)";
  return {pass, summary};
}

Verdict inductive_isolation() {
  std::string why;
  auto d = find_dataset("cora", why);
  const std::string name = d ? "cora" : "cora-sized synthetic graph";
  const AttributedGraph graph = d ? d->graph : cora_sized_synthetic(1);
  const auto split = make_split(graph, 20, 1000, 0);
  Matrix<float> x = graph.features();
  for (std::size_t i = 0; i < split.unseen_test.size(); ++i)
    x.row(split.unseen_test[i]).setConstant(i % 2 ? std::numeric_limits<float>::infinity() : std::numeric_limits<float>::quiet_NaN());
  const auto poisoned = graph.with_features(x);

  const test::TempDir dir;
  bool pass = true;
  std::string summary = name + ", " + std::to_string(split.unseen_test.size()) + " test rows set to NaN/inf, 50 epochs:";
  for (Mode mode : {Mode::again, Mode::gain, Mode::gs_mean, Mode::mlp}) {
    auto cfg = paper_config("cora", mode, 20, 0);
    cfg.max_epochs = 50;
    bool finite = true;
    TrainResult<float> dirty;
    try {
      dirty = train(poisoned, split, cfg);
    } catch (const numeric_error& e) {
      finite = false;
      std::cerr << "  " << to_string(mode) << ": " << e.what() << "\n";
    }
    for (const auto& e : dirty.log.epochs)
      for (const auto& loss : {e.sup_loss, e.dis_loss, e.gen_loss}) finite = finite && (!loss || std::isfinite(*loss));
    bool unaffected = false;
    double acc = std::numeric_limits<double>::quiet_NaN();
    if (finite) {
      auto clean = train(graph, split, cfg);
      save_checkpoint(dir.file("dirty"), cfg, graph.feature_dim(), graph.class_count(), dirty.params);
      save_checkpoint(dir.file("clean"), cfg, graph.feature_dim(), graph.class_count(), clean.params);
      acc = evaluate_accuracy(graph, split, dirty.params, cfg, 0);
      unaffected = test::read_bytes(dir.file("dirty")) == test::read_bytes(dir.file("clean")) &&
                   acc == evaluate_accuracy(graph, split, clean.params, cfg, 0);
    }
    pass = pass && finite && unaffected;
    summary += " " + to_string(mode) + (finite ? " finite" : " NON-FINITE") + (unaffected ? ", clean eval identical" : ", clean eval differs") +
               " (" + fixed(100.0 * acc) + "%)";
  }
  return {pass, summary};
}

Verdict silhouette_oracle() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = std::uniform_int_distribution<Index>(2, 200)(rng);
    const Index dim = std::uniform_int_distribution<Index>(1, 16)(rng);
    const int classes = std::uniform_int_distribution<int>(2, 6)(rng);
    const Matrix<double> points = test::gaussian(n, dim, static_cast<std::uint64_t>(1000 + trial));
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& y : labels) y = std::uniform_int_distribution<int>(0, classes - 1)(rng);
    labels[0] = 0;
    labels[1] = 1;
    worst = std::max(worst, std::abs(silhouette(points, labels) - oracle::silhouette(points, labels)));
  }
  return {worst <= 1e-9, "50 instances of <= 200 points, max |library - brute force| " + sci(worst) + " (<= 1e-9)"};
}

Verdict determinism() {
  std::string why;
  auto d = find_dataset("cora", why);
  const std::string name = d ? "cora" : "cora-sized synthetic graph";
  const AttributedGraph graph = d ? d->graph : cora_sized_synthetic(2);
  const auto split = make_split(graph, 20, 1000, 7);
  const test::TempDir dir;
  bool pass = true;
  std::string summary = name + ", 20 epochs at default dimensions:";
  for (Mode mode : {Mode::again, Mode::gain}) {
    auto cfg = paper_config("cora", mode, 20, 7);
    cfg.max_epochs = 20;
    std::string logs[2], bytes[2];
    for (int run = 0; run < 2; ++run) {
      auto r = train(graph, split, cfg);
      logs[run] = r.log.to_csv();
      const auto path = dir.file("run" + std::to_string(run));
      save_checkpoint(path, cfg, graph.feature_dim(), graph.class_count(), r.params);
      bytes[run] = test::read_bytes(path);
    }
    const bool same = logs[0] == logs[1] && bytes[0] == bytes[1];
    pass = pass && same;
    summary += " " + to_string(mode) + (same ? " identical" : " DIFFERS") + " (" + std::to_string(bytes[0].size()) + "-byte checkpoint)";
  }
  return {pass, summary};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int criterion = 0;
  app.add_option("--criterion", criterion, "Criterion number (1-9)")->required()->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  Verdict (*const runners[])() = {gradient_correctness, forward_oracle,      citation_accuracy, ablation_ordering, robustness_trend,
                                  prior_matching,       inductive_isolation, silhouette_oracle, determinism};
  Verdict v;
  try {
    v = runners[criterion - 1]();
  } catch (const std::exception& e) {
    v = {false, std::string("error: ") + e.what()};
  }
  std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << criterion << ": " << v.summary << std::endl;
  return v.pass ? 0 : 1;
}
