#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "again/trainer.hpp"

namespace again {

/// Fraction of unseen test nodes classified correctly. Neighborhoods are
/// sampled on the full graph, which includes the test nodes and their edges.
template <class T>
double evaluate_accuracy(const BasicGraph<T>& g_full, const NodeSplit& split, ParameterSet<T>& params, const TrainConfig& cfg,
                         std::uint64_t seed) {
  if (split.unseen_test.empty()) throw validation_error("split has no test nodes");
  for (Index v : split.unseen_test)
    if (!g_full.has_label(v)) throw data_error("test node '" + g_full.id(v) + "' has no label");
  const auto probs = predict_proba(g_full, split.unseen_test, params, cfg, seed);
  const auto pred = predict(probs);
  Index correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == g_full.label(split.unseen_test[i]);
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Population standard deviation.
inline MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  double s = 0.0;
  for (double x : xs) s += x;
  const double mean = s / static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - mean) * (x - mean);
  return {mean, std::sqrt(v / static_cast<double>(xs.size()))};
}

/// Mean silhouette with Euclidean distance. Points alone in their class
/// score 0.
template <class T>
double silhouette(const Matrix<T>& points, const std::vector<int>& labels) {
  const Index n = points.rows();
  if (static_cast<Index>(labels.size()) != n) throw shape_error("silhouette: label count does not match point count");
  if (n < 2) throw validation_error("silhouette needs at least 2 points");
  int classes = 0;
  for (int y : labels) {
    if (y < 0) throw range_error("silhouette: negative label");
    classes = std::max(classes, y + 1);
  }
  std::vector<Index> size(static_cast<std::size_t>(classes), 0);
  for (int y : labels) ++size[static_cast<std::size_t>(y)];
  int present = 0;
  for (Index c : size) present += c > 0;
  if (present < 2) throw validation_error("silhouette is undefined for a single class");

  // dist_sum(i, c): summed distance from point i to the members of class c
  Eigen::MatrixXd dist_sum = Eigen::MatrixXd::Zero(n, classes);
  const Eigen::MatrixXd x = points.template cast<double>();
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const double d = (x.row(i) - x.row(j)).norm();
      dist_sum(i, labels[static_cast<std::size_t>(j)]) += d;
      dist_sum(j, labels[static_cast<std::size_t>(i)]) += d;
    }
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int own = labels[static_cast<std::size_t>(i)];
    const Index own_size = size[static_cast<std::size_t>(own)];
    if (own_size < 2) continue;
    const double a = dist_sum(i, own) / static_cast<double>(own_size - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < classes; ++c)
      if (c != own && size[static_cast<std::size_t>(c)] > 0) b = std::min(b, dist_sum(i, c) / static_cast<double>(size[static_cast<std::size_t>(c)]));
    const double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

/// Projection onto the top two principal components, signs fixed so each
/// component's largest-magnitude loading is positive.
template <class T>
Eigen::MatrixXd pca2(const Matrix<T>& points) {
  if (points.rows() < 2 || points.cols() < 2) throw validation_error("pca2 needs at least 2 points of dimension >= 2");
  Eigen::MatrixXd x = points.template cast<double>();
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw numeric_error("pca2: eigendecomposition failed");
  const Index d = cov.rows();
  Eigen::MatrixXd basis(d, 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - k);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    basis.col(k) = v;
  }
  return x * basis;
}

struct RobustnessCell {
  double noise_ratio = 0.0;    // λ
  double node_fraction = 0.0;  // η
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;

  MeanStd summary() const { return mean_std(accuracies); }
};

/// Accuracy over a (λ, η) grid; cells are stored λ-major.
struct RobustnessReport {
  std::string mode;
  std::vector<double> lambdas;
  std::vector<double> etas;
  std::vector<RobustnessCell> cells;

  const RobustnessCell& cell(std::size_t li, std::size_t ei) const { return cells.at(li * etas.size() + ei); }
  RobustnessCell& cell(std::size_t li, std::size_t ei) { return cells.at(li * etas.size() + ei); }

  /// Rows λ, columns η; entries are mean accuracies (std when `std_dev`).
  std::string to_csv(bool std_dev = false) const {
    std::ostringstream out;
    out << "lambda";
    for (double e : etas) out << ",eta=" << io_detail::format_number(e);
    out << '\n';
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      out << io_detail::format_number(lambdas[i]);
      for (std::size_t j = 0; j < etas.size(); ++j) {
        const auto s = cell(i, j).summary();
        out << ',' << io_detail::format_number(std_dev ? s.std : s.mean);
      }
      out << '\n';
    }
    return out.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["mode"] = mode;
    j["lambdas"] = lambdas;
    j["etas"] = etas;
    j["cells"] = nlohmann::json::array();
    for (const auto& c : cells) {
      const auto s = c.summary();
      j["cells"].push_back({{"lambda", c.noise_ratio}, {"eta", c.node_fraction}, {"mean", s.mean}, {"std", s.std},
                            {"seeds", c.seeds}, {"accuracies", c.accuracies}});
    }
    return j;
  }
};

struct SweepOptions {
  std::vector<double> lambdas{0.0, 0.5, 1.0, 1.5};
  std::vector<double> etas{0.1};
  std::vector<std::uint64_t> seeds{0};
  bool test_nodes_only = false;
  bool resample_noise_per_lambda = false;
};

/// Re-evaluates one trained model under feature noise. r comes from the
/// clean graph. Seed s drives both the noise and the test-time sampling, so
/// λ=0 cells reproduce evaluate_accuracy(g, ..., s) exactly. Unless
/// resample_noise_per_lambda is set, a seed corrupts the same nodes with the
/// same draws at every λ.
template <class T>
RobustnessReport robustness_sweep(const BasicGraph<T>& g, const NodeSplit& split, ParameterSet<T>& params, const TrainConfig& cfg,
                                  const SweepOptions& opt) {
  RobustnessReport report;
  report.mode = to_string(cfg.mode);
  report.lambdas = opt.lambdas;
  report.etas = opt.etas;
  const double amplitude = reference_amplitude(g);
  std::vector<Index> eligible;
  if (opt.test_nodes_only) {
    eligible = split.unseen_test;
  } else {
    eligible.resize(static_cast<std::size_t>(g.node_count()));
    std::iota(eligible.begin(), eligible.end(), Index{0});
  }
  for (std::size_t li = 0; li < opt.lambdas.size(); ++li)
    for (std::size_t ei = 0; ei < opt.etas.size(); ++ei) {
      RobustnessCell c;
      c.noise_ratio = opt.lambdas[li];
      c.node_fraction = opt.etas[ei];
      for (std::uint64_t s : opt.seeds) {
        const std::uint64_t noise_seed = opt.resample_noise_per_lambda ? mix_seed(s, li) : s;
        const auto noisy = inject_feature_noise(g, NoiseSpec{c.noise_ratio, c.node_fraction, noise_seed}, amplitude,
                                                std::span<const Index>(eligible));
        c.seeds.push_back(s);
        c.accuracies.push_back(evaluate_accuracy(noisy, split, params, cfg, s));
      }
      report.cells.push_back(std::move(c));
    }
  return report;
}

/// Pools the per-seed accuracies of reports over the same grid (one report
/// per independently trained model).
inline RobustnessReport pool_reports(const std::vector<RobustnessReport>& reports) {
  if (reports.empty()) throw validation_error("no reports to pool");
  RobustnessReport out = reports.front();
  for (std::size_t r = 1; r < reports.size(); ++r) {
    const auto& other = reports[r];
    if (other.lambdas != out.lambdas || other.etas != out.etas) throw validation_error("cannot pool reports over different grids");
    for (std::size_t i = 0; i < out.cells.size(); ++i) {
      auto& c = out.cells[i];
      c.seeds.insert(c.seeds.end(), other.cells[i].seeds.begin(), other.cells[i].seeds.end());
      c.accuracies.insert(c.accuracies.end(), other.cells[i].accuracies.begin(), other.cells[i].accuracies.end());
    }
  }
  return out;
}

/// Δ = mean accuracy of a candidate minus that of the GAIN reference.
struct GapReport {
  std::string mode;
  std::vector<double> lambdas;
  std::vector<double> etas;
  std::vector<double> gaps;  // λ-major

  double gap(std::size_t li, std::size_t ei) const { return gaps.at(li * etas.size() + ei); }

  std::string to_csv() const {
    std::ostringstream out;
    out << "lambda";
    for (double e : etas) out << ",eta=" << io_detail::format_number(e);
    out << '\n';
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      out << io_detail::format_number(lambdas[i]);
      for (std::size_t j = 0; j < etas.size(); ++j) out << ',' << io_detail::format_number(gap(i, j));
      out << '\n';
    }
    return out.str();
  }
};

inline GapReport performance_gap(const RobustnessReport& candidate, const RobustnessReport& reference) {
  if (candidate.lambdas != reference.lambdas || candidate.etas != reference.etas ||
      candidate.cells.size() != reference.cells.size())
    throw validation_error("performance gap needs reports over the same (lambda, eta) grid");
  GapReport g{candidate.mode, candidate.lambdas, candidate.etas, {}};
  for (std::size_t i = 0; i < candidate.cells.size(); ++i)
    g.gaps.push_back(candidate.cells[i].summary().mean - reference.cells[i].summary().mean);
  return g;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot write " + path);
  f << text;
  if (!f) throw io_error("write failed: " + path);
}

}  // namespace again
