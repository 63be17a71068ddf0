#pragma once

// Reference computations written with plain loops over std::vector, sharing
// nothing with the library's batched code paths.

#include <cmath>
#include <limits>
#include <vector>

#include "again/again.hpp"

namespace again::oracle {

using Vec = std::vector<double>;

inline Vec row(const Matrix<double>& m, Index r) {
  Vec out(static_cast<std::size_t>(m.cols()));
  for (Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(j)] = m(r, j);
  return out;
}

/// h · W for a row vector h and a (len(h) x cols) matrix W.
inline Vec times(const Vec& h, const Matrix<double>& w) {
  Vec out(static_cast<std::size_t>(w.cols()), 0.0);
  for (Index j = 0; j < w.cols(); ++j)
    for (Index i = 0; i < w.rows(); ++i) out[static_cast<std::size_t>(j)] += h[static_cast<std::size_t>(i)] * w(i, j);
  return out;
}

inline double leaky(double x) { return x > 0.0 ? x : 0.2 * x; }

/// softmax over u of leaky(a · [W h_v ; W h_u]).
inline Vec attention(const Vec& h_target, const std::vector<Vec>& h_neighbors, const Matrix<double>& w, const Matrix<double>& a) {
  const Vec wt = times(h_target, w);
  Vec logits;
  for (const auto& hu : h_neighbors) {
    const Vec wu = times(hu, w);
    double s = 0.0;
    for (std::size_t i = 0; i < wt.size(); ++i) s += a(static_cast<Index>(i), 0) * wt[i];
    for (std::size_t i = 0; i < wu.size(); ++i) s += a(static_cast<Index>(wt.size() + i), 0) * wu[i];
    logits.push_back(leaky(s));
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double l : logits) mx = std::max(mx, l);
  double z = 0.0;
  for (double& l : logits) z += (l = std::exp(l - mx));
  for (double& l : logits) l /= z;
  return logits;
}

/// relu then unit L2 norm (zero stays zero).
inline Vec relu_normalize(Vec v) {
  double n = 0.0;
  for (double& x : v) {
    x = std::max(x, 0.0);
    n += x * x;
  }
  n = std::sqrt(n);
  if (n > 0.0)
    for (double& x : v) x /= n;
  return v;
}

/// Per-node representations at every depth with each node's full neighbor
/// list (itself when isolated). Without attention the neighbors are averaged.
inline std::vector<std::vector<Vec>> all_depths(const BasicGraph<double>& g, EncoderParams<double>& p, bool use_attention,
                                                std::vector<std::vector<Vec>>* alphas = nullptr) {
  const Index n = g.node_count();
  std::vector<std::vector<Vec>> h(1);
  for (Index v = 0; v < n; ++v) h[0].push_back(row(g.features(), v));
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const auto& layer = p.layers[k];
    std::vector<Vec> next;
    std::vector<Vec> depth_alpha;
    for (Index v = 0; v < n; ++v) {
      std::vector<Index> nb(g.neighbors(v).begin(), g.neighbors(v).end());
      if (nb.empty()) nb.push_back(v);
      std::vector<Vec> hn;
      for (Index u : nb) hn.push_back(h[k][static_cast<std::size_t>(u)]);
      Vec alpha(nb.size(), 1.0 / static_cast<double>(nb.size()));
      if (use_attention) alpha = attention(h[k][static_cast<std::size_t>(v)], hn, layer.attention_weight.value, layer.attention_vector.value);
      Vec hs(hn.front().size(), 0.0);
      for (std::size_t i = 0; i < hn.size(); ++i)
        for (std::size_t j = 0; j < hs.size(); ++j) hs[j] += alpha[i] * hn[i][j];
      Vec out = times(h[k][static_cast<std::size_t>(v)], layer.self_weight.value);
      const Vec nbr = times(hs, layer.neighbor_weight.value);
      out.insert(out.end(), nbr.begin(), nbr.end());
      next.push_back(relu_normalize(out));
      depth_alpha.push_back(alpha);
    }
    h.push_back(std::move(next));
    if (alphas) alphas->push_back(std::move(depth_alpha));
  }
  return h;
}

/// Mean silhouette by the textbook definition, one point at a time.
inline double silhouette(const Matrix<double>& x, const std::vector<int>& labels) {
  const Index n = x.rows();
  auto dist = [&](Index i, Index j) {
    double s = 0.0;
    for (Index c = 0; c < x.cols(); ++c) s += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
    return std::sqrt(s);
  };
  int classes = 0;
  for (int y : labels) classes = std::max(classes, y + 1);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    std::vector<double> sum(static_cast<std::size_t>(classes), 0.0);
    std::vector<int> count(static_cast<std::size_t>(classes), 0);
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] += dist(i, j);
      ++count[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])];
    }
    const int own = labels[static_cast<std::size_t>(i)];
    if (count[static_cast<std::size_t>(own)] == 0) continue;
    const double a = sum[static_cast<std::size_t>(own)] / count[static_cast<std::size_t>(own)];
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < classes; ++c)
      if (c != own && count[static_cast<std::size_t>(c)] > 0) b = std::min(b, sum[static_cast<std::size_t>(c)] / count[static_cast<std::size_t>(c)]);
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

}  // namespace again::oracle
