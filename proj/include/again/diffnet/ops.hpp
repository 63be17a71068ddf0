#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "again/diffnet/tape.hpp"
#include "again/random.hpp"

namespace again::ops {

namespace detail {

template <class T>
void require(bool ok, const char* op, const std::string& msg) {
  if (!ok) throw shape_error(std::string(op) + ": " + msg);
}

inline void check_offsets(const Offsets& offsets, Index rows, const char* op) {
  if (offsets.empty() || offsets.front() != 0 || static_cast<Index>(offsets.back()) != rows)
    throw shape_error(std::string(op) + ": offsets do not cover " + std::to_string(rows) + " rows");
  for (std::size_t i = 1; i < offsets.size(); ++i)
    if (offsets[i] < offsets[i - 1]) throw shape_error(std::string(op) + ": offsets not monotone");
}

}  // namespace detail

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  auto& t = *a.tape;
  detail::require<T>(a.cols() == b.rows(), "matmul", shape_str(a.value()) + " x " + shape_str(b.value()));
  Matrix<T> out = a.value() * b.value();
  return t.record("matmul", std::move(out), {a, b}, [a, b](Tape<T>& t, const Matrix<T>& g) {
    if (t.needs_grad(a)) t.grad(a).noalias() += g * t.value(b).transpose();
    if (t.needs_grad(b)) t.grad(b).noalias() += t.value(a).transpose() * g;
  });
}

/// Product with a constant sparse left operand (input features).
template <class T>
Var<T> matmul(SparseRows<T> x, Var<T> b) {
  auto& t = *b.tape;
  detail::require<T>(x.cols() == b.rows(), "matmul", shape_str(x.rows(), x.cols()) + " x " + shape_str(b.value()));
  Matrix<T> out = x * b.value();
  return t.record("matmul", std::move(out), {b}, [x = std::move(x), b](Tape<T>& t, const Matrix<T>& g) {
    t.grad(b).noalias() += x.transpose() * g;
  });
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  auto& t = *a.tape;
  detail::require<T>(a.rows() == b.rows() && a.cols() == b.cols(), "add",
                     shape_str(a.value()) + " + " + shape_str(b.value()));
  Matrix<T> out = a.value() + b.value();
  return t.record("add", std::move(out), {a, b}, [a, b](Tape<T>& t, const Matrix<T>& g) {
    if (t.needs_grad(a)) t.grad(a) += g;
    if (t.needs_grad(b)) t.grad(b) += g;
  });
}

/// Adds a 1xC row to every row of `a`.
template <class T>
Var<T> add_bias(Var<T> a, Var<T> bias) {
  auto& t = *a.tape;
  detail::require<T>(bias.rows() == 1 && bias.cols() == a.cols(), "add_bias",
                     shape_str(a.value()) + " + " + shape_str(bias.value()));
  Matrix<T> out = a.value().rowwise() + bias.value().row(0);
  return t.record("add_bias", std::move(out), {a, bias}, [a, bias](Tape<T>& t, const Matrix<T>& g) {
    if (t.needs_grad(a)) t.grad(a) += g;
    if (t.needs_grad(bias)) t.grad(bias) += g.colwise().sum();
  });
}

/// Row-wise concatenation [a ; b] of each row's vectors.
template <class T>
Var<T> concat_rows(Var<T> a, Var<T> b) {
  auto& t = *a.tape;
  detail::require<T>(a.rows() == b.rows(), "concat_rows", shape_str(a.value()) + " | " + shape_str(b.value()));
  const Index ca = a.cols();
  Matrix<T> out(a.rows(), ca + b.cols());
  out << a.value(), b.value();
  return t.record("concat_rows", std::move(out), {a, b}, [a, b, ca](Tape<T>& t, const Matrix<T>& g) {
    if (t.needs_grad(a)) t.grad(a) += g.leftCols(ca);
    if (t.needs_grad(b)) t.grad(b) += g.rightCols(g.cols() - ca);
  });
}

template <class T>
Var<T> leaky_relu(Var<T> a, T slope) {
  auto& t = *a.tape;
  Matrix<T> out = a.value().unaryExpr([slope](T x) { return x > T(0) ? x : slope * x; });
  return t.record("leaky_relu", std::move(out), {a}, [a, slope](Tape<T>& t, const Matrix<T>& g) {
    const auto& x = t.value(a);
    auto& ga = t.grad(a);
    for (Index i = 0; i < x.size(); ++i) ga.data()[i] += x.data()[i] > T(0) ? g.data()[i] : slope * g.data()[i];
  });
}

template <class T>
Var<T> relu(Var<T> a) {
  auto& t = *a.tape;
  Matrix<T> out = a.value().cwiseMax(T(0));
  return t.record("relu", std::move(out), {a}, [a](Tape<T>& t, const Matrix<T>& g) {
    t.grad(a).array() += (t.value(a).array() > T(0)).select(g.array(), T(0));
  });
}

template <class T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
Var<T> sigmoid(Var<T> a) {
  auto& t = *a.tape;
  Matrix<T> out = a.value().unaryExpr([](T x) { return stable_sigmoid(x); });
  const std::size_t self = t.size();
  return t.record("sigmoid", std::move(out), {a}, [a, self](Tape<T>& t, const Matrix<T>& g) {
    const auto& y = t.value(Var<T>{&t, self});
    t.grad(a).array() += g.array() * y.array() * (T(1) - y.array());
  });
}

/// Softmax of each row with max-subtraction.
template <class T>
Var<T> softmax_rows(Var<T> a) {
  auto& t = *a.tape;
  const auto& x = a.value();
  Matrix<T> out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const T mx = x.row(i).maxCoeff();
    double sum = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
      out(i, j) = std::exp(x(i, j) - mx);
      sum += out(i, j);
    }
    out.row(i) /= static_cast<T>(sum);
  }
  const std::size_t self = t.size();
  return t.record("softmax_rows", std::move(out), {a}, [a, self](Tape<T>& t, const Matrix<T>& g) {
    const auto& y = t.value(Var<T>{&t, self});
    auto& ga = t.grad(a);
    for (Index i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (Index j = 0; j < y.cols(); ++j) dot += static_cast<double>(g(i, j)) * y(i, j);
      for (Index j = 0; j < y.cols(); ++j) ga(i, j) += y(i, j) * (g(i, j) - static_cast<T>(dot));
    }
  });
}

/// x / (||x|| + eps) per row; all-zero rows stay zero.
template <class T>
Var<T> l2_normalize_rows(Var<T> a, double eps = 1e-12) {
  auto& t = *a.tape;
  const auto& x = a.value();
  std::vector<double> norms(static_cast<std::size_t>(x.rows()));
  Matrix<T> out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (Index j = 0; j < x.cols(); ++j) s += static_cast<double>(x(i, j)) * x(i, j);
    norms[static_cast<std::size_t>(i)] = std::sqrt(s);
    out.row(i) = x.row(i) / static_cast<T>(norms[static_cast<std::size_t>(i)] + eps);
  }
  return t.record("l2_normalize_rows", std::move(out), {a},
                  [a, eps, norms = std::move(norms)](Tape<T>& t, const Matrix<T>& g) {
    const auto& x = t.value(a);
    auto& ga = t.grad(a);
    for (Index i = 0; i < x.rows(); ++i) {
      const double nrm = norms[static_cast<std::size_t>(i)];
      const double den = nrm + eps;
      double gx = 0.0;
      for (Index j = 0; j < x.cols(); ++j) gx += static_cast<double>(g(i, j)) * x(i, j);
      const double k = nrm > 0.0 ? gx / (den * den * nrm) : 0.0;
      for (Index j = 0; j < x.cols(); ++j)
        ga(i, j) += static_cast<T>(g(i, j) / den - k * x(i, j));
    }
  });
}

/// Inverted dropout; identity when `train` is false or rate is 0.
template <class T>
Var<T> dropout(Var<T> a, double rate, Rng& rng, bool train) {
  if (rate < 0.0 || rate >= 1.0) throw config_error("dropout rate must be in [0,1)");
  if (!train || rate == 0.0) return a;
  auto& t = *a.tape;
  std::bernoulli_distribution keep(1.0 - rate);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  Matrix<T> mask(a.rows(), a.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : T(0);
  Matrix<T> out = a.value().cwiseProduct(mask);
  return t.record("dropout", std::move(out), {a}, [a, mask = std::move(mask)](Tape<T>& t, const Matrix<T>& g) {
    t.grad(a) += g.cwiseProduct(mask);
  });
}

/// Column means over all rows, as a 1xC row.
template <class T>
Var<T> mean_rows(Var<T> a) {
  auto& t = *a.tape;
  detail::require<T>(a.rows() > 0, "mean_rows", "empty input");
  const auto& x = a.value();
  Matrix<T> out(1, x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    double s = 0.0;
    for (Index i = 0; i < x.rows(); ++i) s += x(i, j);
    out(0, j) = static_cast<T>(s / static_cast<double>(x.rows()));
  }
  return t.record("mean_rows", std::move(out), {a}, [a](Tape<T>& t, const Matrix<T>& g) {
    const T inv = T(1) / static_cast<T>(t.value(a).rows());
    t.grad(a).rowwise() += g.row(0) * inv;
  });
}

/// Rows [begin, begin+count) of `a`.
template <class T>
Var<T> slice_rows(Var<T> a, Index begin, Index count) {
  auto& t = *a.tape;
  detail::require<T>(begin >= 0 && count >= 0 && begin + count <= a.rows(), "slice_rows",
                     "rows [" + std::to_string(begin) + "," + std::to_string(begin + count) + ") of " + shape_str(a.value()));
  Matrix<T> out = a.value().middleRows(begin, count);
  return t.record("slice_rows", std::move(out), {a}, [a, begin, count](Tape<T>& t, const Matrix<T>& g) {
    t.grad(a).middleRows(begin, count) += g;
  });
}

template <class T>
Var<T> gather_rows(Var<T> a, std::vector<Index> rows) {
  auto& t = *a.tape;
  for (Index r : rows)
    detail::require<T>(r >= 0 && r < a.rows(), "gather_rows", "row " + std::to_string(r) + " out of range");
  Matrix<T> out = take_rows(a.value(), rows);
  return t.record("gather_rows", std::move(out), {a}, [a, rows = std::move(rows)](Tape<T>& t, const Matrix<T>& g) {
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < rows.size(); ++i) ga.row(rows[i]) += g.row(static_cast<Index>(i));
  });
}

/// Softmax of a column vector within each group of rows.
template <class T>
Var<T> segment_softmax(Var<T> a, const Offsets& offsets) {
  auto& t = *a.tape;
  detail::require<T>(a.cols() == 1, "segment_softmax", "expects a column, got " + shape_str(a.value()));
  detail::check_offsets(offsets, a.rows(), "segment_softmax");
  const auto& x = a.value();
  Matrix<T> out(x.rows(), 1);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const auto lo = static_cast<Index>(offsets[s]), hi = static_cast<Index>(offsets[s + 1]);
    if (lo == hi) continue;
    const T mx = x.col(0).segment(lo, hi - lo).maxCoeff();
    double sum = 0.0;
    for (Index i = lo; i < hi; ++i) {
      out(i, 0) = std::exp(x(i, 0) - mx);
      sum += out(i, 0);
    }
    for (Index i = lo; i < hi; ++i) out(i, 0) = static_cast<T>(out(i, 0) / sum);
  }
  const std::size_t self = t.size();
  return t.record("segment_softmax", std::move(out), {a}, [a, self, offsets](Tape<T>& t, const Matrix<T>& g) {
    const auto& y = t.value(Var<T>{&t, self});
    auto& ga = t.grad(a);
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
      const auto lo = static_cast<Index>(offsets[s]), hi = static_cast<Index>(offsets[s + 1]);
      double dot = 0.0;
      for (Index i = lo; i < hi; ++i) dot += static_cast<double>(g(i, 0)) * y(i, 0);
      for (Index i = lo; i < hi; ++i) ga(i, 0) += y(i, 0) * (g(i, 0) - static_cast<T>(dot));
    }
  });
}

/// out[s] = sum_{i in group s} w[i] * rows[i].
template <class T>
Var<T> segment_weighted_sum(Var<T> rows, Var<T> weights, const Offsets& offsets) {
  auto& t = *rows.tape;
  detail::require<T>(weights.cols() == 1 && weights.rows() == rows.rows(), "segment_weighted_sum",
                     shape_str(rows.value()) + " weighted by " + shape_str(weights.value()));
  detail::check_offsets(offsets, rows.rows(), "segment_weighted_sum");
  const auto& h = rows.value();
  const auto& w = weights.value();
  const auto groups = static_cast<Index>(offsets.size() - 1);
  Matrix<T> out = Matrix<T>::Zero(groups, h.cols());
  for (Index s = 0; s < groups; ++s)
    for (auto i = static_cast<Index>(offsets[s]); i < static_cast<Index>(offsets[s + 1]); ++i)
      out.row(s) += w(i, 0) * h.row(i);
  return t.record("segment_weighted_sum", std::move(out), {rows, weights},
                  [rows, weights, offsets](Tape<T>& t, const Matrix<T>& g) {
    const auto& h = t.value(rows);
    const auto& w = t.value(weights);
    const auto groups = static_cast<Index>(offsets.size() - 1);
    const bool gr = t.needs_grad(rows), gw = t.needs_grad(weights);
    for (Index s = 0; s < groups; ++s)
      for (auto i = static_cast<Index>(offsets[s]); i < static_cast<Index>(offsets[s + 1]); ++i) {
        if (gr) t.grad(rows).row(i) += w(i, 0) * g.row(s);
        if (gw) t.grad(weights)(i, 0) += h.row(i).dot(g.row(s));
      }
  });
}

/// Mean of each group of rows; empty groups map to zero.
template <class T>
Var<T> segment_mean(Var<T> rows, const Offsets& offsets) {
  auto& t = *rows.tape;
  detail::check_offsets(offsets, rows.rows(), "segment_mean");
  const auto& h = rows.value();
  const auto groups = static_cast<Index>(offsets.size() - 1);
  Matrix<T> out = Matrix<T>::Zero(groups, h.cols());
  for (Index s = 0; s < groups; ++s) {
    const auto lo = static_cast<Index>(offsets[s]), hi = static_cast<Index>(offsets[s + 1]);
    if (hi == lo) continue;
    for (Index i = lo; i < hi; ++i) out.row(s) += h.row(i);
    out.row(s) /= static_cast<T>(hi - lo);
  }
  return t.record("segment_mean", std::move(out), {rows}, [rows, offsets](Tape<T>& t, const Matrix<T>& g) {
    auto& gr = t.grad(rows);
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
      const auto lo = static_cast<Index>(offsets[s]), hi = static_cast<Index>(offsets[s + 1]);
      for (Index i = lo; i < hi; ++i) gr.row(i) += g.row(static_cast<Index>(s)) / static_cast<T>(hi - lo);
    }
  });
}

inline constexpr double kProbFloor = 1e-12;

/// -(1/B) sum_v log p[v, y_v] over softmax rows, probabilities floored at 1e-12.
template <class T>
Var<T> cross_entropy(Var<T> probs, std::vector<int> labels) {
  auto& t = *probs.tape;
  const auto& p = probs.value();
  detail::require<T>(static_cast<Index>(labels.size()) == p.rows(), "cross_entropy",
                     std::to_string(labels.size()) + " labels for " + shape_str(p));
  for (int y : labels)
    if (y < 0 || y >= p.cols()) throw range_error("cross_entropy: label " + std::to_string(y) + " out of range");
  double loss = 0.0;
  for (Index i = 0; i < p.rows(); ++i)
    loss -= std::log(std::max(static_cast<double>(p(i, labels[static_cast<std::size_t>(i)])), kProbFloor));
  loss /= static_cast<double>(p.rows());
  Matrix<T> out(1, 1);
  out(0, 0) = static_cast<T>(loss);
  return t.record("cross_entropy", std::move(out), {probs}, [probs, labels = std::move(labels)](Tape<T>& t, const Matrix<T>& g) {
    const auto& p = t.value(probs);
    auto& gp = t.grad(probs);
    const double scale = static_cast<double>(g(0, 0)) / static_cast<double>(p.rows());
    for (Index i = 0; i < p.rows(); ++i) {
      const double pi = p(i, labels[static_cast<std::size_t>(i)]);
      if (pi > kProbFloor) gp(i, labels[static_cast<std::size_t>(i)]) += static_cast<T>(-scale / pi);
    }
  });
}

/// Binary log-loss of a probability column against a constant target:
/// target true gives -mean log p, false gives -mean log(1-p). Clamped to
/// [1e-12, 1-1e-12] and accumulated in double.
template <class T>
Var<T> binary_log_loss(Var<T> probs, bool target) {
  auto& t = *probs.tape;
  const auto& p = probs.value();
  detail::require<T>(p.cols() == 1 && p.rows() > 0, "binary_log_loss", "expects a column, got " + shape_str(p));
  auto clamp = [](double x) { return std::clamp(x, kProbFloor, 1.0 - kProbFloor); };
  double loss = 0.0;
  for (Index i = 0; i < p.rows(); ++i) {
    const double q = clamp(p(i, 0));
    loss -= target ? std::log(q) : std::log(1.0 - q);
  }
  loss /= static_cast<double>(p.rows());
  Matrix<T> out(1, 1);
  out(0, 0) = static_cast<T>(loss);
  return t.record("binary_log_loss", std::move(out), {probs}, [probs, target](Tape<T>& t, const Matrix<T>& g) {
    const auto& p = t.value(probs);
    auto& gp = t.grad(probs);
    const double scale = static_cast<double>(g(0, 0)) / static_cast<double>(p.rows());
    for (Index i = 0; i < p.rows(); ++i) {
      const double q = p(i, 0);
      if (q <= kProbFloor || q >= 1.0 - kProbFloor) continue;
      gp(i, 0) += static_cast<T>(target ? -scale / q : scale / (1.0 - q));
    }
  });
}

}  // namespace again::ops
