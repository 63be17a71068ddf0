#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "again/diffnet/init.hpp"
#include "again/diffnet/ops.hpp"

namespace again {

/// Gaussian prior N(0, 10^p I) over d-dimensional embeddings.
struct PriorConfig {
  int power_exponent = -2;
  Index dim = 256;

  double variance() const { return std::pow(10.0, power_exponent); }
  void validate() const {
    if (power_exponent < -2 || power_exponent > 2) throw config_error("prior power must be in [-2, 2]");
    if (dim < 1) throw config_error("prior dimension must be >= 1");
  }
};

template <class T>
Matrix<T> sample_prior(const PriorConfig& cfg, Index count, Rng& rng) {
  cfg.validate();
  if (count < 1) throw config_error("prior sample count must be >= 1");
  std::normal_distribution<double> normal(0.0, std::sqrt(cfg.variance()));
  Matrix<T> z(count, cfg.dim);
  for (Index i = 0; i < z.size(); ++i) z.data()[i] = static_cast<T>(normal(rng));
  return z;
}

template <class T>
Matrix<T> sample_prior(const PriorConfig& cfg, Index count, std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::prior);
  return sample_prior<T>(cfg, count, rng);
}

inline const std::vector<Index> kDiscriminatorHidden{1024, 1024, 256};

template <class T>
struct DiscriminatorParams {
  std::vector<Parameter<T>> weights;
  std::vector<Parameter<T>> biases;

  std::vector<Parameter<T>*> tensors() {
    std::vector<Parameter<T>*> out;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      out.push_back(&weights[i]);
      out.push_back(&biases[i]);
    }
    return out;
  }
  Index input_dim() const { return weights.empty() ? 0 : weights.front().value.rows(); }
};

/// input_dim -> hidden... -> 1, each layer with a bias.
template <class T>
DiscriminatorParams<T> init_discriminator(Index input_dim, const std::vector<Index>& hidden, Rng& rng) {
  if (input_dim < 1) throw config_error("discriminator input dimension must be >= 1");
  DiscriminatorParams<T> p;
  Index in = input_dim;
  std::vector<Index> widths = hidden;
  widths.push_back(1);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] < 1) throw config_error("discriminator widths must be >= 1");
    const std::string pre = "discriminator" + std::to_string(i + 1) + ".";
    p.weights.emplace_back(pre + "weight", "discriminator", uniform_init<T>(in, widths[i], in, rng));
    p.biases.emplace_back(pre + "bias", "discriminator", uniform_init<T>(1, widths[i], in, rng));
    in = widths[i];
  }
  return p;
}

template <class T>
struct DiscriminatorVars {
  std::vector<Var<T>> weights, biases;
};

template <class T>
DiscriminatorVars<T> bind(Tape<T>& tape, DiscriminatorParams<T>& p, bool trainable = true) {
  DiscriminatorVars<T> dv;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    dv.weights.push_back(tape.param(p.weights[i], trainable));
    dv.biases.push_back(tape.param(p.biases[i], trainable));
  }
  return dv;
}

/// Probability that each row came from the prior: leaky ReLU (0.2) hidden
/// layers, sigmoid output. Returns a column.
template <class T>
Var<T> discriminate(Var<T> x, const DiscriminatorVars<T>& dv) {
  if (dv.weights.empty()) throw config_error("discriminator has no layers");
  if (x.cols() != dv.weights.front().rows())
    throw shape_error("discriminator expects " + std::to_string(dv.weights.front().rows()) + "-dim rows, got " +
                      std::to_string(x.cols()));
  auto h = x;
  const std::size_t last = dv.weights.size() - 1;
  for (std::size_t i = 0; i < dv.weights.size(); ++i) {
    h = ops::add_bias(ops::matmul(h, dv.weights[i]), dv.biases[i]);
    if (i < last) h = ops::leaky_relu(h, static_cast<T>(0.2));
  }
  return ops::sigmoid(h);
}

/// -E[log d(z)] - E[log(1 - d(u))] over a prior batch and an equally sized
/// embedding batch. Both enter as constants, so only the discriminator can
/// receive gradient.
template <class T>
Var<T> discriminator_loss(Tape<T>& tape, const Matrix<T>& real, const Matrix<T>& fake, const DiscriminatorVars<T>& dv) {
  if (real.rows() != fake.rows() || real.cols() != fake.cols())
    throw shape_error("prior batch " + shape_str(real) + " and embedding batch " + shape_str(fake) + " differ");
  auto on_real = ops::binary_log_loss(discriminate(tape.constant(real), dv), true);
  auto on_fake = ops::binary_log_loss(discriminate(tape.constant(fake), dv), false);
  return ops::add(on_real, on_fake);
}

/// -E[log d(u)] through the live encoder output; bind the discriminator
/// with trainable=false so it stays fixed.
template <class T>
Var<T> generator_loss(Var<T> fake, const DiscriminatorVars<T>& dv) {
  return ops::binary_log_loss(discriminate(fake, dv), true);
}

/// The minimax value E[log d(z)] + E[log(1 - d(u))], with the same clamping
/// as the losses.
template <class T>
double adversarial_value(const Matrix<T>& real, const Matrix<T>& fake, DiscriminatorParams<T>& params) {
  Tape<T> tape;
  auto dv = bind(tape, params, false);
  auto mean_log = [](const Matrix<T>& p, bool target) {
    double s = 0.0;
    for (Index i = 0; i < p.rows(); ++i) {
      const double q = std::clamp(static_cast<double>(p(i, 0)), ops::kProbFloor, 1.0 - ops::kProbFloor);
      s += target ? std::log(q) : std::log(1.0 - q);
    }
    return s / static_cast<double>(p.rows());
  };
  return mean_log(discriminate(tape.constant(real), dv).value(), true) +
         mean_log(discriminate(tape.constant(fake), dv).value(), false);
}

}  // namespace again
