#pragma once

#include <cmath>
#include <vector>

#include "again/diffnet/tape.hpp"

namespace again {

struct OptimConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon_hat = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0)) throw config_error("learning rate must be positive");
    if (weight_decay < 0.0) throw config_error("weight decay must be non-negative");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw config_error("Adam betas must be in [0,1)");
    if (!(epsilon_hat > 0.0)) throw config_error("Adam epsilon must be positive");
  }
};

/// One Adam update of `p` from its accumulated gradient. The L2 term is
/// folded into the gradient (g + wd * theta) before the moment update.
template <class T>
void adam_step(Parameter<T>& p, const OptimConfig& cfg) {
  p.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step));
  for (Index i = 0; i < p.value.size(); ++i) {
    const double theta = p.value.data()[i];
    const double g = static_cast<double>(p.grad.data()[i]) + cfg.weight_decay * theta;
    const double m = cfg.beta1 * p.m.data()[i] + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * p.v.data()[i] + (1.0 - cfg.beta2) * g * g;
    p.m.data()[i] = static_cast<T>(m);
    p.v.data()[i] = static_cast<T>(v);
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    p.value.data()[i] = static_cast<T>(theta - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon_hat));
  }
}

/// Adam over a fixed parameter group. Each parameter keeps its own moments
/// and step counter, so two optimizers never share state.
template <class T>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter<T>*> group, OptimConfig cfg) : group_(std::move(group)), cfg_(cfg) { cfg_.validate(); }

  void zero_grad() {
    for (auto* p : group_) p->zero_grad();
  }
  void step() {
    for (auto* p : group_) adam_step(*p, cfg_);
  }
  /// Updates only the listed members of the group (generator step touches φ alone).
  void step(const std::vector<Parameter<T>*>& subset) {
    for (auto* p : subset) adam_step(*p, cfg_);
  }

  const OptimConfig& config() const { return cfg_; }
  const std::vector<Parameter<T>*>& group() const { return group_; }

 private:
  std::vector<Parameter<T>*> group_;
  OptimConfig cfg_;
};

}  // namespace again
