#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "again/diffnet/tape.hpp"

namespace again {

struct GradCheckEntry {
  std::string param;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;
  Index checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  std::string worst;

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

struct GradCheckOptions {
  double step = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
  // entries with vanishing gradient from dominating on round-off alone.
  double floor = 1e-7;
};

/// Compares tape gradients against central differences for every entry of
/// every parameter. `forward` must build a fresh scalar loss on the given
/// tape and be deterministic.
template <class Forward>
GradCheckReport grad_check(Forward&& forward, const std::vector<Parameter<double>*>& params,
                           const GradCheckOptions& opt = {}) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<double> tape;
    auto loss = forward(tape);
    tape.backward(loss);
  }
  auto eval = [&] {
    Tape<double> tape;
    return forward(tape).item();
  };

  GradCheckReport report;
  for (auto* p : params) {
    GradCheckEntry e;
    e.param = p->name;
    for (Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + opt.step;
      const double up = eval();
      x = saved - opt.step;
      const double down = eval();
      x = saved;
      const double numeric = (up - down) / (2.0 * opt.step);
      const double analytic = p->grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.floor});
      e.max_rel_error = std::max(e.max_rel_error, std::abs(analytic - numeric) / denom);
      e.max_abs_analytic = std::max(e.max_abs_analytic, std::abs(analytic));
      ++e.checked;
    }
    if (e.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = e.max_rel_error;
      report.worst = e.param;
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace again
