#pragma once

#include <cmath>
#include <random>

#include "again/diffnet/tensor.hpp"
#include "again/random.hpp"

namespace again {

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual linear-layer default.
template <class T>
Matrix<T> uniform_init(Index rows, Index cols, Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix<T> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(u(rng));
  return m;
}

}  // namespace again
