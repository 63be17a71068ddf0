#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "again/errors.hpp"

namespace again {

using Index = std::int64_t;

/// Dense row-major matrix; the only tensor rank the model needs.
template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using SparseRows = Eigen::SparseMatrix<T, Eigen::RowMajor, Index>;

/// Row offsets of variable-length groups: group i spans [offsets[i], offsets[i+1]).
using Offsets = std::vector<std::size_t>;

inline std::string shape_str(Index r, Index c) {
  return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}

template <class Derived>
std::string shape_str(const Eigen::MatrixBase<Derived>& m) {
  return shape_str(m.rows(), m.cols());
}

template <class Derived>
void ensure_finite(const Eigen::MatrixBase<Derived>& m, const char* op) {
  if (!m.allFinite()) throw numeric_error(std::string("non-finite output in ") + op);
}

/// Rows of `m` listed in `rows`, in order.
template <class T>
Matrix<T> take_rows(const Matrix<T>& m, const std::vector<Index>& rows) {
  Matrix<T> out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

/// Drops exact zeros; feature matrices are mostly bag-of-words. Non-finite
/// entries are kept so they still surface downstream.
template <class T>
SparseRows<T> to_sparse(const Matrix<T>& m) {
  SparseRows<T> s(m.rows(), m.cols());
  std::vector<Index> nnz(static_cast<std::size_t>(m.rows()), 0);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (m(i, j) != T(0)) ++nnz[static_cast<std::size_t>(i)];
  s.reserve(nnz);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (m(i, j) != T(0)) s.insert(i, j) = m(i, j);
  s.makeCompressed();
  return s;
}

}  // namespace again
