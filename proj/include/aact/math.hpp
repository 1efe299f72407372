#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace aact {

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& scores) {
  using Scalar = typename Derived::Scalar;
  const Scalar top = scores.maxCoeff();
  return top + std::log((scores.array() - top).exp().sum());
}

/// Numerically stable softmax of a score vector.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(
    const Eigen::MatrixBase<Derived>& scores) {
  using Scalar = typename Derived::Scalar;
  const Scalar top = scores.maxCoeff();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out = (scores.array() - top).exp().matrix();
  out /= out.sum();
  return out;
}

/// Row-wise softmax, in place. Rows are samples, columns are classes.
template <typename Derived>
void softmax_rows(Eigen::MatrixBase<Derived>& scores) {
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    auto row = scores.row(i);
    const auto top = row.maxCoeff();
    row = (row.array() - top).exp().matrix();
    row /= row.sum();
  }
}

/// Index of the largest entry; ties resolve to the lowest index.
template <typename Derived>
Eigen::Index argmax(const Eigen::MatrixBase<Derived>& values) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = i;
  }
  return best;
}

}  // namespace aact
