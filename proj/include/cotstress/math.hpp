#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace cotstress::math {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Numerically stable row-wise log-softmax.
template <typename Derived>
Matrix<typename Derived::Scalar> log_softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar peak = logits.row(r).maxCoeff();
    const Scalar lse = std::log((logits.row(r).array() - peak).exp().sum()) + peak;
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

template <typename Derived>
Matrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  return log_softmax_rows(logits).array().exp().matrix();
}

/// Shannon entropy of softmax(logits), one value per row (natural log).
template <typename Derived>
Vector<typename Derived::Scalar> entropy_rows(const Eigen::MatrixBase<Derived>& logits) {
  const auto ls = log_softmax_rows(logits);
  return -((ls.array().exp() * ls.array()).rowwise().sum());
}

/// Cross-entropy of each perturbed row against softmax(reference row), the
/// reference treated as a frozen target distribution.
template <typename DerivedA, typename DerivedB>
Vector<typename DerivedA::Scalar> soft_cross_entropy_rows(
    const Eigen::MatrixBase<DerivedA>& perturbed, const Eigen::MatrixBase<DerivedB>& reference) {
  if (perturbed.rows() != reference.rows() || perturbed.cols() != reference.cols()) {
    throw std::invalid_argument("soft_cross_entropy_rows: shape mismatch");
  }
  const auto ls_pert = log_softmax_rows(perturbed);
  const auto p_ref = softmax_rows(reference);
  return -((p_ref.array() * ls_pert.array()).rowwise().sum());
}

/// Cross-entropy of each row against an explicit target distribution matrix.
template <typename DerivedA, typename DerivedB>
Vector<typename DerivedA::Scalar> cross_entropy_vs_target_rows(
    const Eigen::MatrixBase<DerivedA>& logits, const Eigen::MatrixBase<DerivedB>& target_probs) {
  if (logits.rows() != target_probs.rows() || logits.cols() != target_probs.cols()) {
    throw std::invalid_argument("cross_entropy_vs_target_rows: shape mismatch");
  }
  const auto ls = log_softmax_rows(logits);
  return -((target_probs.array() * ls.array()).rowwise().sum());
}

template <typename Scalar>
Scalar sign(Scalar x) {
  if (x > Scalar(0)) return Scalar(1);
  if (x < Scalar(0)) return Scalar(-1);
  return Scalar(0);
}

}  // namespace cotstress::math
