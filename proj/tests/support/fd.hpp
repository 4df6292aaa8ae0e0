#pragma once

// Test support: independent finite-difference oracles for the input-space
// gradients, plus random prompt builders. Everything here recomputes the
// objective through the public forward path only, never through the
// gradient code it checks.

#include <Eigen/Dense>

#include <algorithm>
#include <vector>

#include "cotstress/loss.hpp"
#include "cotstress/model.hpp"
#include "cotstress/rng.hpp"

namespace testsupport {

using cotstress::LossSpec;
using cotstress::LossTargets;
using cotstress::ModelGateway;
using cotstress::SegmentedPrompt;
using cotstress::TokenId;

inline std::vector<TokenId> random_tokens(cotstress::rng::Rng& r, int len, int vocab,
                                          int exclude_ge = -1) {
  const int hi = exclude_ge > 0 ? exclude_ge - 1 : vocab - 1;
  std::vector<TokenId> out(static_cast<std::size_t>(len));
  for (auto& t : out) t = static_cast<TokenId>(r.uniform_int(0, hi));
  return out;
}

/// Boundary-only prompt carrier for span bookkeeping in numeric tests.
inline SegmentedPrompt bare_prompt(std::vector<TokenId> tokens, Eigen::Index n1, Eigen::Index n2,
                                   Eigen::Index n3) {
  SegmentedPrompt p;
  p.n4 = static_cast<Eigen::Index>(tokens.size());
  p.tokens = std::move(tokens);
  p.n1 = n1;
  p.n2 = n2;
  p.n3 = n3;
  return p;
}

/// L_opt evaluated through the forward path alone.
inline double objective_value(ModelGateway& model, const Eigen::MatrixXd& embeddings,
                              const LossTargets& targets, const LossSpec& spec) {
  const Eigen::MatrixXd logits =
      model.forward_logits(embeddings, {0, embeddings.rows()});
  return cotstress::evaluate_losses(logits, targets, spec).l_opt;
}

/// Central difference of L_opt along one embedding coordinate.
inline double fd_embedding(ModelGateway& model, const Eigen::MatrixXd& embeddings,
                           const LossTargets& targets, const LossSpec& spec, Eigen::Index row,
                           Eigen::Index col, double h = 1e-5) {
  Eigen::MatrixXd plus = embeddings;
  Eigen::MatrixXd minus = embeddings;
  plus(row, col) += h;
  minus(row, col) -= h;
  return (objective_value(model, plus, targets, spec) -
          objective_value(model, minus, targets, spec)) /
         (2.0 * h);
}

/// Central difference of L_opt along one one-hot coordinate: nudging the
/// indicator e[row, vocab_index] shifts that row's embedding by h * W_E[v].
inline double fd_onehot(ModelGateway& model, const Eigen::MatrixXd& embedding_table,
                        const Eigen::MatrixXd& embeddings, const LossTargets& targets,
                        const LossSpec& spec, Eigen::Index row, Eigen::Index vocab_index,
                        double h = 1e-5) {
  Eigen::MatrixXd plus = embeddings;
  Eigen::MatrixXd minus = embeddings;
  plus.row(row) += h * embedding_table.row(vocab_index);
  minus.row(row) -= h * embedding_table.row(vocab_index);
  return (objective_value(model, plus, targets, spec) -
          objective_value(model, minus, targets, spec)) /
         (2.0 * h);
}

struct CoordinateError {
  double analytic = 0.0;
  double numeric = 0.0;

  double relative() const {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
  }
};

/// Picks the `count` largest-magnitude coordinates of a gradient matrix,
/// restricted to rows in [row_begin, row_end).
inline std::vector<std::pair<Eigen::Index, Eigen::Index>> top_coordinates(
    const Eigen::MatrixXd& grad, int count, Eigen::Index row_begin, Eigen::Index row_end) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> coords;
  for (Eigen::Index i = row_begin; i < row_end; ++i) {
    for (Eigen::Index j = 0; j < grad.cols(); ++j) coords.emplace_back(i, j);
  }
  std::partial_sort(coords.begin(),
                    coords.begin() + std::min<std::size_t>(coords.size(),
                                                           static_cast<std::size_t>(count)),
                    coords.end(), [&](const auto& a, const auto& b) {
                      return std::abs(grad(a.first, a.second)) >
                             std::abs(grad(b.first, b.second));
                    });
  coords.resize(std::min<std::size_t>(coords.size(), static_cast<std::size_t>(count)));
  return coords;
}

}  // namespace testsupport
