#pragma once

#include <optional>

#include "cotstress/attack_common.hpp"

namespace cotstress {

enum class EpsilonMode { GlobalRange, PerElementAbs };

std::string_view to_string(EpsilonMode m);
EpsilonMode epsilon_mode_from_string(std::string_view s);

struct EmbeddingAttackConfig {
  double epsilon = 0.02;  // fraction of the occupied embedding range
  double alpha = 0.5;     // step size as a fraction of the ball radius
  int steps = 5;
  EpsilonMode epsilon_mode = EpsilonMode::GlobalRange;
  std::optional<double> lambda_override;
  LossSpec loss;
  bool store_delta = false;
};

/// Elementwise ball radii over the question rows. Global-range mode scales
/// the occupied value range of the span; per-element mode scales each entry's
/// magnitude. A constant span has no range to scale and is an error.
Eigen::MatrixXd epsilon_absolute(const Eigen::MatrixXd& embeddings, Span question_span,
                                 double epsilon, EpsilonMode mode);

/// Signed-ascent state over the question rows of the embedding matrix.
struct PerturbationState {
  Eigen::MatrixXd original;   // full sequence
  Eigen::MatrixXd perturbed;  // full sequence; differs only inside the span
  Eigen::MatrixXd eps_abs;    // question rows x dim
  Span question_span;

  double max_violation() const;  // ||perturbed - original||_inf minus radius, question rows
  bool rows_outside_span_identical() const;
};

PerturbationState make_perturbation_state(const Eigen::MatrixXd& embeddings, Span question_span,
                                          double epsilon, EpsilonMode mode);

/// One step of sign ascent, clamped to the ball, touching only the question
/// rows. `gradient` covers the full sequence. Non-finite gradients skip the
/// step.
void pgd_step(PerturbationState& state, const Eigen::MatrixXd& gradient, double alpha);

AttackRecord run_embedding_attack(AttackContext& ctx, const BenchmarkExample& example,
                                  const EmbeddingAttackConfig& config);

}  // namespace cotstress
