#pragma once

#include <Eigen/Dense>

#include <string_view>
#include <vector>

#include "cotstress/prompt.hpp"

namespace cotstress {

enum class SignConvention {
  LiteralEq4,    // token gradients taken on the negated objective
  MaximizeLopt,  // token gradients taken on the objective itself
};
enum class CeTarget { Soft, HardArgmax };
enum class Reduction { Mean, Sum };

std::string_view to_string(SignConvention c);
std::string_view to_string(CeTarget t);
std::string_view to_string(Reduction r);

/// Configuration of the composite objective L_opt = L_c - lambda * L_a.
struct LossSpec {
  double lambda = 0.0;
  SignConvention sign_convention = SignConvention::LiteralEq4;
  CeTarget ce_target = CeTarget::Soft;
  Reduction reduction = Reduction::Mean;
  bool cot_only = false;  // drop the answer term entirely

  double effective_lambda() const { return cot_only ? 0.0 : lambda; }
  double onehot_sign() const {
    return sign_convention == SignConvention::LiteralEq4 ? -1.0 : 1.0;
  }
};

/// Scalar outcome of one objective evaluation. The identity
/// l_opt == l_c - lambda * l_a holds exactly.
struct LossBundle {
  double l_c = 0.0;
  double l_a = 0.0;
  double lambda = 0.0;
  double l_opt = 0.0;
};

/// Span-length weight (n4 - n3) / n3 balancing the reasoning and answer
/// terms. Errors when n3 == 0.
double compute_lambda(const SegmentedPrompt& prompt);
double compute_lambda(Eigen::Index n3, Eigen::Index n4);

/// Mean (or sum) cross-entropy of perturbed logits against the frozen
/// softmax of reference logits, position by position.
double soft_cross_entropy(const Eigen::MatrixXd& perturbed, const Eigen::MatrixXd& reference,
                          CeTarget target = CeTarget::Soft,
                          Reduction reduction = Reduction::Mean);

double composite_objective(double l_c, double l_a, const LossSpec& spec);

/// Frozen target distributions for one span of the perturbed input.
/// `rows` are row indices into the perturbed sequence; `target_probs` has one
/// distribution per row.
struct SpanTargets {
  std::vector<Eigen::Index> rows;
  Eigen::MatrixXd target_probs;

  Eigen::Index count() const { return static_cast<Eigen::Index>(rows.size()); }
};

struct LossTargets {
  SpanTargets answer;
  SpanTargets cot;
};

/// Row-index correspondence between a reference prompt and a perturbed one.
struct SpanAlignment {
  std::vector<Eigen::Index> reference_rows;
  std::vector<Eigen::Index> perturbed_rows;
};

struct PromptAlignment {
  SpanAlignment answer;  // positions in [0, n3): ICL, question, answer
  SpanAlignment cot;     // positions in [n3, n4)
};

/// Aligns two prompts segment by segment. Segments of unequal length (the
/// question after insertion, a regenerated reasoning span) are head-aligned
/// and truncated to the shorter length; equal-length segments align exactly.
PromptAlignment align_prompts(const SegmentedPrompt& reference, const SegmentedPrompt& perturbed);

/// Identity alignment for a prompt attacked in place (no length change).
PromptAlignment identity_alignment(const SegmentedPrompt& prompt);

/// Freeze reference distributions for the aligned rows. `reference_logits`
/// covers rows [0, n4) of the reference prompt.
LossTargets make_loss_targets(const Eigen::MatrixXd& reference_logits,
                              const PromptAlignment& alignment, CeTarget target);

/// Evaluate the composite objective of perturbed logits against targets.
LossBundle evaluate_losses(const Eigen::MatrixXd& perturbed_logits, const LossTargets& targets,
                           const LossSpec& spec);

/// d(L_opt)/d(logits) over the full perturbed sequence; rows outside the
/// target spans are zero.
Eigen::MatrixXd loss_logit_gradient(const Eigen::MatrixXd& perturbed_logits,
                                    const LossTargets& targets, const LossSpec& spec);

}  // namespace cotstress
