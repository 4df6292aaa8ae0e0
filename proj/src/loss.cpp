#include "cotstress/loss.hpp"

#include <stdexcept>

#include "cotstress/errors.hpp"
#include "cotstress/math.hpp"

namespace cotstress {

std::string_view to_string(SignConvention c) {
  return c == SignConvention::LiteralEq4 ? "literal-eq4" : "maximize-lopt";
}
std::string_view to_string(CeTarget t) { return t == CeTarget::Soft ? "soft" : "hard-argmax"; }
std::string_view to_string(Reduction r) { return r == Reduction::Mean ? "mean" : "sum"; }

double compute_lambda(Eigen::Index n3, Eigen::Index n4) {
  if (n3 <= 0) throw std::invalid_argument("compute_lambda: n3 must be positive");
  if (n4 < n3) throw std::invalid_argument("compute_lambda: n4 < n3");
  return static_cast<double>(n4 - n3) / static_cast<double>(n3);
}

double compute_lambda(const SegmentedPrompt& prompt) {
  return compute_lambda(prompt.n3, prompt.n4);
}

namespace {

Eigen::MatrixXd target_distributions(const Eigen::MatrixXd& reference_logits, CeTarget target) {
  if (target == CeTarget::Soft) return math::softmax_rows(reference_logits);
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(reference_logits.rows(), reference_logits.cols());
  for (Eigen::Index r = 0; r < reference_logits.rows(); ++r) {
    Eigen::Index best = 0;
    reference_logits.row(r).maxCoeff(&best);
    probs(r, best) = 1.0;
  }
  return probs;
}

double reduce(const Eigen::VectorXd& per_row, Reduction reduction) {
  if (per_row.size() == 0) return 0.0;
  const double total = per_row.sum();
  return reduction == Reduction::Mean ? total / static_cast<double>(per_row.size()) : total;
}

void append_aligned(SpanAlignment& a, Eigen::Index ref_begin, Eigen::Index ref_end,
                    Eigen::Index pert_begin, Eigen::Index pert_end) {
  const Eigen::Index len = std::min(ref_end - ref_begin, pert_end - pert_begin);
  for (Eigen::Index i = 0; i < len; ++i) {
    a.reference_rows.push_back(ref_begin + i);
    a.perturbed_rows.push_back(pert_begin + i);
  }
}

}  // namespace

double soft_cross_entropy(const Eigen::MatrixXd& perturbed, const Eigen::MatrixXd& reference,
                          CeTarget target, Reduction reduction) {
  if (perturbed.rows() != reference.rows() || perturbed.cols() != reference.cols()) {
    throw std::invalid_argument("soft_cross_entropy: shape mismatch");
  }
  const Eigen::MatrixXd probs = target_distributions(reference, target);
  return reduce(math::cross_entropy_vs_target_rows(perturbed, probs), reduction);
}

double composite_objective(double l_c, double l_a, const LossSpec& spec) {
  return l_c - spec.effective_lambda() * l_a;
}

PromptAlignment align_prompts(const SegmentedPrompt& reference, const SegmentedPrompt& perturbed) {
  if (reference.n1 != perturbed.n1) {
    throw PromptError("align_prompts: in-context blocks differ in length");
  }
  PromptAlignment out;
  append_aligned(out.answer, 0, reference.n1, 0, perturbed.n1);
  append_aligned(out.answer, reference.n1, reference.n2, perturbed.n1, perturbed.n2);
  append_aligned(out.answer, reference.n2, reference.n3, perturbed.n2, perturbed.n3);
  append_aligned(out.cot, reference.n3, reference.n4, perturbed.n3, perturbed.n4);
  return out;
}

PromptAlignment identity_alignment(const SegmentedPrompt& prompt) {
  return align_prompts(prompt, prompt);
}

LossTargets make_loss_targets(const Eigen::MatrixXd& reference_logits,
                              const PromptAlignment& alignment, CeTarget target) {
  LossTargets out;
  auto fill = [&](const SpanAlignment& span, SpanTargets& dst) {
    const auto count = static_cast<Eigen::Index>(span.reference_rows.size());
    Eigen::MatrixXd ref_rows(count, reference_logits.cols());
    for (Eigen::Index i = 0; i < count; ++i) {
      if (span.reference_rows[static_cast<std::size_t>(i)] >= reference_logits.rows()) {
        throw std::invalid_argument("make_loss_targets: reference row out of range");
      }
      ref_rows.row(i) = reference_logits.row(span.reference_rows[static_cast<std::size_t>(i)]);
    }
    dst.rows = span.perturbed_rows;
    dst.target_probs = target_distributions(ref_rows, target);
  };
  fill(alignment.answer, out.answer);
  fill(alignment.cot, out.cot);
  return out;
}

namespace {

double span_loss(const Eigen::MatrixXd& logits, const SpanTargets& span, Reduction reduction) {
  if (span.count() == 0) return 0.0;
  Eigen::VectorXd per_row(span.count());
  for (Eigen::Index i = 0; i < span.count(); ++i) {
    const Eigen::Index row = span.rows[static_cast<std::size_t>(i)];
    if (row < 0 || row >= logits.rows()) {
      throw std::invalid_argument("span_loss: row out of range");
    }
    per_row(i) =
        math::cross_entropy_vs_target_rows(logits.row(row), span.target_probs.row(i))(0);
  }
  return reduce(per_row, reduction);
}

}  // namespace

LossBundle evaluate_losses(const Eigen::MatrixXd& perturbed_logits, const LossTargets& targets,
                           const LossSpec& spec) {
  LossBundle out;
  out.l_c = span_loss(perturbed_logits, targets.cot, spec.reduction);
  out.l_a = span_loss(perturbed_logits, targets.answer, spec.reduction);
  out.lambda = spec.effective_lambda();
  out.l_opt = composite_objective(out.l_c, out.l_a, spec);
  return out;
}

Eigen::MatrixXd loss_logit_gradient(const Eigen::MatrixXd& perturbed_logits,
                                    const LossTargets& targets, const LossSpec& spec) {
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(perturbed_logits.rows(), perturbed_logits.cols());
  auto accumulate = [&](const SpanTargets& span, double weight) {
    if (span.count() == 0 || weight == 0.0) return;
    const double scale =
        spec.reduction == Reduction::Mean ? weight / static_cast<double>(span.count()) : weight;
    for (Eigen::Index i = 0; i < span.count(); ++i) {
      const Eigen::Index row = span.rows[static_cast<std::size_t>(i)];
      const Eigen::MatrixXd probs = math::softmax_rows(perturbed_logits.row(row));
      grad.row(row) += scale * (probs.row(0) - span.target_probs.row(i));
    }
  };
  accumulate(targets.cot, 1.0);
  accumulate(targets.answer, -spec.effective_lambda());
  return grad;
}

}  // namespace cotstress
