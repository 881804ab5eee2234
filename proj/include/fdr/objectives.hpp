#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fdr/dataset.hpp"
#include "fdr/model.hpp"

namespace fdr {

enum class Notion { None, EO, AE, MMF };

const char* to_string(Notion notion);
Notion notion_from_string(const std::string& name);

struct ObjectiveConfig {
  Notion notion = Notion::None;
  double alpha = 0.0;
  std::array<double, 4> group_weights = {1.0, 1.0, 1.0, 1.0};

  void validate() const;
};

/// One loss evaluation, decomposed. total = ce + alpha * penalty for EO/AE,
/// the max per-group cross-entropy for MMF, and plain ce otherwise.
struct LossBreakdown {
  double total = 0.0;
  double ce = 0.0;
  double penalty = 0.0;
  std::array<double, 4> per_group_ce{};
  double fpr_term = 0.0;
  double fnr_term = 0.0;
  int argmax_group = -1;  // MMF only
};

/// Mean of w_g(i) * -log p_i[y_i]; probabilities are clamped at 1e-12
/// before the log.
double weighted_ce(const Matrix& probs, const std::vector<std::uint8_t>& labels,
                   const std::vector<std::uint8_t>& attributes, const std::array<double, 4>& weights);

struct EoPenalty {
  double fpr_term = 0.0;
  double fnr_term = 0.0;
  double value() const { return fpr_term + fnr_term; }
};

/// The soft false-positive/false-negative rate gaps between attribute
/// groups, computed from the positive-class probabilities.
EoPenalty eo_penalty(const Matrix& probs, const std::vector<std::uint8_t>& labels,
                     const std::vector<std::uint8_t>& attributes);

/// |mean CE over a=1 rows - mean CE over a=0 rows| (unweighted).
double ae_penalty(const Matrix& probs, const std::vector<std::uint8_t>& labels,
                  const std::vector<std::uint8_t>& attributes);

struct MmfValue {
  double value = 0.0;
  int argmax_group = -1;  // ties go to the lowest group index
};

/// Maximum per-group unweighted cross-entropy over the four (y, a) groups.
MmfValue mmf_objective(const Matrix& probs, const std::vector<std::uint8_t>& labels,
                       const std::vector<std::uint8_t>& attributes);

/// Unweighted mean CE per (y, a) group; groups must all be nonempty when
/// `required` is set, otherwise empty groups report 0.
std::array<double, 4> per_group_ce(const Matrix& probs, const std::vector<std::uint8_t>& labels,
                                   const std::vector<std::uint8_t>& attributes, bool required);

/// Full breakdown from probabilities (no gradients); shared by the loss
/// path and the evaluation path.
LossBreakdown loss_from_probs(const Matrix& probs, const std::vector<std::uint8_t>& labels,
                              const std::vector<std::uint8_t>& attributes,
                              const ObjectiveConfig& cfg);

struct LossAndGrad {
  LossBreakdown loss;
  Gradients grads;
};

/// Analytic gradients of the configured objective with respect to every
/// trainable parameter. Absolute values use the sign subgradient with
/// sign(0) = 0; the MMF max differentiates through the argmax group only.
LossAndGrad loss_and_grad(const MlpHead& head, const GroupedDataset& batch,
                          const ObjectiveConfig& cfg);

/// Forward-only objective value; the finite-difference oracle in the tests
/// is built on this.
LossBreakdown loss_only(const MlpHead& head, const GroupedDataset& batch,
                        const ObjectiveConfig& cfg);

}  // namespace fdr
