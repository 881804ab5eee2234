#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fdr/objectives.hpp"

namespace fdr {

/// Exact integer counts per (y, a) group plus the derived per-attribute
/// error rates and per-class recalls. Rates whose denominator is empty are
/// NaN; the metric functions below reject those cases explicitly.
struct GroupConfusion {
  std::array<std::int64_t, 4> count{};
  std::array<std::int64_t, 4> correct{};
  std::array<std::int64_t, 4> pred_pos{};
  std::array<double, 2> attr_error{};    // indexed by a
  std::array<double, 2> class_recall{};  // indexed by y
  std::int64_t total = 0;
  std::int64_t total_correct = 0;
};

GroupConfusion confusion(const std::vector<std::uint8_t>& preds,
                         const std::vector<std::uint8_t>& labels,
                         const std::vector<std::uint8_t>& attributes);

/// max(|FPR gap|, |TPR gap|) across the attribute groups, from hard
/// predictions.
double eo_diff(const GroupConfusion& conf);

/// |error rate(a=0) - error rate(a=1)|.
double ae_diff(const GroupConfusion& conf);

/// Minimum of the four group-conditional accuracies.
double worst_acc(const GroupConfusion& conf);

/// Balanced accuracy: mean of the per-class recalls.
double wacc(const GroupConfusion& conf);

double plain_acc(const GroupConfusion& conf);

/// Mann-Whitney statistic with ties counted 0.5, computed exactly by
/// sorting and ranking. Errors when only one class is present.
double auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

/// Composite accuracy-fairness score: WACC - EO_Diff, WACC - AE_Diff, or
/// WACC + WA depending on the notion; plain WACC when no notion is active.
double af(double wacc_value, double fairness_value, Notion notion);

struct MetricsReport {
  double wacc = 0.0;
  double auc = 0.0;
  double eo_diff = 0.0;
  double ae_diff = 0.0;
  double wa = 0.0;
  double af = 0.0;
  double plain_acc = 0.0;
  Notion notion = Notion::None;

  /// The disparity metric matching `notion`.
  double fairness_value() const;
};

MetricsReport compute_metrics(const std::vector<std::uint8_t>& hard,
                              const std::vector<double>& scores,
                              const std::vector<std::uint8_t>& labels,
                              const std::vector<std::uint8_t>& attributes, Notion notion);

}  // namespace fdr
