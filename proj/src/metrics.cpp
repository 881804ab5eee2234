#include "fdr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fdr/error.hpp"

namespace fdr {

GroupConfusion confusion(const std::vector<std::uint8_t>& preds,
                         const std::vector<std::uint8_t>& labels,
                         const std::vector<std::uint8_t>& attributes) {
  const std::size_t n = labels.size();
  require(n > 0, "confusion: empty input");
  require(preds.size() == n && attributes.size() == n, "confusion: length mismatch (",
          preds.size(), "/", n, "/", attributes.size(), ")");

  GroupConfusion conf;
  conf.total = static_cast<std::int64_t>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int g = 2 * labels[i] + attributes[i];
    conf.count[g]++;
    if (preds[i] == labels[i]) {
      conf.correct[g]++;
      conf.total_correct++;
    }
    if (preds[i] == 1) conf.pred_pos[g]++;
  }

  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  for (int a = 0; a < 2; ++a) {
    const std::int64_t count = conf.count[a] + conf.count[2 + a];
    const std::int64_t correct = conf.correct[a] + conf.correct[2 + a];
    conf.attr_error[a] = count > 0 ? 1.0 - static_cast<double>(correct) / static_cast<double>(count)
                                   : kNaN;
  }
  for (int y = 0; y < 2; ++y) {
    const std::int64_t count = conf.count[2 * y] + conf.count[2 * y + 1];
    const std::int64_t correct = conf.correct[2 * y] + conf.correct[2 * y + 1];
    conf.class_recall[y] = count > 0
                               ? static_cast<double>(correct) / static_cast<double>(count)
                               : kNaN;
  }
  return conf;
}

namespace {

void require_groups(const GroupConfusion& conf, const char* who) {
  for (int g = 0; g < 4; ++g) {
    require(conf.count[g] > 0, who, ": group (y=", g / 2, ",a=", g % 2, ") is empty");
  }
}

double positive_rate(const GroupConfusion& conf, int y, int a) {
  const int g = 2 * y + a;
  return static_cast<double>(conf.pred_pos[g]) / static_cast<double>(conf.count[g]);
}

}  // namespace

double eo_diff(const GroupConfusion& conf) {
  require_groups(conf, "eo_diff");
  const double fpr_gap = std::abs(positive_rate(conf, 0, 0) - positive_rate(conf, 0, 1));
  const double tpr_gap = std::abs(positive_rate(conf, 1, 0) - positive_rate(conf, 1, 1));
  return std::max(fpr_gap, tpr_gap);
}

double ae_diff(const GroupConfusion& conf) {
  for (int a = 0; a < 2; ++a) {
    require(conf.count[a] + conf.count[2 + a] > 0, "ae_diff: attribute group a=", a, " is empty");
  }
  return std::abs(conf.attr_error[0] - conf.attr_error[1]);
}

double worst_acc(const GroupConfusion& conf) {
  require_groups(conf, "worst_acc");
  double worst = 1.0;
  for (int g = 0; g < 4; ++g) {
    worst = std::min(worst, static_cast<double>(conf.correct[g]) / static_cast<double>(conf.count[g]));
  }
  return worst;
}

double wacc(const GroupConfusion& conf) {
  for (int y = 0; y < 2; ++y) {
    require(conf.count[2 * y] + conf.count[2 * y + 1] > 0, "wacc: class y=", y, " is empty");
  }
  return 0.5 * (conf.class_recall[0] + conf.class_recall[1]);
}

double plain_acc(const GroupConfusion& conf) {
  return static_cast<double>(conf.total_correct) / static_cast<double>(conf.total);
}

double auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  const std::size_t n = labels.size();
  require(scores.size() == n, "auc: length mismatch");
  std::size_t n_pos = 0;
  for (std::uint8_t y : labels) n_pos += y;
  const std::size_t n_neg = n - n_pos;
  require(n_pos > 0 && n_neg > 0, "auc: needs both classes present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });

  // Average ranks over tied score runs, then the Mann-Whitney U statistic.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double af(double wacc_value, double fairness_value, Notion notion) {
  switch (notion) {
    case Notion::EO:
    case Notion::AE:
      return wacc_value - fairness_value;
    case Notion::MMF:
      return wacc_value + fairness_value;
    case Notion::None:
      return wacc_value;
  }
  return wacc_value;
}

double MetricsReport::fairness_value() const {
  switch (notion) {
    case Notion::EO: return eo_diff;
    case Notion::AE: return ae_diff;
    case Notion::MMF: return wa;
    case Notion::None: return 0.0;
  }
  return 0.0;
}

MetricsReport compute_metrics(const std::vector<std::uint8_t>& hard,
                              const std::vector<double>& scores,
                              const std::vector<std::uint8_t>& labels,
                              const std::vector<std::uint8_t>& attributes, Notion notion) {
  const GroupConfusion conf = confusion(hard, labels, attributes);
  MetricsReport report;
  report.notion = notion;
  report.wacc = wacc(conf);
  report.auc = auc(scores, labels);
  report.eo_diff = eo_diff(conf);
  report.ae_diff = ae_diff(conf);
  report.wa = worst_acc(conf);
  report.plain_acc = plain_acc(conf);
  report.af = af(report.wacc, report.fairness_value(), notion);
  return report;
}

}  // namespace fdr
