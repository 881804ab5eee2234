#include "fdr/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "fdr/error.hpp"

namespace fdr {

const char* to_string(Notion notion) {
  switch (notion) {
    case Notion::None: return "none";
    case Notion::EO: return "eo";
    case Notion::AE: return "ae";
    case Notion::MMF: return "mmf";
  }
  return "?";
}

Notion notion_from_string(const std::string& name) {
  if (name == "none") return Notion::None;
  if (name == "eo") return Notion::EO;
  if (name == "ae") return Notion::AE;
  if (name == "mmf") return Notion::MMF;
  fail("unknown fairness notion '", name, "' (expected eo, ae, mmf or none)");
}

void ObjectiveConfig::validate() const {
  require(alpha >= 0.0, "objective: alpha must be >= 0");
  for (double w : group_weights) require(w > 0.0, "objective: group weights must be positive");
}

namespace {

constexpr double kProbFloor = 1e-12;

double clamped_nll(double p) { return -std::log(std::max(p, kProbFloor)); }

double sign_or_zero(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

struct AttrCounts {
  double n_pos = 0.0;  // a = 1
  double n_neg = 0.0;  // a = 0
};

AttrCounts attr_counts(const std::vector<std::uint8_t>& attributes, const char* who) {
  AttrCounts c;
  for (std::uint8_t a : attributes) (a ? c.n_pos : c.n_neg) += 1.0;
  require(c.n_pos > 0.0, who, ": attribute group a=1 is empty");
  require(c.n_neg > 0.0, who, ": attribute group a=0 is empty");
  return c;
}

}  // namespace

double weighted_ce(const Matrix& probs, const std::vector<std::uint8_t>& labels,
                   const std::vector<std::uint8_t>& attributes,
                   const std::array<double, 4>& weights) {
  const std::size_t n = labels.size();
  require(n > 0, "weighted_ce: empty batch");
  require(probs.rows() == n && attributes.size() == n, "weighted_ce: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int g = 2 * labels[i] + attributes[i];
    sum += weights[g] * clamped_nll(probs(i, labels[i]));
  }
  return sum / static_cast<double>(n);
}

EoPenalty eo_penalty(const Matrix& probs, const std::vector<std::uint8_t>& labels,
                     const std::vector<std::uint8_t>& attributes) {
  const std::size_t n = labels.size();
  require(n > 0, "eo_penalty: empty batch");
  const AttrCounts c = attr_counts(attributes, "eo_penalty");
  double fp_pos = 0.0, fp_neg = 0.0, fn_pos = 0.0, fn_neg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = probs(i, 1);
    if (labels[i] == 0) {
      (attributes[i] ? fp_pos : fp_neg) += p;
    } else {
      (attributes[i] ? fn_pos : fn_neg) += 1.0 - p;
    }
  }
  EoPenalty pen;
  pen.fpr_term = std::abs(fp_pos / c.n_pos - fp_neg / c.n_neg);
  pen.fnr_term = std::abs(fn_pos / c.n_pos - fn_neg / c.n_neg);
  return pen;
}

double ae_penalty(const Matrix& probs, const std::vector<std::uint8_t>& labels,
                  const std::vector<std::uint8_t>& attributes) {
  const std::size_t n = labels.size();
  require(n > 0, "ae_penalty: empty batch");
  const AttrCounts c = attr_counts(attributes, "ae_penalty");
  double loss_pos = 0.0, loss_neg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double nll = clamped_nll(probs(i, labels[i]));
    (attributes[i] ? loss_pos : loss_neg) += nll;
  }
  return std::abs(loss_pos / c.n_pos - loss_neg / c.n_neg);
}

std::array<double, 4> per_group_ce(const Matrix& probs, const std::vector<std::uint8_t>& labels,
                                   const std::vector<std::uint8_t>& attributes, bool required) {
  std::array<double, 4> sums{};
  std::array<double, 4> counts{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int g = 2 * labels[i] + attributes[i];
    sums[g] += clamped_nll(probs(i, labels[i]));
    counts[g] += 1.0;
  }
  std::array<double, 4> means{};
  for (int g = 0; g < 4; ++g) {
    if (counts[g] > 0.0) {
      means[g] = sums[g] / counts[g];
    } else {
      require(!required, "per-group CE: group (y=", g / 2, ",a=", g % 2, ") is empty");
      means[g] = 0.0;
    }
  }
  return means;
}

MmfValue mmf_objective(const Matrix& probs, const std::vector<std::uint8_t>& labels,
                       const std::vector<std::uint8_t>& attributes) {
  require(!labels.empty(), "mmf_objective: empty batch");
  const auto group_ce = per_group_ce(probs, labels, attributes, /*required=*/true);
  MmfValue out;
  out.argmax_group = 0;
  out.value = group_ce[0];
  for (int g = 1; g < 4; ++g) {
    if (group_ce[g] > out.value) {
      out.value = group_ce[g];
      out.argmax_group = g;
    }
  }
  return out;
}

LossBreakdown loss_from_probs(const Matrix& probs, const std::vector<std::uint8_t>& labels,
                              const std::vector<std::uint8_t>& attributes,
                              const ObjectiveConfig& cfg) {
  cfg.validate();
  require(!labels.empty(), "loss: empty batch");
  LossBreakdown out;
  out.ce = weighted_ce(probs, labels, attributes, cfg.group_weights);
  out.per_group_ce = per_group_ce(probs, labels, attributes, cfg.notion == Notion::MMF);
  switch (cfg.notion) {
    case Notion::None:
      out.total = out.ce;
      break;
    case Notion::EO: {
      const EoPenalty pen = eo_penalty(probs, labels, attributes);
      out.fpr_term = pen.fpr_term;
      out.fnr_term = pen.fnr_term;
      out.penalty = pen.value();
      out.total = out.ce + cfg.alpha * out.penalty;
      break;
    }
    case Notion::AE:
      out.penalty = ae_penalty(probs, labels, attributes);
      out.total = out.ce + cfg.alpha * out.penalty;
      break;
    case Notion::MMF: {
      const MmfValue mmf = mmf_objective(probs, labels, attributes);
      out.penalty = mmf.value;
      out.argmax_group = mmf.argmax_group;
      out.total = mmf.value;
      break;
    }
  }
  require(std::isfinite(out.total), "loss: non-finite objective value");
  return out;
}

LossBreakdown loss_only(const MlpHead& head, const GroupedDataset& batch,
                        const ObjectiveConfig& cfg) {
  const PredictionBatch pred = forward(head, batch.features);
  return loss_from_probs(pred.probs, batch.labels, batch.attributes, cfg);
}

LossAndGrad loss_and_grad(const MlpHead& head, const GroupedDataset& batch,
                          const ObjectiveConfig& cfg) {
  const std::size_t n = batch.size();
  ForwardCache cache = forward_cached(head, batch.features);
  const Matrix probs = softmax_rows(cache.logits());

  LossAndGrad out;
  out.loss = loss_from_probs(probs, batch.labels, batch.attributes, cfg);

  // d(total)/d(logits). The cross-entropy part contributes
  // coeff_i * (p_i - onehot(y_i)); the EO penalty acts through the
  // positive-class probability with d p1/d z1 = p1 p0 = -d p1/d z0.
  Matrix dlogits(n, 2);
  const bool use_ce = cfg.notion != Notion::MMF;

  std::array<double, 4> group_counts{};
  for (std::size_t i = 0; i < n; ++i) group_counts[batch.group_of(i)] += 1.0;

  double ae_sign = 0.0;
  AttrCounts attrs;
  if (cfg.notion == Notion::EO || cfg.notion == Notion::AE) {
    attrs = attr_counts(batch.attributes, "loss_and_grad");
  }
  if (cfg.notion == Notion::AE) {
    double loss_pos = 0.0, loss_neg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double nll = clamped_nll(probs(i, batch.labels[i]));
      (batch.attributes[i] ? loss_pos : loss_neg) += nll;
    }
    ae_sign = sign_or_zero(loss_pos / attrs.n_pos - loss_neg / attrs.n_neg);
  }
  double fpr_sign = 0.0, fnr_sign = 0.0;
  if (cfg.notion == Notion::EO) {
    double fp_pos = 0.0, fp_neg = 0.0, fn_pos = 0.0, fn_neg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = probs(i, 1);
      if (batch.labels[i] == 0) {
        (batch.attributes[i] ? fp_pos : fp_neg) += p;
      } else {
        (batch.attributes[i] ? fn_pos : fn_neg) += 1.0 - p;
      }
    }
    fpr_sign = sign_or_zero(fp_pos / attrs.n_pos - fp_neg / attrs.n_neg);
    fnr_sign = sign_or_zero(fn_pos / attrs.n_pos - fn_neg / attrs.n_neg);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t y = batch.labels[i];
    const std::uint8_t a = batch.attributes[i];
    const int g = 2 * y + a;
    const double p0 = probs(i, 0);
    const double p1 = probs(i, 1);

    // Coefficient multiplying (p - onehot(y)) for this row.
    double ce_coeff = 0.0;
    if (use_ce) ce_coeff = cfg.group_weights[g] / static_cast<double>(n);
    if (cfg.notion == Notion::AE) {
      const double dpen_dce = ae_sign * (a ? 1.0 / attrs.n_pos : -1.0 / attrs.n_neg);
      ce_coeff += cfg.alpha * dpen_dce;
    }
    if (cfg.notion == Notion::MMF && g == out.loss.argmax_group) {
      ce_coeff += 1.0 / group_counts[g];
    }
    dlogits(i, 0) = ce_coeff * (p0 - (y == 0 ? 1.0 : 0.0));
    dlogits(i, 1) = ce_coeff * (p1 - (y == 1 ? 1.0 : 0.0));

    if (cfg.notion == Notion::EO) {
      // d(penalty)/d(p1) for this row, then through the softmax.
      double dpen_dp = 0.0;
      if (y == 0) {
        dpen_dp = fpr_sign * (a ? 1.0 / attrs.n_pos : -1.0 / attrs.n_neg);
      } else {
        dpen_dp = -fnr_sign * (a ? 1.0 / attrs.n_pos : -1.0 / attrs.n_neg);
      }
      const double dz = cfg.alpha * dpen_dp * p1 * p0;
      dlogits(i, 1) += dz;
      dlogits(i, 0) -= dz;
    }
  }

  out.grads = backward(head, cache, dlogits);
  return out;
}

}  // namespace fdr
