#pragma once

// Independent brute-force evaluators used as test oracles. Everything here
// recomputes definitions directly from raw samples with naive loops and
// must stay decoupled from the library implementations it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fdr/dataset.hpp"
#include "fdr/matrix.hpp"
#include "fdr/model.hpp"
#include "fdr/objectives.hpp"

namespace oracle {

using std::uint8_t;
using Bytes = std::vector<uint8_t>;

// --- Appendix-style hard-prediction metrics -------------------------------

// P(pred = 1 | y, a), counted directly.
inline double positive_rate(const Bytes& preds, const Bytes& labels, const Bytes& attrs, int y,
                            int a) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] == y && attrs[i] == a) {
      den += 1.0;
      if (preds[i] == 1) num += 1.0;
    }
  }
  return num / den;
}

inline double eo_diff(const Bytes& preds, const Bytes& labels, const Bytes& attrs) {
  const double fpr_gap =
      std::abs(positive_rate(preds, labels, attrs, 0, 0) - positive_rate(preds, labels, attrs, 0, 1));
  const double tpr_gap =
      std::abs(positive_rate(preds, labels, attrs, 1, 0) - positive_rate(preds, labels, attrs, 1, 1));
  return std::max(fpr_gap, tpr_gap);
}

inline double ae_diff(const Bytes& preds, const Bytes& labels, const Bytes& attrs) {
  double wrong[2] = {0.0, 0.0};
  double count[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    count[attrs[i]] += 1.0;
    if (preds[i] != labels[i]) wrong[attrs[i]] += 1.0;
  }
  return std::abs(wrong[0] / count[0] - wrong[1] / count[1]);
}

inline double worst_acc(const Bytes& preds, const Bytes& labels, const Bytes& attrs) {
  double worst = 1.0;
  for (int y = 0; y < 2; ++y) {
    for (int a = 0; a < 2; ++a) {
      double right = 0.0, count = 0.0;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        if (labels[i] == y && attrs[i] == a) {
          count += 1.0;
          if (preds[i] == labels[i]) right += 1.0;
        }
      }
      worst = std::min(worst, right / count);
    }
  }
  return worst;
}

inline double wacc(const Bytes& preds, const Bytes& labels, const Bytes& attrs) {
  (void)attrs;
  double recall_sum = 0.0;
  for (int y = 0; y < 2; ++y) {
    double right = 0.0, count = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (labels[i] == y) {
        count += 1.0;
        if (preds[i] == labels[i]) right += 1.0;
      }
    }
    recall_sum += right / count;
  }
  return recall_sum / 2.0;
}

inline double plain_acc(const Bytes& preds, const Bytes& labels) {
  double right = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == labels[i]) right += 1.0;
  }
  return right / static_cast<double>(preds.size());
}

// Pair-counting AUC: fraction of (positive, negative) pairs where the
// positive scores higher; ties count one half.
inline double auc_pairs(const std::vector<double>& scores, const Bytes& labels) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / pairs;
}

// --- Training-objective terms, straight from their definitions ------------

inline double nll(double p) { return -std::log(std::max(p, 1e-12)); }

inline double weighted_ce(const fdr::Matrix& probs, const Bytes& labels, const Bytes& attrs,
                          const std::array<double, 4>& weights) {
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sum += weights[2 * labels[i] + attrs[i]] * nll(probs(i, labels[i]));
  }
  return sum / static_cast<double>(labels.size());
}

struct EoPieces {
  double fpr_diff = 0.0;  // signed difference inside |.|
  double fnr_diff = 0.0;
};

inline EoPieces eo_pieces(const fdr::Matrix& probs, const Bytes& labels, const Bytes& attrs) {
  double sum_a = 0.0, sum_na = 0.0;
  double fp_a = 0.0, fp_na = 0.0, fn_a = 0.0, fn_na = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probs(i, 1);
    const double a = attrs[i];
    const double y = labels[i];
    sum_a += a;
    sum_na += 1.0 - a;
    fp_a += p * (1.0 - y) * a;
    fp_na += p * (1.0 - y) * (1.0 - a);
    fn_a += (1.0 - p) * y * a;
    fn_na += (1.0 - p) * y * (1.0 - a);
  }
  return {fp_a / sum_a - fp_na / sum_na, fn_a / sum_a - fn_na / sum_na};
}

inline double eo_fpr_term(const fdr::Matrix& probs, const Bytes& labels, const Bytes& attrs) {
  return std::abs(eo_pieces(probs, labels, attrs).fpr_diff);
}

inline double eo_fnr_term(const fdr::Matrix& probs, const Bytes& labels, const Bytes& attrs) {
  return std::abs(eo_pieces(probs, labels, attrs).fnr_diff);
}

// Signed L(a=1) - L(a=0) with unweighted per-attribute CE.
inline double ae_signed(const fdr::Matrix& probs, const Bytes& labels, const Bytes& attrs) {
  double loss[2] = {0.0, 0.0};
  double count[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    loss[attrs[i]] += nll(probs(i, labels[i]));
    count[attrs[i]] += 1.0;
  }
  return loss[1] / count[1] - loss[0] / count[0];
}

inline std::array<double, 4> group_ce(const fdr::Matrix& probs, const Bytes& labels,
                                      const Bytes& attrs) {
  std::array<double, 4> loss{};
  std::array<double, 4> count{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int g = 2 * labels[i] + attrs[i];
    loss[g] += nll(probs(i, labels[i]));
    count[g] += 1.0;
  }
  for (int g = 0; g < 4; ++g) loss[g] = count[g] > 0 ? loss[g] / count[g] : 0.0;
  return loss;
}

inline int mmf_argmax(const fdr::Matrix& probs, const Bytes& labels, const Bytes& attrs) {
  const auto ce = group_ce(probs, labels, attrs);
  int best = 0;
  for (int g = 1; g < 4; ++g) {
    if (ce[g] > ce[best]) best = g;
  }
  return best;
}

// --- Finite-difference gradient protocol ----------------------------------

inline std::vector<double*> param_ptrs(fdr::MlpHead& head) {
  std::vector<double*> ptrs;
  for (auto& layer : head.layers) {
    for (auto& w : layer.weight.data()) ptrs.push_back(&w);
    for (auto& b : layer.bias) ptrs.push_back(&b);
  }
  return ptrs;
}

inline std::vector<double> flat_grads(const fdr::Gradients& grads) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < grads.weight.size(); ++l) {
    for (double g : grads.weight[l].data()) flat.push_back(g);
    for (double g : grads.bias[l]) flat.push_back(g);
  }
  return flat;
}

struct FdCheck {
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::size_t mismatches = 0;
  double worst_abs_err = 0.0;
};

// Central finite differences of the configured objective, coordinate by
// coordinate. A coordinate whose +-h evaluations land on different smooth
// pieces (an |.| sign flip or an MMF argmax change) is skipped — the
// derivative is not defined by a single piece there.
inline FdCheck fd_gradient_check(const fdr::MlpHead& head, const fdr::GroupedDataset& batch,
                                 const fdr::ObjectiveConfig& cfg, double step, double rel_tol,
                                 double abs_tol) {
  const auto analytic = fdr::loss_and_grad(head, batch, cfg);
  const auto flat = flat_grads(analytic.grads);

  fdr::MlpHead probe = head;
  auto ptrs = param_ptrs(probe);

  auto pieces_of = [&](const fdr::MlpHead& h) {
    const auto pred = fdr::forward(h, batch.features);
    struct Pieces {
      double fpr_sign = 0.0, fnr_sign = 0.0, ae_sign = 0.0;
      int argmax = -1;
    } p;
    if (cfg.notion == fdr::Notion::EO) {
      const auto eo = eo_pieces(pred.probs, batch.labels, batch.attributes);
      p.fpr_sign = eo.fpr_diff > 0 ? 1.0 : (eo.fpr_diff < 0 ? -1.0 : 0.0);
      p.fnr_sign = eo.fnr_diff > 0 ? 1.0 : (eo.fnr_diff < 0 ? -1.0 : 0.0);
    } else if (cfg.notion == fdr::Notion::AE) {
      const double d = ae_signed(pred.probs, batch.labels, batch.attributes);
      p.ae_sign = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
    } else if (cfg.notion == fdr::Notion::MMF) {
      p.argmax = mmf_argmax(pred.probs, batch.labels, batch.attributes);
    }
    return p;
  };
  const auto base_pieces = pieces_of(head);

  FdCheck out;
  for (std::size_t k = 0; k < ptrs.size(); ++k) {
    const double saved = *ptrs[k];

    *ptrs[k] = saved + step;
    const double loss_plus = fdr::loss_only(probe, batch, cfg).total;
    const auto pieces_plus = pieces_of(probe);

    *ptrs[k] = saved - step;
    const double loss_minus = fdr::loss_only(probe, batch, cfg).total;
    const auto pieces_minus = pieces_of(probe);

    *ptrs[k] = saved;

    const bool same_piece = pieces_plus.fpr_sign == pieces_minus.fpr_sign &&
                            pieces_plus.fpr_sign == base_pieces.fpr_sign &&
                            pieces_plus.fnr_sign == pieces_minus.fnr_sign &&
                            pieces_plus.fnr_sign == base_pieces.fnr_sign &&
                            pieces_plus.ae_sign == pieces_minus.ae_sign &&
                            pieces_plus.ae_sign == base_pieces.ae_sign &&
                            pieces_plus.argmax == pieces_minus.argmax &&
                            pieces_plus.argmax == base_pieces.argmax;
    if (!same_piece) {
      out.skipped_kinks++;
      continue;
    }

    const double fd = (loss_plus - loss_minus) / (2.0 * step);
    const double err = std::abs(fd - flat[k]);
    const double tol = std::max(rel_tol * std::max(std::abs(fd), std::abs(flat[k])), abs_tol);
    out.checked++;
    out.worst_abs_err = std::max(out.worst_abs_err, err);
    if (err > tol) out.mismatches++;
  }
  return out;
}

}  // namespace oracle
