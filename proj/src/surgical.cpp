#include "fdr/surgical.hpp"

#include <cmath>

#include "fdr/error.hpp"

namespace fdr {

namespace {

RgnReport report_from_grads(const MlpHead& head, const Gradients& grads) {
  RgnReport report;
  report.layers.resize(head.layer_count());
  double max_rgn = 0.0;
  for (std::size_t l = 0; l < head.layer_count(); ++l) {
    auto& entry = report.layers[l];
    entry.frozen = head.frozen(l);
    double g2 = 0.0, w2 = 0.0;
    for (double g : grads.weight[l].data()) g2 += g * g;
    for (double g : grads.bias[l]) g2 += g * g;
    for (double w : head.layers[l].weight.data()) w2 += w * w;
    for (double b : head.layers[l].bias) w2 += b * b;
    entry.grad_norm = std::sqrt(g2);
    entry.param_norm = std::sqrt(w2);
    entry.rgn = entry.grad_norm / (entry.param_norm + 1e-12);
    max_rgn = std::max(max_rgn, entry.rgn);
  }
  require(max_rgn > 0.0, "rgn: every layer has zero relative gradient norm");
  for (auto& entry : report.layers) entry.multiplier = entry.rgn / max_rgn;
  return report;
}

}  // namespace

RgnReport rgn_scores(const MlpHead& head, const GroupedDataset& data, const ObjectiveConfig& obj) {
  require(data.size() > 0, "rgn: empty dataset");
  const LossAndGrad lg = loss_and_grad(head, data, obj);
  return report_from_grads(head, lg.grads);
}

SurgicalMode SurgicalMode::parse(const std::string& name, std::size_t layer_count) {
  require(layer_count > 0, "surgical: head has no layers");
  if (name == "auto-rgn") return auto_rgn();
  if (name == "last") return block(layer_count - 1);
  if (name == "input") {
    require(layer_count > 1, "surgical: a single-layer head has only 'last'");
    return block(0);
  }
  if (name.rfind("hidden", 0) == 0) {
    std::size_t idx = 0;
    try {
      idx = std::stoull(name.substr(6));
    } catch (const std::exception&) {
      fail("surgical: malformed block name '", name, "'");
    }
    require(idx >= 1 && idx + 1 < layer_count, "surgical: no hidden block '", name, "' in a ",
            layer_count, "-layer head");
    return block(idx);
  }
  fail("surgical: unknown mode '", name, "' (expected input, hiddenK, last or auto-rgn)");
}

std::string SurgicalMode::name(std::size_t layer_count) const {
  if (kind == Kind::AutoRgn) return "auto-rgn";
  if (block_index == layer_count - 1) return "last";
  if (block_index == 0) return "input";
  return "hidden" + std::to_string(block_index);
}

SurgicalResult surgical_train(const MlpHead& head, const SurgicalMode& mode,
                              const GroupedDataset& data, const ObjectiveConfig& obj,
                              const TrainConfig& cfg) {
  SurgicalResult result;
  if (mode.kind == SurgicalMode::Kind::Block) {
    require(mode.block_index < head.layer_count(), "surgical: block index ", mode.block_index,
            " out of range for ", head.layer_count(), " layers");
    MlpHead masked = head;
    std::vector<std::uint8_t> mask(head.layer_count(), 1);
    mask[mode.block_index] = 0;
    set_freeze_mask(masked, std::move(mask));
    TrainResult trained = train(masked, data, obj, cfg);
    result.head = std::move(trained.head);
    result.trace = std::move(trained.trace);
    return result;
  }

  // Auto-RGN: every layer trains; the multipliers are recomputed from each
  // epoch's full-batch gradient and rescale the per-layer learning rate.
  cfg.validate();
  require(cfg.batch.kind == BatchMode::Kind::Full, "surgical auto-rgn: full batch only");
  MlpHead current = head;
  set_freeze_mask(current, std::vector<std::uint8_t>(head.layer_count(), 0));
  Velocity velocity = Velocity::zeros_like(current);
  result.trace.reserve(cfg.epochs);
  result.rgn_trace.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    LossAndGrad lg = loss_and_grad(current, data, obj);
    if (!std::isfinite(lg.loss.total)) fail("surgical auto-rgn: loss diverged at epoch ", epoch);
    RgnReport report = report_from_grads(current, lg.grads);
    std::vector<double> scale(current.layer_count());
    for (std::size_t l = 0; l < scale.size(); ++l) scale[l] = report.layers[l].multiplier;
    sgd_step(current, lg.grads, velocity, cfg, scale);
    result.trace.push_back({lg.loss, 0});
    result.rgn_trace.push_back(std::move(report));
  }
  result.head = std::move(current);
  return result;
}

}  // namespace fdr
