#pragma once

#include <string>
#include <vector>

#include "fdr/trainer.hpp"

namespace fdr {

/// Per-layer relative gradient norms and the learning-rate multipliers
/// derived from them (normalized so the largest multiplier is 1).
struct RgnReport {
  struct Layer {
    double grad_norm = 0.0;
    double param_norm = 0.0;
    double rgn = 0.0;
    double multiplier = 0.0;
    bool frozen = false;
  };
  std::vector<Layer> layers;
};

/// One full-batch gradient evaluation; RGN = ||g||_2 / (||w||_2 + 1e-12).
RgnReport rgn_scores(const MlpHead& head, const GroupedDataset& data, const ObjectiveConfig& obj);

/// Which part of the head a surgical run updates: a single layer (block
/// mode) or all layers with RGN-scaled learning rates (auto mode).
struct SurgicalMode {
  enum class Kind { Block, AutoRgn };
  Kind kind = Kind::Block;
  std::size_t block_index = 0;

  static SurgicalMode block(std::size_t index) { return {Kind::Block, index}; }
  static SurgicalMode auto_rgn() { return {Kind::AutoRgn, 0}; }

  /// Accepts "input", "hidden1".."hiddenK", "last" or "auto-rgn".
  static SurgicalMode parse(const std::string& name, std::size_t layer_count);
  std::string name(std::size_t layer_count) const;
};

struct SurgicalResult {
  MlpHead head;
  std::vector<EpochStats> trace;
  std::vector<RgnReport> rgn_trace;  // one per epoch in auto mode
};

/// Block mode freezes everything except the chosen layer and trains it;
/// auto mode trains all layers full-batch with per-layer learning rates
/// rescaled by the current epoch's RGN multipliers.
SurgicalResult surgical_train(const MlpHead& head, const SurgicalMode& mode,
                              const GroupedDataset& data, const ObjectiveConfig& obj,
                              const TrainConfig& cfg);

}  // namespace fdr
