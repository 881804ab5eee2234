#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fdr/dataset.hpp"
#include "fdr/model.hpp"
#include "fdr/objectives.hpp"

namespace fdr {

struct BatchMode {
  enum class Kind { Full, Minibatch };
  Kind kind = Kind::Full;
  std::size_t size = 0;

  static BatchMode full() { return {}; }
  static BatchMode minibatch(std::size_t size) { return {Kind::Minibatch, size}; }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t epochs = 1000;
  BatchMode batch;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Velocity {
  std::vector<Matrix> weight;
  std::vector<std::vector<double>> bias;

  static Velocity zeros_like(const MlpHead& head);
};

/// One SGD-with-momentum update: g' = g + wd*w; v = momentum*v + g';
/// w -= lr*v. Frozen layers are untouched. layer_lr_scale, when given,
/// multiplies the learning rate per layer.
void sgd_step(MlpHead& head, const Gradients& grads, Velocity& velocity, const TrainConfig& cfg,
              std::span<const double> layer_lr_scale = {});

struct EpochStats {
  LossBreakdown loss;
  std::size_t ce_only_steps = 0;  // minibatch steps that fell back to plain CE
};

struct TrainResult {
  MlpHead head;
  std::vector<EpochStats> trace;
};

/// Full-batch (or seeded-shuffle minibatch) training for a fixed number of
/// epochs. Velocity starts at zero. Deterministic for a given seed; aborts
/// with the epoch number if the loss diverges.
TrainResult train(const MlpHead& head, const GroupedDataset& data, const ObjectiveConfig& obj,
                  const TrainConfig& cfg);

struct SweepGrid {
  std::vector<double> learning_rates = {3e-4, 1e-3, 3e-3};
  std::vector<std::size_t> epochs_options = {500, 1000, 1500, 2000};
  std::vector<double> alphas = {0.5, 1.0, 2.0, 5.0, 10.0};

  void validate() const;
};

struct SweepPoint {
  double lr = 0.0;
  std::size_t epochs = 0;
  double alpha = 0.0;
};

struct SweepOutcome {
  SweepPoint point;
  double selection_af = 0.0;
  bool failed = false;
  std::string error;
};

struct SweepResult {
  SweepPoint best;
  double best_af = 0.0;
  std::vector<SweepOutcome> outcomes;
};

/// Evaluates every grid point (alpha axis collapses to a single 0 when
/// use_alpha is false) and returns the argmax of the selection score. Ties
/// break toward smaller epochs, then smaller lr, then smaller alpha.
SweepResult sweep(const SweepGrid& grid, bool use_alpha,
                  const std::function<double(const SweepPoint&)>& selection_score);

/// Key-value grid file with comma-separated lists:
/// `learning_rates = 3e-4,1e-3,3e-3`, `epochs = 500,1000,1500,2000`,
/// `alphas = 0.5,1,2,5,10`. '#' starts a comment; missing keys keep the
/// default ranges.
SweepGrid parse_grid_file(const std::string& path);

}  // namespace fdr
