#include "fdr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fdr/error.hpp"
#include "fdr/rng.hpp"

namespace fdr {

void TrainConfig::validate() const {
  require(learning_rate >= 0.0, "train config: learning_rate must be >= 0");
  require(momentum >= 0.0 && momentum < 1.0, "train config: momentum must lie in [0, 1)");
  require(weight_decay >= 0.0, "train config: weight_decay must be >= 0");
  if (batch.kind == BatchMode::Kind::Minibatch) {
    require(batch.size > 0, "train config: minibatch size must be positive");
  }
}

Velocity Velocity::zeros_like(const MlpHead& head) {
  Velocity v;
  v.weight.reserve(head.layer_count());
  v.bias.reserve(head.layer_count());
  for (const auto& layer : head.layers) {
    v.weight.emplace_back(layer.fan_out(), layer.fan_in());
    v.bias.emplace_back(layer.fan_out(), 0.0);
  }
  return v;
}

void sgd_step(MlpHead& head, const Gradients& grads, Velocity& velocity, const TrainConfig& cfg,
              std::span<const double> layer_lr_scale) {
  require(grads.weight.size() == head.layer_count(), "sgd_step: gradient shape mismatch");
  for (std::size_t l = 0; l < head.layer_count(); ++l) {
    if (head.frozen(l)) continue;
    AffineLayer& layer = head.layers[l];
    require(grads.weight[l].rows() == layer.fan_out() && grads.weight[l].cols() == layer.fan_in(),
            "sgd_step: gradient shape mismatch at layer ", l);
    const double lr =
        cfg.learning_rate * (layer_lr_scale.empty() ? 1.0 : layer_lr_scale[l]);
    for (double g : grads.weight[l].data()) {
      require(std::isfinite(g), "sgd_step: non-finite weight gradient at layer ", l);
    }
    for (double g : grads.bias[l]) {
      require(std::isfinite(g), "sgd_step: non-finite bias gradient at layer ", l);
    }
    auto& vw = velocity.weight[l].data();
    auto& w = layer.weight.data();
    const auto& gw = grads.weight[l].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double g = gw[k] + cfg.weight_decay * w[k];
      vw[k] = cfg.momentum * vw[k] + g;
      w[k] -= lr * vw[k];
    }
    auto& vb = velocity.bias[l];
    auto& b = layer.bias;
    const auto& gb = grads.bias[l];
    for (std::size_t k = 0; k < b.size(); ++k) {
      const double g = gb[k] + cfg.weight_decay * b[k];
      vb[k] = cfg.momentum * vb[k] + g;
      b[k] -= lr * vb[k];
    }
  }
}

namespace {

// Length of the frozen prefix usable for activation caching; capped so the
// last layer is never part of the prefix (it has no rectifier).
std::size_t frozen_prefix(const MlpHead& head) {
  std::size_t p = 0;
  while (p < head.layer_count() && head.frozen(p)) ++p;
  return std::min(p, head.layer_count() - 1);
}

// Head made of layers [prefix, end) of `full`.
MlpHead suffix_head(const MlpHead& full, std::size_t prefix) {
  MlpHead sub;
  sub.init_seed = full.init_seed;
  sub.layers.assign(full.layers.begin() + static_cast<std::ptrdiff_t>(prefix), full.layers.end());
  sub.freeze_mask.assign(full.freeze_mask.begin() + static_cast<std::ptrdiff_t>(prefix),
                         full.freeze_mask.end());
  return sub;
}

// Activations of `features` through layers [0, prefix).
Matrix prefix_activations(const MlpHead& head, const Matrix& features, std::size_t prefix) {
  if (prefix == 0) return features;
  MlpHead front;
  front.layers.assign(head.layers.begin(), head.layers.begin() + static_cast<std::ptrdiff_t>(prefix));
  front.freeze_mask.assign(prefix, 0);
  ForwardCache cache = forward_cached(front, features);
  Matrix out = std::move(cache.activations.back());
  // forward_cached leaves the final layer linear; the prefix sits below a
  // rectifier in the full network, so apply it here.
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

bool notion_groups_ok(const GroupedDataset& data, Notion notion) {
  const auto counts = data.group_counts();
  switch (notion) {
    case Notion::None:
      return true;
    case Notion::EO:
    case Notion::AE:
      return counts[0] + counts[2] > 0 && counts[1] + counts[3] > 0;
    case Notion::MMF:
      return counts[0] > 0 && counts[1] > 0 && counts[2] > 0 && counts[3] > 0;
  }
  return true;
}

}  // namespace

TrainResult train(const MlpHead& head, const GroupedDataset& data, const ObjectiveConfig& obj,
                  const TrainConfig& cfg) {
  cfg.validate();
  obj.validate();
  require(data.size() > 0, "train: empty dataset");
  require(data.dim() == head.input_dim(), "train: data dim ", data.dim(),
          " does not match head input ", head.input_dim());

  TrainResult result;
  result.trace.reserve(cfg.epochs);

  // Train a suffix sub-head on cached prefix activations; frozen prefix
  // layers produce identical activations every epoch, so this is exact.
  const std::size_t prefix = frozen_prefix(head);
  GroupedDataset work;
  work.name = data.name;
  work.features = prefix_activations(head, data.features, prefix);
  work.labels = data.labels;
  work.attributes = data.attributes;

  MlpHead sub = suffix_head(head, prefix);
  Velocity velocity = Velocity::zeros_like(sub);

  const bool full_batch = cfg.batch.kind == BatchMode::Kind::Full;
  std::vector<std::size_t> order(work.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(cfg.seed);

  ObjectiveConfig ce_only = obj;
  ce_only.notion = Notion::None;
  ce_only.alpha = 0.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochStats stats;
    if (full_batch) {
      LossAndGrad lg = loss_and_grad(sub, work, obj);
      if (!std::isfinite(lg.loss.total)) fail("train: loss diverged at epoch ", epoch);
      sgd_step(sub, lg.grads, velocity, cfg);
      stats.loss = lg.loss;
    } else {
      shuffle_rng.shuffle(order);
      const std::size_t bs = cfg.batch.size;
      const std::size_t steps = (work.size() + bs - 1) / bs;
      LossBreakdown mean{};
      for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t lo = s * bs;
        const std::size_t hi = std::min(lo + bs, work.size());
        std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                     order.begin() + static_cast<std::ptrdiff_t>(hi));
        GroupedDataset batch = subset_rows(work, idx, work.name);
        const ObjectiveConfig& step_obj = notion_groups_ok(batch, obj.notion) ? obj : ce_only;
        if (&step_obj == &ce_only) stats.ce_only_steps++;
        LossAndGrad lg = loss_and_grad(sub, batch, step_obj);
        if (!std::isfinite(lg.loss.total)) fail("train: loss diverged at epoch ", epoch);
        sgd_step(sub, lg.grads, velocity, cfg);
        mean.total += lg.loss.total;
        mean.ce += lg.loss.ce;
        mean.penalty += lg.loss.penalty;
        mean.fpr_term += lg.loss.fpr_term;
        mean.fnr_term += lg.loss.fnr_term;
        for (int g = 0; g < 4; ++g) mean.per_group_ce[g] += lg.loss.per_group_ce[g];
      }
      const double inv = 1.0 / static_cast<double>(steps);
      mean.total *= inv;
      mean.ce *= inv;
      mean.penalty *= inv;
      mean.fpr_term *= inv;
      mean.fnr_term *= inv;
      for (int g = 0; g < 4; ++g) mean.per_group_ce[g] *= inv;
      mean.argmax_group = -1;
      stats.loss = mean;
    }
    result.trace.push_back(stats);
  }

  result.head = head;
  for (std::size_t l = prefix; l < head.layer_count(); ++l) {
    result.head.layers[l] = std::move(sub.layers[l - prefix]);
  }
  return result;
}

void SweepGrid::validate() const {
  require(!learning_rates.empty(), "sweep grid: learning_rates is empty");
  require(!epochs_options.empty(), "sweep grid: epochs_options is empty");
  require(!alphas.empty(), "sweep grid: alphas is empty");
  for (double lr : learning_rates) require(lr > 0.0, "sweep grid: learning rates must be positive");
  for (double a : alphas) require(a >= 0.0, "sweep grid: alphas must be >= 0");
}

SweepGrid parse_grid_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open grid file '", path, "'");
  SweepGrid grid;
  std::string line;
  std::size_t line_no = 0;
  auto parse_list = [&](const std::string& value, auto& out) {
    out.clear();
    std::istringstream items(value);
    std::string item;
    while (std::getline(items, item, ',')) {
      try {
        if constexpr (std::is_same_v<std::decay_t<decltype(out)>, std::vector<std::size_t>>) {
          out.push_back(std::stoull(item));
        } else {
          out.push_back(std::stod(item));
        }
      } catch (const std::exception&) {
        fail("grid file '", path, "' line ", line_no, ": cannot parse '", item, "'");
      }
    }
    require(!out.empty(), "grid file '", path, "' line ", line_no, ": empty list");
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const std::size_t eq = line.find('=');
    require(eq != std::string::npos, "grid file '", path, "' line ", line_no,
            ": expected key = value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "learning_rates") {
      parse_list(value, grid.learning_rates);
    } else if (key == "epochs") {
      parse_list(value, grid.epochs_options);
    } else if (key == "alphas") {
      parse_list(value, grid.alphas);
    } else {
      fail("grid file '", path, "' line ", line_no, ": unknown key '", key, "'");
    }
  }
  grid.validate();
  return grid;
}

SweepResult sweep(const SweepGrid& grid, bool use_alpha,
                  const std::function<double(const SweepPoint&)>& selection_score) {
  grid.validate();
  const std::vector<double> alphas = use_alpha ? grid.alphas : std::vector<double>{0.0};

  SweepResult result;
  bool have_best = false;
  std::size_t failures = 0;
  std::string first_error;
  for (double lr : grid.learning_rates) {
    for (std::size_t epochs : grid.epochs_options) {
      for (double alpha : alphas) {
        SweepOutcome outcome;
        outcome.point = {lr, epochs, alpha};
        try {
          outcome.selection_af = selection_score(outcome.point);
        } catch (const std::exception& e) {
          outcome.failed = true;
          outcome.error = e.what();
          if (failures++ == 0) first_error = e.what();
          result.outcomes.push_back(std::move(outcome));
          continue;
        }
        const auto better = [&]() {
          if (!have_best) return true;
          if (outcome.selection_af != result.best_af) {
            return outcome.selection_af > result.best_af;
          }
          const auto key = [](const SweepPoint& p) {
            return std::tuple(p.epochs, p.lr, p.alpha);
          };
          return key(outcome.point) < key(result.best);
        };
        if (better()) {
          result.best = outcome.point;
          result.best_af = outcome.selection_af;
          have_best = true;
        }
        result.outcomes.push_back(std::move(outcome));
      }
    }
  }
  require(have_best, "sweep: all ", failures, " runs failed; first error: ", first_error);
  return result;
}

}  // namespace fdr
