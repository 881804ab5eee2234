#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fdr/dataset.hpp"
#include "fdr/metrics.hpp"
#include "fdr/model.hpp"
#include "fdr/surgical.hpp"
#include "fdr/trainer.hpp"

namespace fdr {

enum class Method { FullFtReg, LastFt, LastFtRw, LastFtReg, Fdr };

/// What a compared method does: fine-tune on balanced or imbalanced data,
/// with or without the fairness penalty, last layer only or the full
/// network from scratch.
struct MethodRecipe {
  Method method;
  const char* name;       // table/display name
  const char* cli_name;   // lowercase id used in CLIs and file outputs
  bool uses_balanced_data;
  bool uses_fairness_constraint;
  bool trains_full_network;
};

const MethodRecipe& recipe_for(Method method);
Method method_from_string(const std::string& name);
const std::vector<Method>& all_methods();

struct HyperParams {
  double lr = 1e-3;
  std::size_t epochs = 1000;
  double alpha = 0.0;
};

struct TraceSummary {
  double first = 0.0;
  double last = 0.0;
  double min = 0.0;
};

struct LossTraceSummary {
  TraceSummary total, ce, penalty;
  std::size_t epochs = 0;
  std::size_t ce_only_steps = 0;
};

LossTraceSummary summarize_trace(const std::vector<EpochStats>& trace);

/// One training run of one method: configuration plus train/test metrics.
struct RunRecord {
  std::string method;
  Notion notion = Notion::None;
  std::uint64_t seed = 0;
  HyperParams hp;
  std::string phase = "final";  // "final" or "sweep"
  std::string surgical;         // block name when surgical mode was used
  MetricsReport train;
  MetricsReport test;
  double wall_ms = 0.0;
  LossTraceSummary trace;
  std::vector<double> rgn_multipliers;  // final-epoch values, auto-rgn runs
};

/// train/val/test plus the half of val held out for hyperparameter
/// selection (fine-tuning never sees val_sel).
struct DataBundle {
  GroupedDataset train;
  GroupedDataset val_ft;
  GroupedDataset val_sel;
  GroupedDataset test;
};

DataBundle make_bundle(const GroupedDataset& full, std::uint64_t seed);

MetricsReport evaluate_head(const MlpHead& head, const GroupedDataset& ds, Notion notion);

/// Standard ERM (plain cross-entropy) training of the full network on the
/// given, possibly imbalanced, data; the trained prefix serves as the
/// frozen representation for the fine-tuning methods.
MlpHead pretrain_backbone(const GroupedDataset& data, const HeadDims& dims,
                          const TrainConfig& cfg);

struct RunSetup {
  const GroupedDataset* train = nullptr;     // balanced-pool source; FullFT training data
  const GroupedDataset* finetune = nullptr;  // imbalanced fine-tuning split
  const GroupedDataset* test = nullptr;      // evaluation split
  const MlpHead* backbone = nullptr;         // unused by FullFT-Reg
  HeadDims full_dims;                        // architecture for FullFT-Reg
};

/// Executes one recipe end to end: builds the fine-tuning dataset, resets
/// and freezes layers as the recipe demands, trains, and evaluates train
/// and test metrics under the given notion.
RunRecord run_method(const MethodRecipe& recipe, const RunSetup& setup, Notion notion,
                     const HyperParams& hp, std::uint64_t seed,
                     const std::optional<SurgicalMode>& surgical = std::nullopt);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct ReportStats {
  MeanStd wacc, auc, eo_diff, ae_diff, wa, af, plain_acc;

  MeanStd fairness(Notion notion) const;
};

struct BenchCell {
  Method method;
  Notion notion;
  HyperParams chosen;
  ReportStats train;
  ReportStats test;
  std::vector<RunRecord> runs;         // final runs, one per seed
  std::vector<RunRecord> sweep_runs;   // grid evaluations (empty for FullFT-Reg)
};

struct BenchConfig {
  SyntheticSpec data_spec;
  std::optional<SyntheticSpec> transfer_spec;    // fine-tune/eval on this when set
  std::optional<std::string> data_path;          // load instead of generating
  std::optional<std::string> transfer_path;
  FileFormat data_format = FileFormat::Csv;
  std::vector<Notion> notions = {Notion::EO, Notion::AE, Notion::MMF};
  std::vector<Method> methods = all_methods();
  std::size_t seeds = 20;
  SweepGrid grid;
  std::uint64_t base_seed = 0;
  int threads = 1;
  std::vector<std::size_t> hidden = {32, 16};
  double pretrain_lr = 3e-3;
  std::size_t pretrain_epochs = 300;
  // FullFT-Reg is not part of the per-method grid search; it runs with this
  // documented fixed budget (override via flags).
  double fullft_lr = 3e-3;
  std::size_t fullft_epochs = 400;
  double fullft_alpha = 10.0;
  std::string out_dir;  // empty: compute only, write nothing
};

struct BenchResult {
  std::vector<BenchCell> cells;
  MetricsReport backbone_train;  // pretrained network on its training split
  MetricsReport backbone_test;   // pretrained network on the evaluation test split
  std::vector<std::string> files_written;

  const BenchCell& cell(Method method, Notion notion) const;
};

/// Full protocol: generate/load data, pretrain once, per (notion, method)
/// select hyperparameters on val_sel and re-run the winner across all
/// seeds, then write CSV/JSONL tables. Byte-identical outputs for
/// identical configurations.
BenchResult bench(const BenchConfig& cfg);

std::string metrics_to_json(const MetricsReport& report);
std::string runrecord_to_json(const RunRecord& record);
std::string rgn_report_to_json(const RgnReport& report);

}  // namespace fdr
