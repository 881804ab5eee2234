// Command-line front end: dataset generation, pretraining, fairness
// fine-tuning, evaluation, hyperparameter sweeps and the benchmark harness.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fdr/dataset.hpp"
#include "fdr/error.hpp"
#include "fdr/harness.hpp"
#include "fdr/metrics.hpp"
#include "fdr/model.hpp"
#include "fdr/objectives.hpp"
#include "fdr/rng.hpp"
#include "fdr/surgical.hpp"
#include "fdr/trainer.hpp"

namespace {

using nlohmann::json;

fdr::FileFormat resolve_format(const std::string& format, const std::string& path) {
  if (format == "csv") return fdr::FileFormat::Csv;
  if (format == "binary") return fdr::FileFormat::Binary;
  if (format == "auto") {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return fdr::FileFormat::Csv;
    return fdr::FileFormat::Binary;
  }
  fdr::fail("unknown format '", format, "' (expected csv, binary or auto)");
}

fdr::GroupedDataset load(const std::string& path, const std::string& format) {
  return fdr::load_dataset(path, resolve_format(format, path));
}

void add_synthetic_flags(CLI::App* cmd, fdr::SyntheticSpec& spec, const std::string& prefix = "") {
  const std::string p = "--" + prefix;
  cmd->add_option(p + "n", spec.n_total, "Total number of rows");
  cmd->add_option(p + "d-core", spec.d_core, "Label-informative dimensions");
  cmd->add_option(p + "d-spurious", spec.d_spurious, "Attribute-correlated dimensions");
  cmd->add_option(p + "d-noise", spec.d_noise, "Pure-noise dimensions");
  cmd->add_option(p + "minority-fraction", spec.minority_fraction,
                  "Share of rows in the (y=1,a=1) group, in (0, 0.25]");
  cmd->add_option(p + "core-separation", spec.core_separation,
                  "Gap between class-conditional core means, in stddev units");
  cmd->add_option(p + "spurious-correlation", spec.spurious_correlation,
                  "Probability the spurious block aligns with the attribute");
}

// Flags given on the command line win over values read from --spec.
fdr::SyntheticSpec merge_spec_file(const CLI::App* cmd, const std::string& spec_path,
                                   const fdr::SyntheticSpec& from_flags,
                                   const std::string& prefix = "") {
  fdr::SyntheticSpec spec = fdr::parse_spec_file(spec_path);
  auto given = [cmd, &prefix](const std::string& name) {
    return cmd->get_option("--" + prefix + name)->count() > 0;
  };
  if (given("n")) spec.n_total = from_flags.n_total;
  if (given("d-core")) spec.d_core = from_flags.d_core;
  if (given("d-spurious")) spec.d_spurious = from_flags.d_spurious;
  if (given("d-noise")) spec.d_noise = from_flags.d_noise;
  if (given("minority-fraction")) spec.minority_fraction = from_flags.minority_fraction;
  if (given("core-separation")) spec.core_separation = from_flags.core_separation;
  if (given("spurious-correlation")) spec.spurious_correlation = from_flags.spurious_correlation;
  return spec;
}

json metrics_as_json(const fdr::MetricsReport& report) {
  return json::parse(fdr::metrics_to_json(report));
}

struct FinetuneArgs {
  std::string model_path;
  std::string method = "fdr";
  std::string notion = "none";
  double alpha = 0.0;
  std::string data_path;
  std::string val_path;
  std::string format = "auto";
  std::string out_path;
  std::string surgical;
  std::string report_path;
  std::vector<std::size_t> hidden;
  double lr = 1e-3;
  std::size_t epochs = 1000;
  std::uint64_t seed = 0;
};

int run_finetune(const FinetuneArgs& args) {
  const fdr::Method method = fdr::method_from_string(args.method);
  const fdr::MethodRecipe& recipe = fdr::recipe_for(method);
  const fdr::Notion notion = fdr::notion_from_string(args.notion);

  const fdr::GroupedDataset train = load(args.data_path, args.format);
  fdr::GroupedDataset val;
  if (!args.val_path.empty()) val = load(args.val_path, args.format);

  // Assemble the fine-tuning dataset the way the recipe demands.
  fdr::GroupedDataset balanced;
  const fdr::GroupedDataset* finetune_data = nullptr;
  if (recipe.trains_full_network) {
    finetune_data = &train;
  } else if (recipe.uses_balanced_data) {
    fdr::require(!args.val_path.empty(), recipe.name, ": --val is required (balanced pool)");
    balanced = fdr::balanced_subsample(train, val, std::nullopt,
                                       fdr::mix_seed(args.seed, fdr::kTagBalance));
    finetune_data = &balanced;
  } else {
    fdr::require(!args.val_path.empty(), recipe.name, ": --val is required (fine-tuning split)");
    finetune_data = &val;
  }

  fdr::ObjectiveConfig obj;
  if (recipe.uses_fairness_constraint) {
    fdr::require(notion != fdr::Notion::None, recipe.name, ": a fairness notion is required");
    obj.notion = notion;
    if (notion == fdr::Notion::MMF) {
      fdr::require(args.alpha == 0.0, recipe.name, ": alpha is not a Max-Min Fairness parameter");
    } else {
      obj.alpha = args.alpha;
      obj.group_weights = recipe.uses_balanced_data ? fdr::group_weights(*finetune_data)
                                                    : fdr::class_weights(*finetune_data);
    }
  } else {
    fdr::require(args.alpha == 0.0, recipe.name, ": alpha has no effect without a constraint");
  }

  fdr::TrainConfig cfg;
  cfg.learning_rate = args.lr;
  cfg.epochs = args.epochs;
  cfg.seed = args.seed;

  json summary;
  summary["method"] = recipe.cli_name;
  summary["notion"] = fdr::to_string(notion);

  fdr::MlpHead trained;
  std::vector<fdr::EpochStats> trace;
  if (recipe.trains_full_network) {
    fdr::require(!args.hidden.empty() || !args.model_path.empty(),
                 "fullft-reg: pass --hidden widths (or --model to copy an architecture)");
    fdr::HeadDims dims;
    dims.input = train.dim();
    dims.hidden = args.model_path.empty() ? args.hidden : fdr::load_head(args.model_path).dims().hidden;
    fdr::MlpHead head = fdr::init_head(dims, fdr::mix_seed(args.seed, fdr::kTagInit));
    auto result = fdr::train(head, *finetune_data, obj, cfg);
    trained = std::move(result.head);
    trace = std::move(result.trace);
  } else {
    fdr::require(!args.model_path.empty(), recipe.name, ": --model is required");
    fdr::MlpHead head = fdr::load_head(args.model_path);
    if (!args.surgical.empty()) {
      const fdr::SurgicalMode mode = fdr::SurgicalMode::parse(args.surgical, head.layer_count());
      auto result = fdr::surgical_train(head, mode, *finetune_data, obj, cfg);
      trained = std::move(result.head);
      trace = std::move(result.trace);
      summary["surgical"] = mode.name(trained.layer_count());
      if (!result.rgn_trace.empty()) {
        summary["rgn"] = json::parse(fdr::rgn_report_to_json(result.rgn_trace.back()));
      }
    } else {
      const std::size_t last = head.layer_count() - 1;
      fdr::reinit_layer(head, last, fdr::mix_seed(args.seed, fdr::kTagInit));
      std::vector<std::uint8_t> mask(head.layer_count(), 1);
      mask[last] = 0;
      fdr::set_freeze_mask(head, std::move(mask));
      auto result = fdr::train(head, *finetune_data, obj, cfg);
      trained = std::move(result.head);
      trace = std::move(result.trace);
    }
  }

  fdr::save_head(trained, args.out_path);
  summary["model"] = args.out_path;
  summary["train"] = metrics_as_json(fdr::evaluate_head(trained, *finetune_data, notion));
  const fdr::LossTraceSummary ts = fdr::summarize_trace(trace);
  summary["trace"] = {{"total_first", ts.total.first},
                      {"total_last", ts.total.last},
                      {"penalty_first", ts.penalty.first},
                      {"penalty_last", ts.penalty.last},
                      {"epochs", ts.epochs}};
  std::cout << summary.dump(2) << "\n";
  if (!args.report_path.empty()) {
    std::ofstream out(args.report_path);
    out << summary.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-aware last-layer fine-tuning toolkit"};
  app.require_subcommand(1);

  // --- gen -----------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "Generate a synthetic grouped dataset");
  fdr::SyntheticSpec gen_spec;
  std::string gen_out, gen_format = "csv", gen_spec_file;
  std::uint64_t gen_seed = 0;
  add_synthetic_flags(gen, gen_spec);
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output path")->required();
  gen->add_option("--format", gen_format, "csv or binary")->check(CLI::IsMember({"csv", "binary"}));
  gen->add_option("--spec", gen_spec_file, "Key-value spec file (explicit flags win)");

  // --- pretrain --------------------------------------------------------------
  auto* pre = app.add_subcommand("pretrain", "Train a full network with plain ERM");
  std::string pre_data, pre_format = "auto", pre_out;
  std::vector<std::size_t> pre_hidden = {32, 16};
  double pre_lr = 3e-3;
  std::size_t pre_epochs = 300;
  std::uint64_t pre_seed = 0;
  pre->add_option("--data", pre_data, "Training dataset")->required();
  pre->add_option("--format", pre_format, "csv, binary or auto");
  pre->add_option("--dims,--hidden", pre_hidden, "Hidden layer widths")->delimiter(',');
  pre->add_option("--epochs", pre_epochs, "Full-batch epochs");
  pre->add_option("--lr", pre_lr, "Learning rate");
  pre->add_option("--seed", pre_seed, "Init seed");
  pre->add_option("--out", pre_out, "Model output path")->required();

  // --- finetune ----------------------------------------------------------------
  auto* fine = app.add_subcommand("finetune", "Fine-tune with a method recipe");
  FinetuneArgs fine_args;
  fine->add_option("--model", fine_args.model_path, "Pretrained model path");
  fine->add_option("--method", fine_args.method, "fullft-reg, lastft, lastft-rw, lastft-reg or fdr")
      ->required();
  fine->add_option("--notion", fine_args.notion, "eo, ae, mmf or none");
  fine->add_option("--alpha", fine_args.alpha, "Penalty weight for eo/ae");
  fine->add_option("--data", fine_args.data_path, "Training split")->required();
  fine->add_option("--val", fine_args.val_path, "Validation split");
  fine->add_option("--format", fine_args.format, "csv, binary or auto");
  fine->add_option("--out", fine_args.out_path, "Model output path")->required();
  fine->add_option("--surgical", fine_args.surgical, "input, hiddenK, last or auto-rgn");
  fine->add_option("--report", fine_args.report_path, "Also write the JSON summary here");
  fine->add_option("--hidden", fine_args.hidden, "Hidden widths (fullft-reg)")->delimiter(',');
  fine->add_option("--lr", fine_args.lr, "Learning rate");
  fine->add_option("--epochs", fine_args.epochs, "Full-batch epochs");
  fine->add_option("--seed", fine_args.seed, "Run seed");

  // --- eval ------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a dataset");
  std::string eval_model, eval_data, eval_format = "auto", eval_notion = "none", eval_out;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--model", eval_model, "Model path")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset path")->required();
  eval_cmd->add_option("--format", eval_format, "csv, binary or auto");
  eval_cmd->add_option("--notion", eval_notion, "Notion the AF score uses");
  eval_cmd->add_option("--out", eval_out, "Report path (stdout when omitted)");
  eval_cmd->add_option("--seed", eval_seed, "Unused; accepted for uniformity");

  // --- rgn -------------------------------------------------------------------
  auto* rgn_cmd = app.add_subcommand("rgn", "Per-layer relative gradient norms");
  std::string rgn_model, rgn_data, rgn_format = "auto", rgn_notion = "none";
  double rgn_alpha = 0.0;
  std::uint64_t rgn_seed = 0;
  rgn_cmd->add_option("--model", rgn_model, "Model path")->required();
  rgn_cmd->add_option("--data", rgn_data, "Dataset path")->required();
  rgn_cmd->add_option("--format", rgn_format, "csv, binary or auto");
  rgn_cmd->add_option("--notion", rgn_notion, "Objective notion");
  rgn_cmd->add_option("--alpha", rgn_alpha, "Penalty weight for eo/ae");
  rgn_cmd->add_option("--seed", rgn_seed, "Unused; accepted for uniformity");

  // --- sweep -----------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid search selected by the AF score");
  std::string sw_model, sw_method = "fdr", sw_notion = "eo", sw_data, sw_val, sw_sel,
              sw_format = "auto", sw_out;
  fdr::SweepGrid sw_grid;
  std::uint64_t sw_seed = 0;
  sweep_cmd->add_option("--model", sw_model, "Pretrained model (last-layer methods)");
  sweep_cmd->add_option("--method", sw_method, "Method recipe");
  sweep_cmd->add_option("--notion", sw_notion, "eo, ae or mmf");
  sweep_cmd->add_option("--data", sw_data, "Training split")->required();
  sweep_cmd->add_option("--val", sw_val, "Validation split")->required();
  sweep_cmd->add_option("--sel", sw_sel, "Selection split (carved from --val when omitted)");
  sweep_cmd->add_option("--format", sw_format, "csv, binary or auto");
  std::string sw_grid_file;
  sweep_cmd->add_option("--lrs", sw_grid.learning_rates, "Learning rates")->delimiter(',');
  sweep_cmd->add_option("--epochs-list", sw_grid.epochs_options, "Epoch counts")->delimiter(',');
  sweep_cmd->add_option("--alphas", sw_grid.alphas, "Penalty weights")->delimiter(',');
  sweep_cmd->add_option("--grid", sw_grid_file,
                        "Key-value grid file (learning_rates/epochs/alphas; explicit flags win)");
  sweep_cmd->add_option("--seed", sw_seed, "Sweep seed");
  sweep_cmd->add_option("--out", sw_out, "Result JSON path (stdout when omitted)");

  // --- bench -------------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "Method-comparison benchmark");
  fdr::BenchConfig bench_cfg;
  fdr::SyntheticSpec target_spec;
  std::vector<std::string> bench_notions = {"eo", "ae", "mmf"};
  std::vector<std::string> bench_recipes = {"fullft-reg", "lastft", "lastft-rw", "lastft-reg",
                                            "fdr"};
  std::string bench_data, bench_target_data, bench_format = "auto";
  bool bench_transfer = false;
  std::uint64_t bench_data_seed = 0, bench_target_seed = 1;
  add_synthetic_flags(bench_cmd, bench_cfg.data_spec);
  add_synthetic_flags(bench_cmd, target_spec, "target-");
  bench_cmd->add_flag("--transfer", bench_transfer,
                      "Pretrain on the source spec, fine-tune/evaluate on the target spec");
  bench_cmd->add_option("--data", bench_data, "Load this dataset instead of generating");
  bench_cmd->add_option("--target-data", bench_target_data, "Transfer target dataset file");
  bench_cmd->add_option("--format", bench_format, "csv, binary or auto");
  bench_cmd->add_option("--data-seed", bench_data_seed, "Synthetic generator seed");
  bench_cmd->add_option("--target-data-seed", bench_target_seed, "Target generator seed");
  bench_cmd->add_option("--notions", bench_notions, "Fairness notions")->delimiter(',');
  bench_cmd->add_option("--recipes", bench_recipes, "Methods to compare")->delimiter(',');
  bench_cmd->add_option("--seeds", bench_cfg.seeds, "Trials per cell");
  bench_cmd->add_option("--seed", bench_cfg.base_seed, "Base seed for all run streams");
  bench_cmd->add_option("--threads", bench_cfg.threads, "Concurrent runs");
  bench_cmd->add_option("--hidden", bench_cfg.hidden, "Backbone hidden widths")->delimiter(',');
  bench_cmd->add_option("--pretrain-epochs", bench_cfg.pretrain_epochs, "Backbone ERM epochs");
  bench_cmd->add_option("--pretrain-lr", bench_cfg.pretrain_lr, "Backbone ERM learning rate");
  bench_cmd->add_option("--fullft-epochs", bench_cfg.fullft_epochs, "FullFT-Reg epochs");
  bench_cmd->add_option("--fullft-lr", bench_cfg.fullft_lr, "FullFT-Reg learning rate");
  bench_cmd->add_option("--fullft-alpha", bench_cfg.fullft_alpha, "FullFT-Reg penalty weight");
  bench_cmd->add_option("--lrs", bench_cfg.grid.learning_rates, "Sweep learning rates")
      ->delimiter(',');
  bench_cmd->add_option("--epochs-list", bench_cfg.grid.epochs_options, "Sweep epoch counts")
      ->delimiter(',');
  bench_cmd->add_option("--alphas", bench_cfg.grid.alphas, "Sweep penalty weights")->delimiter(',');
  bench_cmd->add_option("--out", bench_cfg.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::ostringstream silenced;
    app.exit(e, silenced, silenced);
    std::cerr << json{{"error", {{"type", "usage"}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }

  try {
    if (gen->parsed()) {
      if (!gen_spec_file.empty()) gen_spec = merge_spec_file(gen, gen_spec_file, gen_spec);
      if (gen->get_option("--seed")->count() > 0 || gen_spec_file.empty()) gen_spec.seed = gen_seed;
      const fdr::GroupedDataset ds = fdr::gen_synthetic(gen_spec);
      fdr::save_dataset(ds, gen_out,
                        gen_format == "csv" ? fdr::FileFormat::Csv : fdr::FileFormat::Binary);
      const auto counts = ds.group_counts();
      std::cout << json{{"out", gen_out},
                        {"n", ds.size()},
                        {"d", ds.dim()},
                        {"group_counts", counts}}
                       .dump()
                << "\n";
    } else if (pre->parsed()) {
      const fdr::GroupedDataset data = load(pre_data, pre_format);
      fdr::TrainConfig cfg;
      cfg.learning_rate = pre_lr;
      cfg.epochs = pre_epochs;
      cfg.seed = pre_seed;
      fdr::HeadDims dims;
      dims.input = data.dim();
      dims.hidden = pre_hidden;
      const fdr::MlpHead head = fdr::pretrain_backbone(data, dims, cfg);
      fdr::save_head(head, pre_out);
      std::cout << json{{"out", pre_out},
                        {"train", metrics_as_json(fdr::evaluate_head(head, data, fdr::Notion::None))}}
                       .dump(2)
                << "\n";
    } else if (fine->parsed()) {
      return run_finetune(fine_args);
    } else if (eval_cmd->parsed()) {
      const fdr::MlpHead head = fdr::load_head(eval_model);
      const fdr::GroupedDataset data = load(eval_data, eval_format);
      const fdr::MetricsReport report =
          fdr::evaluate_head(head, data, fdr::notion_from_string(eval_notion));
      const std::string text = metrics_as_json(report).dump(2) + "\n";
      if (eval_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(eval_out);
        fdr::require(out.good(), "cannot open '", eval_out, "' for writing");
        out << text;
        std::cout << json{{"out", eval_out}}.dump() << "\n";
      }
    } else if (rgn_cmd->parsed()) {
      const fdr::MlpHead head = fdr::load_head(rgn_model);
      const fdr::GroupedDataset data = load(rgn_data, rgn_format);
      fdr::ObjectiveConfig obj;
      obj.notion = fdr::notion_from_string(rgn_notion);
      if (obj.notion == fdr::Notion::EO || obj.notion == fdr::Notion::AE) {
        obj.alpha = rgn_alpha;
        obj.group_weights = fdr::group_weights(data);
      }
      std::cout << fdr::rgn_report_to_json(fdr::rgn_scores(head, data, obj)) << "\n";
    } else if (sweep_cmd->parsed()) {
      if (!sw_grid_file.empty()) {
        fdr::SweepGrid from_file = fdr::parse_grid_file(sw_grid_file);
        if (sweep_cmd->get_option("--lrs")->count() == 0) {
          sw_grid.learning_rates = from_file.learning_rates;
        }
        if (sweep_cmd->get_option("--epochs-list")->count() == 0) {
          sw_grid.epochs_options = from_file.epochs_options;
        }
        if (sweep_cmd->get_option("--alphas")->count() == 0) sw_grid.alphas = from_file.alphas;
      }
      const fdr::Method method = fdr::method_from_string(sw_method);
      const fdr::MethodRecipe& recipe = fdr::recipe_for(method);
      const fdr::Notion notion = fdr::notion_from_string(sw_notion);
      const fdr::GroupedDataset train_ds = load(sw_data, sw_format);
      const fdr::GroupedDataset val_ds = load(sw_val, sw_format);
      fdr::GroupedDataset sel_ds;
      fdr::GroupedDataset val_ft;
      const fdr::GroupedDataset* val_ptr = &val_ds;
      const fdr::GroupedDataset* sel_ptr = nullptr;
      if (sw_sel.empty()) {
        auto parts = fdr::split_dataset(val_ds, {0.5, 0.25, 0.25}, fdr::mix_seed(sw_seed, 1), true);
        val_ft = std::move(parts[0]);
        sel_ds = fdr::concat_rows(parts[1], parts[2], val_ds.name + "/sel");
        val_ptr = &val_ft;
        sel_ptr = &sel_ds;
      } else {
        sel_ds = load(sw_sel, sw_format);
        sel_ptr = &sel_ds;
      }
      fdr::MlpHead backbone;
      fdr::RunSetup setup;
      setup.train = &train_ds;
      setup.finetune = val_ptr;
      setup.test = sel_ptr;
      setup.full_dims.input = train_ds.dim();
      if (!sw_model.empty()) {
        backbone = fdr::load_head(sw_model);
        setup.backbone = &backbone;
        setup.full_dims = backbone.dims();
      }
      const bool use_alpha = recipe.uses_fairness_constraint &&
                             (notion == fdr::Notion::EO || notion == fdr::Notion::AE);
      const fdr::SweepResult result =
          fdr::sweep(sw_grid, use_alpha, [&](const fdr::SweepPoint& p) {
            const fdr::RunRecord record = fdr::run_method(
                recipe, setup, notion, {p.lr, p.epochs, p.alpha}, fdr::mix_seed(sw_seed, fdr::kTagSweep));
            return record.test.af;
          });
      json outcomes = json::array();
      for (const auto& o : result.outcomes) {
        outcomes.push_back({{"lr", o.point.lr},
                            {"epochs", o.point.epochs},
                            {"alpha", o.point.alpha},
                            {"af", o.selection_af},
                            {"failed", o.failed}});
      }
      const json out = {{"best",
                         {{"lr", result.best.lr},
                          {"epochs", result.best.epochs},
                          {"alpha", result.best.alpha},
                          {"af", result.best_af}}},
                        {"outcomes", outcomes}};
      if (sw_out.empty()) {
        std::cout << out.dump(2) << "\n";
      } else {
        std::ofstream file(sw_out);
        fdr::require(file.good(), "cannot open '", sw_out, "' for writing");
        file << out.dump(2) << "\n";
        std::cout << json{{"out", sw_out}}.dump() << "\n";
      }
    } else if (bench_cmd->parsed()) {
      bench_cfg.data_spec.seed = bench_data_seed;
      bench_cfg.notions.clear();
      for (const auto& name : bench_notions) bench_cfg.notions.push_back(fdr::notion_from_string(name));
      bench_cfg.methods.clear();
      for (const auto& name : bench_recipes) bench_cfg.methods.push_back(fdr::method_from_string(name));
      if (!bench_data.empty()) {
        bench_cfg.data_path = bench_data;
        bench_cfg.data_format = resolve_format(bench_format, bench_data);
      }
      if (bench_transfer) {
        target_spec.seed = bench_target_seed;
        bench_cfg.transfer_spec = target_spec;
      }
      if (!bench_target_data.empty()) {
        bench_cfg.transfer_path = bench_target_data;
        bench_cfg.data_format = resolve_format(bench_format, bench_target_data);
      }
      const fdr::BenchResult result = fdr::bench(bench_cfg);
      json files = json::array();
      for (const auto& f : result.files_written) files.push_back(f);
      std::cout << json{{"cells", result.cells.size()}, {"files", files}}.dump(2) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"type", "runtime"}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
  return 0;
}
