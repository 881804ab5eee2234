#include "fdr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "fdr/error.hpp"
#include "fdr/rng.hpp"

namespace fdr {

namespace {

const std::vector<MethodRecipe> kRecipes = {
    {Method::FullFtReg, "FullFT-Reg", "fullft-reg", false, true, true},
    {Method::LastFt, "LastFT", "lastft", false, false, false},
    {Method::LastFtRw, "LastFT-RW", "lastft-rw", true, false, false},
    {Method::LastFtReg, "LastFT-Reg", "lastft-reg", false, true, false},
    {Method::Fdr, "FDR", "fdr", true, true, false},
};

}  // namespace

const MethodRecipe& recipe_for(Method method) {
  for (const auto& recipe : kRecipes) {
    if (recipe.method == method) return recipe;
  }
  fail("unknown method id");
}

Method method_from_string(const std::string& name) {
  for (const auto& recipe : kRecipes) {
    if (name == recipe.cli_name || name == recipe.name) return recipe.method;
  }
  fail("unknown method '", name, "' (expected fullft-reg, lastft, lastft-rw, lastft-reg or fdr)");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = {Method::FullFtReg, Method::LastFt, Method::LastFtRw,
                                              Method::LastFtReg, Method::Fdr};
  return methods;
}

LossTraceSummary summarize_trace(const std::vector<EpochStats>& trace) {
  LossTraceSummary s;
  s.epochs = trace.size();
  if (trace.empty()) return s;
  auto fill = [&trace](TraceSummary& out, auto pick) {
    out.first = pick(trace.front().loss);
    out.last = pick(trace.back().loss);
    out.min = out.first;
    for (const auto& e : trace) out.min = std::min(out.min, pick(e.loss));
  };
  fill(s.total, [](const LossBreakdown& l) { return l.total; });
  fill(s.ce, [](const LossBreakdown& l) { return l.ce; });
  fill(s.penalty, [](const LossBreakdown& l) { return l.penalty; });
  for (const auto& e : trace) s.ce_only_steps += e.ce_only_steps;
  return s;
}

MetricsReport evaluate_head(const MlpHead& head, const GroupedDataset& ds, Notion notion) {
  const PredictionBatch pred = forward(head, ds.features);
  return compute_metrics(pred.hard, pred.positive_scores(), ds.labels, ds.attributes, notion);
}

namespace {

// Two-way stratified split of `ds` (floor to the first part).
std::pair<GroupedDataset, GroupedDataset> stratified_half_split(const GroupedDataset& ds,
                                                                std::uint64_t seed,
                                                                const char* left_name,
                                                                const char* right_name) {
  std::array<std::vector<std::size_t>, 4> pools;
  for (std::size_t i = 0; i < ds.size(); ++i) pools[ds.group_of(i)].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> left, right;
  for (auto& pool : pools) {
    require(pool.size() >= 2, "selection split: a (y,a) group has fewer than 2 validation rows");
    rng.shuffle(pool);
    const std::size_t half = pool.size() / 2;
    left.insert(left.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(half));
    right.insert(right.end(), pool.begin() + static_cast<std::ptrdiff_t>(half), pool.end());
  }
  std::sort(left.begin(), left.end());
  std::sort(right.begin(), right.end());
  return {subset_rows(ds, left, ds.name + "/" + left_name),
          subset_rows(ds, right, ds.name + "/" + right_name)};
}

}  // namespace

DataBundle make_bundle(const GroupedDataset& full, std::uint64_t seed) {
  auto splits = split_dataset(full, SplitFractions{0.6, 0.2, 0.2}, mix_seed(seed, kTagSplit),
                              /*stratified=*/true);
  DataBundle bundle;
  bundle.train = std::move(splits[0]);
  bundle.test = std::move(splits[2]);
  auto halves = stratified_half_split(splits[1], mix_seed(seed, kTagSplit, 1), "ft", "sel");
  bundle.val_ft = std::move(halves.first);
  bundle.val_sel = std::move(halves.second);
  return bundle;
}

MlpHead pretrain_backbone(const GroupedDataset& data, const HeadDims& dims,
                          const TrainConfig& cfg) {
  require(data.size() > 0, "pretrain: empty dataset");
  MlpHead head = init_head(dims, mix_seed(cfg.seed, kTagInit));
  ObjectiveConfig obj;  // plain ERM: no notion, unit weights
  return train(head, data, obj, cfg).head;
}

namespace {

ObjectiveConfig objective_for(const MethodRecipe& recipe, Notion notion, const HyperParams& hp,
                              const GroupedDataset& finetune_data) {
  ObjectiveConfig obj;
  if (!recipe.uses_fairness_constraint) {
    require(hp.alpha == 0.0, recipe.name, ": alpha has no effect without a fairness constraint");
    return obj;
  }
  require(notion != Notion::None, recipe.name, ": a fairness notion is required");
  obj.notion = notion;
  if (notion == Notion::MMF) {
    require(hp.alpha == 0.0, recipe.name, ": alpha is not a Max-Min Fairness parameter");
  } else {
    obj.alpha = hp.alpha;
    // Weighted CE: balanced fine-tuning sets carry exact group weights (all
    // ones); on imbalanced data the weights are class-inverse, i.e. blind
    // to the sensitive attribute.
    obj.group_weights = recipe.uses_balanced_data ? group_weights(finetune_data)
                                                  : class_weights(finetune_data);
  }
  return obj;
}

}  // namespace

RunRecord run_method(const MethodRecipe& recipe, const RunSetup& setup, Notion notion,
                     const HyperParams& hp, std::uint64_t seed,
                     const std::optional<SurgicalMode>& surgical) {
  require(setup.train && setup.finetune && setup.test, "run_method: run setup is incomplete");
  const auto t0 = std::chrono::steady_clock::now();

  GroupedDataset balanced;
  const GroupedDataset* finetune_data = nullptr;
  if (recipe.trains_full_network) {
    finetune_data = setup.train;
  } else if (recipe.uses_balanced_data) {
    balanced = balanced_subsample(*setup.train, *setup.finetune, std::nullopt,
                                  mix_seed(seed, kTagBalance));
    finetune_data = &balanced;
  } else {
    finetune_data = setup.finetune;
  }

  const ObjectiveConfig obj = objective_for(recipe, notion, hp, *finetune_data);

  TrainConfig tcfg;
  tcfg.learning_rate = hp.lr;
  tcfg.epochs = hp.epochs;
  tcfg.seed = seed;

  RunRecord record;
  record.method = recipe.cli_name;
  record.notion = notion;
  record.seed = seed;
  record.hp = hp;

  MlpHead trained;
  if (recipe.trains_full_network) {
    require(!surgical.has_value(), "run_method: surgical mode needs a pre-trained network");
    MlpHead head = init_head(setup.full_dims, mix_seed(seed, kTagInit));
    TrainResult result = train(head, *finetune_data, obj, tcfg);
    trained = std::move(result.head);
    record.trace = summarize_trace(result.trace);
  } else {
    require(setup.backbone != nullptr, recipe.name, ": a pre-trained network is required");
    MlpHead head = *setup.backbone;
    if (surgical.has_value()) {
      // Surgical runs fine-tune the chosen pre-trained block in place.
      record.surgical = surgical->name(head.layer_count());
      SurgicalResult result = surgical_train(head, *surgical, *finetune_data, obj, tcfg);
      trained = std::move(result.head);
      record.trace = summarize_trace(result.trace);
      if (!result.rgn_trace.empty()) {
        for (const auto& layer : result.rgn_trace.back().layers) {
          record.rgn_multipliers.push_back(layer.multiplier);
        }
      }
    } else {
      const std::size_t last = head.layer_count() - 1;
      reinit_layer(head, last, mix_seed(seed, kTagInit));
      std::vector<std::uint8_t> mask(head.layer_count(), 1);
      mask[last] = 0;
      set_freeze_mask(head, std::move(mask));
      TrainResult result = train(head, *finetune_data, obj, tcfg);
      trained = std::move(result.head);
      record.trace = summarize_trace(result.trace);
    }
  }

  record.train = evaluate_head(trained, *finetune_data, notion);
  record.test = evaluate_head(trained, *setup.test, notion);
  record.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return record;
}

MeanStd ReportStats::fairness(Notion notion) const {
  switch (notion) {
    case Notion::EO: return eo_diff;
    case Notion::AE: return ae_diff;
    case Notion::MMF: return wa;
    case Notion::None: return {};
  }
  return {};
}

namespace {

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

ReportStats aggregate(const std::vector<RunRecord>& runs, bool test_split) {
  ReportStats stats;
  auto collect = [&](auto pick) {
    std::vector<double> values;
    values.reserve(runs.size());
    for (const auto& r : runs) values.push_back(pick(test_split ? r.test : r.train));
    return mean_std(values);
  };
  stats.wacc = collect([](const MetricsReport& m) { return m.wacc; });
  stats.auc = collect([](const MetricsReport& m) { return m.auc; });
  stats.eo_diff = collect([](const MetricsReport& m) { return m.eo_diff; });
  stats.ae_diff = collect([](const MetricsReport& m) { return m.ae_diff; });
  stats.wa = collect([](const MetricsReport& m) { return m.wa; });
  stats.af = collect([](const MetricsReport& m) { return m.af; });
  stats.plain_acc = collect([](const MetricsReport& m) { return m.plain_acc; });
  return stats;
}

/// Runs tasks[0..n) on `threads` workers; results land in pre-sized slots,
/// so the outcome does not depend on scheduling.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = std::min<int>(threads, static_cast<int>(count));
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string format_lr(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open '", path, "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  require(out.good(), "write to '", path, "' failed");
}

nlohmann::json metrics_json(const MetricsReport& m) {
  return {{"wacc", m.wacc},         {"auc", m.auc}, {"eo_diff", m.eo_diff},
          {"ae_diff", m.ae_diff},   {"wa", m.wa},   {"af", m.af},
          {"plain_acc", m.plain_acc}, {"notion", to_string(m.notion)}};
}

nlohmann::json trace_json(const LossTraceSummary& t) {
  auto part = [](const TraceSummary& s) {
    return nlohmann::json{{"first", s.first}, {"last", s.last}, {"min", s.min}};
  };
  return {{"total", part(t.total)},
          {"ce", part(t.ce)},
          {"penalty", part(t.penalty)},
          {"epochs", t.epochs},
          {"ce_only_steps", t.ce_only_steps}};
}

nlohmann::json record_json(const RunRecord& r) {
  nlohmann::json j{{"method", r.method},
                   {"notion", to_string(r.notion)},
                   {"seed", r.seed},
                   {"lr", r.hp.lr},
                   {"epochs", r.hp.epochs},
                   {"alpha", r.hp.alpha},
                   {"phase", r.phase},
                   {"train", metrics_json(r.train)},
                   {"test", metrics_json(r.test)},
                   {"wall_ms", r.wall_ms},
                   {"trace", trace_json(r.trace)}};
  if (!r.surgical.empty()) j["surgical"] = r.surgical;
  if (!r.rgn_multipliers.empty()) j["rgn_multipliers"] = r.rgn_multipliers;
  return j;
}

}  // namespace

std::string metrics_to_json(const MetricsReport& report) { return metrics_json(report).dump(); }

std::string runrecord_to_json(const RunRecord& record) { return record_json(record).dump(); }

std::string rgn_report_to_json(const RgnReport& report) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : report.layers) {
    layers.push_back({{"grad_norm", l.grad_norm},
                      {"param_norm", l.param_norm},
                      {"rgn", l.rgn},
                      {"multiplier", l.multiplier},
                      {"frozen", l.frozen}});
  }
  return nlohmann::json{{"layers", layers}}.dump();
}

const BenchCell& BenchResult::cell(Method method, Notion notion) const {
  for (const auto& c : cells) {
    if (c.method == method && c.notion == notion) return c;
  }
  fail("bench result: no cell for ", recipe_for(method).name, " under ", to_string(notion));
}

BenchResult bench(const BenchConfig& cfg) {
  require(!cfg.notions.empty(), "bench: notions list is empty");
  require(!cfg.methods.empty(), "bench: methods list is empty");
  require(cfg.seeds >= 1, "bench: seeds must be >= 1");

  const GroupedDataset source_data = cfg.data_path
                                         ? load_dataset(*cfg.data_path, cfg.data_format)
                                         : gen_synthetic(cfg.data_spec);
  const DataBundle source = make_bundle(source_data, cfg.base_seed);

  const bool transfer = cfg.transfer_spec.has_value() || cfg.transfer_path.has_value();
  DataBundle target_storage;
  const DataBundle* finetune_bundle = &source;
  if (transfer) {
    const GroupedDataset target_data = cfg.transfer_path
                                           ? load_dataset(*cfg.transfer_path, cfg.data_format)
                                           : gen_synthetic(*cfg.transfer_spec);
    target_storage = make_bundle(target_data, mix_seed(cfg.base_seed, kTagTargetSplit));
    finetune_bundle = &target_storage;
  }

  // One ERM pretraining run per bench; every fine-tuning method shares it.
  HeadDims dims;
  dims.input = source.train.dim();
  dims.hidden = cfg.hidden;
  TrainConfig pre_cfg;
  pre_cfg.learning_rate = cfg.pretrain_lr;
  pre_cfg.epochs = cfg.pretrain_epochs;
  pre_cfg.seed = mix_seed(cfg.base_seed, kTagPretrain);
  const MlpHead backbone = pretrain_backbone(source.train, dims, pre_cfg);

  BenchResult result;
  result.backbone_train = evaluate_head(backbone, source.train, Notion::None);
  result.backbone_test = evaluate_head(backbone, finetune_bundle->test, Notion::None);

  std::vector<Method> methods = cfg.methods;
  if (transfer) {
    // Training the full network from scratch on the target defeats the
    // purpose of the transfer comparison, so FullFT-Reg sits out.
    std::erase(methods, Method::FullFtReg);
    require(!methods.empty(), "bench: transfer mode needs at least one fine-tuning method");
  }

  RunSetup final_setup;
  final_setup.train = &finetune_bundle->train;
  final_setup.finetune = &finetune_bundle->val_ft;
  final_setup.test = &finetune_bundle->test;
  final_setup.backbone = &backbone;
  final_setup.full_dims = dims;

  RunSetup selection_setup = final_setup;
  selection_setup.test = &finetune_bundle->val_sel;

  std::vector<std::string> failures;

  for (Notion notion : cfg.notions) {
    for (Method method : methods) {
      const MethodRecipe& recipe = recipe_for(method);
      BenchCell cell;
      cell.method = method;
      cell.notion = notion;

      if (method == Method::FullFtReg) {
        cell.chosen = {cfg.fullft_lr, cfg.fullft_epochs,
                       notion == Notion::MMF ? 0.0 : cfg.fullft_alpha};
      } else {
        const bool use_alpha =
            recipe.uses_fairness_constraint && (notion == Notion::EO || notion == Notion::AE);
        const std::uint64_t sweep_seed = mix_seed(cfg.base_seed, kTagSweep);
        // Pre-enumerate the grid so the sweep evaluations can run in
        // parallel; trainer::sweep then just reads the cached scores.
        std::vector<SweepPoint> points;
        for (double lr : cfg.grid.learning_rates) {
          for (std::size_t epochs : cfg.grid.epochs_options) {
            for (double alpha : use_alpha ? cfg.grid.alphas : std::vector<double>{0.0}) {
              points.push_back({lr, epochs, alpha});
            }
          }
        }
        std::vector<RunRecord> sweep_records(points.size());
        std::vector<std::string> sweep_errors(points.size());
        parallel_for(points.size(), cfg.threads, [&](std::size_t i) {
          try {
            RunRecord r = run_method(recipe, selection_setup, notion,
                                     {points[i].lr, points[i].epochs, points[i].alpha}, sweep_seed);
            r.phase = "sweep";
            sweep_records[i] = std::move(r);
          } catch (const std::exception& e) {
            sweep_errors[i] = e.what();
          }
        });
        std::size_t cursor = 0;
        SweepResult sel = sweep(cfg.grid, use_alpha, [&](const SweepPoint& p) -> double {
          const std::size_t i = cursor++;
          require(i < points.size() && points[i].lr == p.lr && points[i].epochs == p.epochs &&
                      points[i].alpha == p.alpha,
                  "bench: sweep enumeration order drifted");
          if (!sweep_errors[i].empty()) throw Error(sweep_errors[i]);
          return sweep_records[i].test.af;  // AF on the selection split
        });
        for (auto& r : sweep_records) {
          if (!r.method.empty()) cell.sweep_runs.push_back(std::move(r));
        }
        cell.chosen = {sel.best.lr, sel.best.epochs, sel.best.alpha};
      }

      cell.runs.resize(cfg.seeds);
      std::vector<std::string> run_errors(cfg.seeds);
      parallel_for(cfg.seeds, cfg.threads, [&](std::size_t i) {
        try {
          cell.runs[i] =
              run_method(recipe, final_setup, notion, cell.chosen, mix_seed(cfg.base_seed, kTagRun, i));
        } catch (const std::exception& e) {
          run_errors[i] = e.what();
        }
      });
      bool cell_failed = false;
      for (std::size_t i = 0; i < cfg.seeds; ++i) {
        if (!run_errors[i].empty()) {
          cell_failed = true;
          failures.push_back(std::string(recipe.cli_name) + "/" + to_string(notion) + "/seed" +
                             std::to_string(i) + ": " + run_errors[i]);
        }
      }
      if (cell_failed) continue;

      cell.train = aggregate(cell.runs, false);
      cell.test = aggregate(cell.runs, true);
      result.cells.push_back(std::move(cell));
    }
  }

  if (!failures.empty()) {
    std::string msg = "bench: " + std::to_string(failures.size()) + " run(s) failed:";
    for (const auto& f : failures) msg += "\n  " + f;
    throw Error(msg);
  }

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    for (Notion notion : cfg.notions) {
      std::string csv =
          "method,lr,epochs,alpha,"
          "wacc_train_mean,wacc_train_std,wacc_test_mean,wacc_test_std,"
          "auc_train_mean,auc_train_std,auc_test_mean,auc_test_std,"
          "fair_train_mean,fair_train_std,fair_test_mean,fair_test_std,"
          "af_train_mean,af_train_std,af_test_mean,af_test_std,"
          "acc_train_mean,acc_train_std,acc_test_mean,acc_test_std\n";
      for (Method method : methods) {
        const BenchCell& cell = result.cell(method, notion);
        const MethodRecipe& recipe = recipe_for(method);
        const bool has_alpha =
            recipe.uses_fairness_constraint && (notion == Notion::EO || notion == Notion::AE);
        csv += recipe.cli_name;
        csv += "," + format_lr(cell.chosen.lr);
        csv += "," + std::to_string(cell.chosen.epochs);
        csv += "," + (has_alpha ? format_lr(cell.chosen.alpha) : std::string());
        auto emit = [&csv](const MeanStd& m) {
          csv += "," + format_double(m.mean) + "," + format_double(m.std);
        };
        emit(cell.train.wacc);
        emit(cell.test.wacc);
        emit(cell.train.auc);
        emit(cell.test.auc);
        emit(cell.train.fairness(notion));
        emit(cell.test.fairness(notion));
        emit(cell.train.af);
        emit(cell.test.af);
        emit(cell.train.plain_acc);
        emit(cell.test.plain_acc);
        csv += "\n";
      }
      const std::string path = cfg.out_dir + "/bench_" + to_string(notion) + ".csv";
      write_text_file(path, csv);
      result.files_written.push_back(path);
    }

    std::string jsonl;
    for (const auto& cell : result.cells) {
      for (const auto& r : cell.sweep_runs) jsonl += record_json(r).dump() + "\n";
      for (const auto& r : cell.runs) jsonl += record_json(r).dump() + "\n";
    }
    const std::string records_path = cfg.out_dir + "/runrecords.jsonl";
    write_text_file(records_path, jsonl);
    result.files_written.push_back(records_path);

    nlohmann::json summary;
    summary["seeds"] = cfg.seeds;
    summary["base_seed"] = cfg.base_seed;
    summary["transfer"] = transfer;
    summary["backbone"] = {{"train", metrics_json(result.backbone_train)},
                           {"test", metrics_json(result.backbone_test)},
                           {"pretrain_epochs", cfg.pretrain_epochs},
                           {"pretrain_lr", cfg.pretrain_lr}};
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cell : result.cells) {
      auto stats_json = [](const ReportStats& s, Notion notion) {
        auto ms = [](const MeanStd& m) { return nlohmann::json{{"mean", m.mean}, {"std", m.std}}; };
        return nlohmann::json{{"wacc", ms(s.wacc)},   {"auc", ms(s.auc)},
                              {"eo_diff", ms(s.eo_diff)}, {"ae_diff", ms(s.ae_diff)},
                              {"wa", ms(s.wa)},       {"af", ms(s.af)},
                              {"plain_acc", ms(s.plain_acc)},
                              {"fair", ms(s.fairness(notion))}};
      };
      cells.push_back({{"method", recipe_for(cell.method).cli_name},
                       {"notion", to_string(cell.notion)},
                       {"lr", cell.chosen.lr},
                       {"epochs", cell.chosen.epochs},
                       {"alpha", cell.chosen.alpha},
                       {"train", stats_json(cell.train, cell.notion)},
                       {"test", stats_json(cell.test, cell.notion)}});
    }
    summary["cells"] = std::move(cells);
    const std::string summary_path = cfg.out_dir + "/summary.json";
    write_text_file(summary_path, summary.dump(2) + "\n");
    result.files_written.push_back(summary_path);
  }

  return result;
}

}  // namespace fdr
