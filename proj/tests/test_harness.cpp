#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fdr/error.hpp"
#include "fdr/harness.hpp"
#include "helpers.hpp"

using namespace fdr;

namespace {

SyntheticSpec small_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_total = 1200;
  spec.d_core = 3;
  spec.d_spurious = 3;
  spec.d_noise = 2;
  spec.minority_fraction = 0.05;
  spec.core_separation = 1.5;
  spec.spurious_correlation = 0.9;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("recipe flags match the method definitions") {
  const auto& fullft = recipe_for(Method::FullFtReg);
  CHECK(fullft.trains_full_network);
  CHECK(fullft.uses_fairness_constraint);
  CHECK(!fullft.uses_balanced_data);

  const auto& lastft = recipe_for(Method::LastFt);
  CHECK(!lastft.trains_full_network);
  CHECK(!lastft.uses_fairness_constraint);
  CHECK(!lastft.uses_balanced_data);

  const auto& rw = recipe_for(Method::LastFtRw);
  CHECK(rw.uses_balanced_data);
  CHECK(!rw.uses_fairness_constraint);

  const auto& reg = recipe_for(Method::LastFtReg);
  CHECK(!reg.uses_balanced_data);
  CHECK(reg.uses_fairness_constraint);

  const auto& fdr_recipe = recipe_for(Method::Fdr);
  CHECK(fdr_recipe.uses_balanced_data);
  CHECK(fdr_recipe.uses_fairness_constraint);
  CHECK(!fdr_recipe.trains_full_network);

  CHECK(method_from_string("fdr") == Method::Fdr);
  CHECK(method_from_string("FullFT-Reg") == Method::FullFtReg);
  CHECK_THROWS_AS(method_from_string("nope"), Error);
}

TEST_CASE("make_bundle carves disjoint stratified pieces") {
  const GroupedDataset data = gen_synthetic(small_spec(1));
  const DataBundle bundle = make_bundle(data, 7);
  const std::size_t total =
      bundle.train.size() + bundle.val_ft.size() + bundle.val_sel.size() + bundle.test.size();
  CHECK(total == data.size());
  for (const GroupedDataset* part : {&bundle.train, &bundle.val_ft, &bundle.val_sel, &bundle.test}) {
    const auto counts = part->group_counts();
    for (int g = 0; g < 4; ++g) CHECK(counts[g] > 0);
  }
  // Deterministic
  const DataBundle again = make_bundle(data, 7);
  CHECK(again.train.features.data() == bundle.train.features.data());
  CHECK(again.val_sel.labels == bundle.val_sel.labels);
}

TEST_CASE("pretraining on imbalanced data learns but skews against the minority") {
  SyntheticSpec spec;
  spec.n_total = 6000;
  spec.d_core = 5;
  spec.d_spurious = 5;
  spec.d_noise = 10;
  spec.minority_fraction = 0.01;
  spec.core_separation = 3.0;
  spec.spurious_correlation = 1.0;
  spec.seed = 9;
  const GroupedDataset data = gen_synthetic(spec);
  const DataBundle bundle = make_bundle(data, 11);
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.epochs = 200;
  cfg.seed = 5;
  const MlpHead backbone = pretrain_backbone(bundle.train, {spec.dim(), {16, 8}, 2}, cfg);
  const MetricsReport report = evaluate_head(backbone, bundle.test, Notion::None);
  CHECK(report.wacc >= 0.8);
  CHECK(report.wa < report.plain_acc - 0.25);  // worst group far below the mean
}

TEST_CASE("pretraining with zero epochs returns an untrained head") {
  const GroupedDataset data = gen_synthetic(small_spec(2));
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 3;
  const MlpHead head = pretrain_backbone(data, {data.dim(), {4}, 2}, cfg);
  CHECK(head == init_head({data.dim(), {4}, 2}, mix_seed(3, kTagInit)));
}

TEST_CASE("run_method validates recipe and notion combinations") {
  const GroupedDataset data = gen_synthetic(small_spec(3));
  const DataBundle bundle = make_bundle(data, 1);
  const MlpHead backbone = init_head({data.dim(), {4}, 2}, 2);
  RunSetup setup;
  setup.train = &bundle.train;
  setup.finetune = &bundle.val_ft;
  setup.test = &bundle.test;
  setup.backbone = &backbone;
  setup.full_dims = {data.dim(), {4}, 2};

  // Constraint recipes need a notion.
  CHECK_THROWS_AS(
      run_method(recipe_for(Method::Fdr), setup, Notion::None, {1e-3, 10, 0.0}, 1), Error);
  // alpha is not an MMF parameter.
  CHECK_THROWS_AS(
      run_method(recipe_for(Method::Fdr), setup, Notion::MMF, {1e-3, 10, 2.0}, 1), Error);
  // alpha makes no sense without a constraint.
  CHECK_THROWS_AS(
      run_method(recipe_for(Method::LastFt), setup, Notion::EO, {1e-3, 10, 2.0}, 1), Error);
  // Last-layer recipes need a backbone.
  RunSetup no_backbone = setup;
  no_backbone.backbone = nullptr;
  CHECK_THROWS_AS(
      run_method(recipe_for(Method::LastFt), no_backbone, Notion::EO, {1e-3, 10, 0.0}, 1), Error);
}

TEST_CASE("LastFT with zero epochs scores near chance after the reinit") {
  const GroupedDataset data = gen_synthetic(small_spec(4));
  const DataBundle bundle = make_bundle(data, 2);
  TrainConfig pre_cfg;
  pre_cfg.learning_rate = 3e-3;
  pre_cfg.epochs = 150;
  pre_cfg.seed = 4;
  const MlpHead backbone = pretrain_backbone(bundle.train, {data.dim(), {8}, 2}, pre_cfg);
  RunSetup setup;
  setup.train = &bundle.train;
  setup.finetune = &bundle.val_ft;
  setup.test = &bundle.test;
  setup.backbone = &backbone;
  setup.full_dims = {data.dim(), {8}, 2};

  // Sanity: the pretrained model itself is far from chance.
  CHECK(evaluate_head(backbone, bundle.test, Notion::None).wacc > 0.7);

  const RunRecord record =
      run_method(recipe_for(Method::LastFt), setup, Notion::EO, {1e-3, 0, 0.0}, 12);
  CHECK(std::abs(record.test.wacc - 0.5) <= 0.15);
}

TEST_CASE("run_method is deterministic and keeps the af identity") {
  const GroupedDataset data = gen_synthetic(small_spec(5));
  const DataBundle bundle = make_bundle(data, 3);
  TrainConfig pre_cfg;
  pre_cfg.learning_rate = 3e-3;
  pre_cfg.epochs = 100;
  pre_cfg.seed = 6;
  const MlpHead backbone = pretrain_backbone(bundle.train, {data.dim(), {8}, 2}, pre_cfg);
  RunSetup setup;
  setup.train = &bundle.train;
  setup.finetune = &bundle.val_ft;
  setup.test = &bundle.test;
  setup.backbone = &backbone;
  setup.full_dims = {data.dim(), {8}, 2};

  const RunRecord a =
      run_method(recipe_for(Method::Fdr), setup, Notion::EO, {1e-2, 60, 2.0}, 42);
  const RunRecord b =
      run_method(recipe_for(Method::Fdr), setup, Notion::EO, {1e-2, 60, 2.0}, 42);
  CHECK(a.train.wacc == b.train.wacc);
  CHECK(a.test.eo_diff == b.test.eo_diff);
  CHECK(a.test.af == doctest::Approx(af(a.test.wacc, a.test.eo_diff, Notion::EO)).epsilon(1e-12));

  const RunRecord c =
      run_method(recipe_for(Method::Fdr), setup, Notion::EO, {1e-2, 60, 2.0}, 43);
  CHECK(a.test.wacc != c.test.wacc);  // seed reaches the balanced draw + init
}

TEST_CASE("non-constraint recipes carry zero penalty in their traces") {
  const GroupedDataset data = gen_synthetic(small_spec(6));
  const DataBundle bundle = make_bundle(data, 4);
  TrainConfig pre_cfg;
  pre_cfg.learning_rate = 3e-3;
  pre_cfg.epochs = 80;
  pre_cfg.seed = 8;
  const MlpHead backbone = pretrain_backbone(bundle.train, {data.dim(), {8}, 2}, pre_cfg);
  RunSetup setup;
  setup.train = &bundle.train;
  setup.finetune = &bundle.val_ft;
  setup.test = &bundle.test;
  setup.backbone = &backbone;
  setup.full_dims = {data.dim(), {8}, 2};

  for (Method m : {Method::LastFt, Method::LastFtRw}) {
    const RunRecord record = run_method(recipe_for(m), setup, Notion::EO, {1e-3, 40, 0.0}, 9);
    CHECK(record.trace.penalty.first == 0.0);
    CHECK(record.trace.penalty.last == 0.0);
    CHECK(record.trace.penalty.min == 0.0);
  }
}

TEST_CASE("bench with one seed and a singleton grid equals its single run record") {
  BenchConfig cfg;
  cfg.data_spec = small_spec(7);
  cfg.notions = {Notion::EO};
  cfg.methods = {Method::Fdr};
  cfg.seeds = 1;
  cfg.grid.learning_rates = {1e-2};
  cfg.grid.epochs_options = {50};
  cfg.grid.alphas = {2.0};
  cfg.base_seed = 100;
  cfg.pretrain_epochs = 60;
  const BenchResult result = bench(cfg);
  REQUIRE(result.cells.size() == 1);
  const BenchCell& cell = result.cells[0];
  REQUIRE(cell.runs.size() == 1);
  CHECK(cell.chosen.lr == 1e-2);
  CHECK(cell.chosen.epochs == 50);
  CHECK(cell.chosen.alpha == 2.0);
  CHECK(cell.test.wacc.mean == cell.runs[0].test.wacc);
  CHECK(cell.test.wacc.std == 0.0);
  CHECK(cell.test.af.mean == cell.runs[0].test.af);
  // Sweep records exist for the singleton grid point.
  CHECK(cell.sweep_runs.size() == 1);
  CHECK(cell.sweep_runs[0].phase == "sweep");
}

TEST_CASE("bench writes byte-identical outputs when re-run") {
  const auto dir_a = std::filesystem::temp_directory_path() / "fdr_bench_a";
  const auto dir_b = std::filesystem::temp_directory_path() / "fdr_bench_b";
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);

  BenchConfig cfg;
  cfg.data_spec = small_spec(8);
  cfg.notions = {Notion::EO, Notion::MMF};
  cfg.methods = {Method::LastFt, Method::Fdr};
  cfg.seeds = 2;
  cfg.grid.learning_rates = {3e-3};
  cfg.grid.epochs_options = {40};
  cfg.grid.alphas = {1.0};
  cfg.base_seed = 5;
  cfg.pretrain_epochs = 60;
  cfg.threads = 2;  // exercise the pool; outputs must not depend on it

  cfg.out_dir = dir_a.string();
  bench(cfg);
  cfg.out_dir = dir_b.string();
  cfg.threads = 1;
  bench(cfg);

  for (const char* name : {"bench_eo.csv", "bench_mmf.csv"}) {
    std::ifstream fa(dir_a / name, std::ios::binary), fb(dir_b / name, std::ios::binary);
    REQUIRE(fa.good());
    REQUIRE(fb.good());
    const std::string a((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string b((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(a == b);
    CHECK(!a.empty());
  }
}

TEST_CASE("bench in transfer mode drops FullFT-Reg and fine-tunes on the target") {
  BenchConfig cfg;
  cfg.data_spec = small_spec(9);
  SyntheticSpec target = small_spec(10);
  target.spurious_correlation = 0.6;
  cfg.transfer_spec = target;
  cfg.notions = {Notion::EO};
  cfg.methods = {Method::FullFtReg, Method::LastFt};
  cfg.seeds = 1;
  cfg.grid.learning_rates = {3e-3};
  cfg.grid.epochs_options = {30};
  cfg.grid.alphas = {1.0};
  cfg.base_seed = 6;
  cfg.pretrain_epochs = 50;
  const BenchResult result = bench(cfg);
  REQUIRE(result.cells.size() == 1);  // FullFT-Reg sat out
  CHECK(result.cells[0].method == Method::LastFt);
}

TEST_CASE("metrics and run record serialize to json") {
  MetricsReport report;
  report.wacc = 0.75;
  report.auc = 0.8;
  report.notion = Notion::EO;
  const std::string json = metrics_to_json(report);
  CHECK(json.find("\"wacc\":0.75") != std::string::npos);
  CHECK(json.find("\"notion\":\"eo\"") != std::string::npos);

  RunRecord record;
  record.method = "fdr";
  record.notion = Notion::EO;
  record.hp = {1e-3, 100, 2.0};
  const std::string line = runrecord_to_json(record);
  CHECK(line.find("\"method\":\"fdr\"") != std::string::npos);
  CHECK(line.find("\"epochs\":100") != std::string::npos);
}
