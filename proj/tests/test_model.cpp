#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fdr/error.hpp"
#include "fdr/model.hpp"
#include "fdr/objectives.hpp"
#include "fdr/trainer.hpp"
#include "helpers.hpp"

using namespace fdr;

TEST_CASE("init_head builds the requested chain with zero biases") {
  const MlpHead head = init_head({8, {}, 2}, 1);
  CHECK(head.layer_count() == 1);
  CHECK(head.layers[0].fan_in() == 8);
  CHECK(head.layers[0].fan_out() == 2);
  for (double b : head.layers[0].bias) CHECK(b == 0.0);
  const double limit = std::sqrt(6.0 / (8 + 2));
  for (double w : head.layers[0].weight.data()) {
    CHECK(std::abs(w) <= limit);
    CHECK(w != 0.0);  // measure-zero event under a continuous draw
  }
}

TEST_CASE("init_head is bit-deterministic in the seed") {
  CHECK(init_head({8, {16}, 2}, 42) == init_head({8, {16}, 2}, 42));
  CHECK(init_head({8, {16}, 2}, 42) != init_head({8, {16}, 2}, 43));
}

TEST_CASE("parameter count matches the closed form") {
  CHECK(init_head({8, {16}, 2}, 0).param_count() == 178);  // 8*16+16+16*2+2
  CHECK(init_head({20, {32, 16}, 2}, 0).param_count() == 20 * 32 + 32 + 32 * 16 + 16 + 16 * 2 + 2);
}

TEST_CASE("init_head rejects zero dimensions") {
  CHECK_THROWS_AS(init_head({0, {}, 2}, 0), Error);
  CHECK_THROWS_AS(init_head({4, {0}, 2}, 0), Error);
}

TEST_CASE("all-zero parameters give uniform probabilities") {
  MlpHead head = init_head({3, {}, 2}, 0);
  for (auto& w : head.layers[0].weight.data()) w = 0.0;
  Matrix x(4, 3);
  x.data() = {1, 2, 3, -4, 5, 6, 0, 0, 0, 9, 9, 9};
  const PredictionBatch pred = forward(head, x);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(pred.probs(i, 0) == doctest::Approx(0.5));
    CHECK(pred.probs(i, 1) == doctest::Approx(0.5));
    CHECK(pred.hard[i] == 0);  // tie resolves to class 0
  }
}

TEST_CASE("softmax is stable for extreme logits") {
  MlpHead head = init_head({2, {}, 2}, 0);
  head.layers[0].weight.data() = {1.0, 0.0, 0.0, 0.0};  // logit0 = x0, logit1 = 0
  Matrix x(1, 2);
  x.data() = {1000.0, 0.0};
  const PredictionBatch pred = forward(head, x);
  CHECK(std::isfinite(pred.probs(0, 0)));
  CHECK(pred.probs(0, 0) == doctest::Approx(1.0));
  CHECK(pred.probs(0, 1) == doctest::Approx(0.0));
  CHECK(pred.hard[0] == 0);
}

TEST_CASE("forward matches a hand softmax computation") {
  MlpHead head = init_head({2, {}, 2}, 0);
  // logits = W x + b with hand-set entries
  head.layers[0].weight.data() = {0.25, -0.5, 1.5, 0.75};
  head.layers[0].bias = {0.1, -0.2};
  Matrix x(1, 2);
  x.data() = {0.4, -1.2};
  const PredictionBatch pred = forward(head, x);
  const double z0 = 0.25 * 0.4 + (-0.5) * (-1.2) + 0.1;
  const double z1 = 1.5 * 0.4 + 0.75 * (-1.2) - 0.2;
  const double e0 = std::exp(z0), e1 = std::exp(z1);
  CHECK(pred.logits(0, 0) == doctest::Approx(z0).epsilon(1e-12));
  CHECK(pred.logits(0, 1) == doctest::Approx(z1).epsilon(1e-12));
  CHECK(pred.probs(0, 0) == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-12));
  CHECK(pred.probs(0, 1) == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-12));
}

TEST_CASE("probability rows sum to one") {
  const MlpHead head = init_head({6, {8}, 2}, 3);
  Rng rng(4);
  Matrix x(32, 6);
  for (auto& v : x.data()) v = 3.0 * rng.normal();
  const PredictionBatch pred = forward(head, x);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    CHECK(std::abs(pred.probs(i, 0) + pred.probs(i, 1) - 1.0) < 1e-6);
    CHECK(pred.hard[i] == (pred.probs(i, 1) > pred.probs(i, 0) ? 1 : 0));
  }
}

TEST_CASE("forward rejects a dimension mismatch") {
  const MlpHead head = init_head({4, {}, 2}, 0);
  CHECK_THROWS_AS(forward(head, Matrix(2, 3)), Error);
}

TEST_CASE("set_freeze_mask validates length") {
  MlpHead head = init_head({4, {5}, 2}, 0);
  CHECK_THROWS_AS(set_freeze_mask(head, {1}), Error);
  set_freeze_mask(head, {1, 0});
  CHECK(head.frozen(0));
  CHECK(!head.frozen(1));
}

TEST_CASE("frozen layers are bit-identical after training") {
  Rng rng(12);
  const GroupedDataset data = testutil::random_batch(rng, 64, 6);
  MlpHead head = init_head({6, {8, 4}, 2}, 5);
  set_freeze_mask(head, {1, 0, 1});  // middle layer trains, ends frozen

  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 25;
  ObjectiveConfig obj;
  const MlpHead trained = train(head, data, obj, cfg).head;
  CHECK(trained.layers[0] == head.layers[0]);
  CHECK(trained.layers[2] == head.layers[2]);
  CHECK(trained.layers[1] != head.layers[1]);
}

TEST_CASE("all-true freeze mask makes training a no-op") {
  Rng rng(13);
  const GroupedDataset data = testutil::random_batch(rng, 16, 4);
  MlpHead head = init_head({4, {5}, 2}, 6);
  set_freeze_mask(head, {1, 1});
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.epochs = 10;
  ObjectiveConfig obj;
  const MlpHead trained = train(head, data, obj, cfg).head;
  CHECK(trained == head);
}

TEST_CASE("head serialization round-trips bit-exactly") {
  MlpHead head = init_head({5, {7}, 2}, 99);
  set_freeze_mask(head, {1, 0});
  const auto path = (std::filesystem::temp_directory_path() / "fdr_head.bin").string();
  save_head(head, path);
  const MlpHead loaded = load_head(path);
  CHECK(loaded.init_seed == head.init_seed);
  CHECK(loaded.freeze_mask == head.freeze_mask);
  CHECK(loaded.dims().hidden == head.dims().hidden);

  // Saving the loaded head reproduces the file byte for byte.
  const auto path2 = (std::filesystem::temp_directory_path() / "fdr_head2.bin").string();
  save_head(loaded, path2);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string bytes_b((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(bytes_a == bytes_b);
  CHECK(!bytes_a.empty());
}

TEST_CASE("load_head rejects malformed files") {
  const auto path = (std::filesystem::temp_directory_path() / "fdr_head_bad.bin").string();
  std::ofstream(path) << "not a head\n";
  CHECK_THROWS_AS(load_head(path), Error);
}

TEST_CASE("reinit_layer redraws only the chosen layer") {
  MlpHead head = init_head({4, {6}, 2}, 7);
  const MlpHead before = head;
  reinit_layer(head, 1, 1234);
  CHECK(head.layers[0] == before.layers[0]);
  CHECK(head.layers[1] != before.layers[1]);
  MlpHead again = before;
  reinit_layer(again, 1, 1234);
  CHECK(again == head);  // deterministic redraw
}
