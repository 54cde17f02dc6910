#include <filesystem>

#include "doctest.h"
#include "nvc/error.hpp"
#include "nvc/loss.hpp"
#include "test_paths.hpp"

using namespace nvc;

TEST_CASE("frame weights have period four") {
  CHECK(frame_weight(1) == 0.5);
  CHECK(frame_weight(2) == 1.2);
  CHECK(frame_weight(3) == 0.5);
  CHECK(frame_weight(4) == 0.9);
  CHECK(frame_weight(5) == 0.5);
  for (int p = 1; p < 40; ++p) CHECK(frame_weight(p) == frame_weight(p + 4));
  CHECK_THROWS_AS(frame_weight(0), Error);
  CHECK_THROWS_AS(frame_weight(-3), Error);
}

TEST_CASE("lambda set") {
  CHECK(kLambdas == std::array<double, 4>{85, 170, 380, 840});
  CHECK(lambda_for_index(3) == 840);
  CHECK_THROWS_AS(lambda_for_index(4), Error);
}

TEST_CASE("loss identities") {
  CHECK(compute_loss(LossKind::kMeRD, 1.0, 85, {0.01, 0, 0.2, 0}) == doctest::Approx(1.05).epsilon(1e-15));
  CHECK(compute_loss(LossKind::kAll, 1.2, 170, {0, 0.005, 0.1, 0.3}) == doctest::Approx(1.42).epsilon(1e-15));
  const LossBreakdown b{0.02, 0.003, 0.15, 0.4};
  CHECK(compute_loss(LossKind::kMeD, 0.9, 380, b) == 0.9 * 380 * 0.02);
  CHECK(compute_loss(LossKind::kRecD, 0.9, 380, b) == 0.9 * 380 * 0.003);
  CHECK(compute_loss(LossKind::kRecRD, 0.9, 380, b) == 0.9 * 380 * 0.003 + 0.4);
  const std::vector<WeightedFrame> frames = {{1.2, {0, 0.005, 0.1, 0.3}}, {1.2, {0, 0.005, 0.1, 0.3}}};
  CHECK(cascaded_loss(170, frames) == doctest::Approx(1.42).epsilon(1e-15));
  CHECK_THROWS_AS(compute_loss(static_cast<LossKind>(42), 1, 85, b), Error);
  try {
    parse_loss_kind("L1");
    FAIL("expected invalid-kind");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidKind);
  }
}

TEST_CASE("stage validation") {
  CHECK_NOTHROW(validate_stage({2, TrainScope::kInter, LossKind::kMeD, 1e-4, 2}));
  CHECK_THROWS_AS(validate_stage({2, TrainScope::kAll, LossKind::kMeD, 1e-4, 2}), Error);
  CHECK_THROWS_AS(validate_stage({2, TrainScope::kInter, LossKind::kRecRD, 1e-4, 2}), Error);
  CHECK_THROWS_AS(validate_stage({1, TrainScope::kAll, LossKind::kCascadedAll, 1e-4, 2}), Error);
}

TEST_CASE("the shipped schedule") {
  const auto stages =
      load_schedule(std::filesystem::path(NVC_TEST_DATA_DIR) / ".." / "schedules" / "table2_rgb.csv");
  REQUIRE(stages.size() == 21);
  CHECK(stages[0] == TrainingStage{2, TrainScope::kInter, LossKind::kMeD, 1e-4, 2});
  CHECK(stages[2].scope == TrainScope::kRecon);
  CHECK(stages[16] == TrainingStage{6, TrainScope::kAll, LossKind::kAll, 5e-6, 5});
  for (int i = 17; i < 21; ++i) CHECK(stages[i].loss == LossKind::kCascadedAll);
  CHECK(stages[20].learning_rate == 1e-7);
  double epochs = 0;
  for (const auto& s : stages) epochs += s.epochs;
  CHECK(epochs == 120);
  CHECK(stage_steps(stages[0], 0.01, 10) == 1);
  CHECK(stage_steps(stages[12], 0.1, 10) == 15);

  const auto tmp = std::filesystem::temp_directory_path() / "nvc_schedule.csv";
  save_schedule(tmp, stages);
  CHECK(load_schedule(tmp) == stages);
}
