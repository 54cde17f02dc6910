#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace nvc {

inline constexpr std::array<double, 4> kLambdas = {85.0, 170.0, 380.0, 840.0};
inline constexpr std::array<double, 4> kFrameWeights = {0.5, 1.2, 0.5, 0.9};

double lambda_for_index(int index);

// Weight of the p-th P-frame of a GOP (1-based), period four.
double frame_weight(int p_index);

enum class TrainScope { kInter, kRecon, kAll };
enum class LossKind { kMeD, kMeRD, kRecD, kRecRD, kAll, kCascadedAll };

std::string_view to_string(TrainScope scope);
std::string_view to_string(LossKind kind);
TrainScope parse_scope(std::string_view name);
LossKind parse_loss_kind(std::string_view name);

// Distortions are mean squared errors, rates are bits per pixel.
struct LossBreakdown {
  double d_m = 0.0;
  double d_y = 0.0;
  double r_m = 0.0;
  double r_y = 0.0;
};

//   meD   = w lambda D_m
//   meRD  = w lambda D_m + R_m
//   recD  = w lambda D_y
//   recRD = w lambda D_y + R_y
//   all   = w lambda D_y + R_m + R_y
// cascaded_all on a single frame is the all loss of that frame.
double compute_loss(LossKind kind, double w, double lambda, const LossBreakdown& b);

struct WeightedFrame {
  double w = 1.0;
  LossBreakdown breakdown;
};

// Mean of the per-frame all losses.
double cascaded_loss(double lambda, std::span<const WeightedFrame> frames);

struct TrainingStage {
  int frames = 2;
  TrainScope scope = TrainScope::kAll;
  LossKind loss = LossKind::kAll;
  double learning_rate = 1e-4;
  double epochs = 1.0;

  bool operator==(const TrainingStage&) const = default;
};

// Throws kInvalidConfig when loss kind and scope disagree or a cascaded
// stage has fewer than two frames.
void validate_stage(const TrainingStage& stage);

// CSV with header frames,scope,loss,lr,epochs.
std::vector<TrainingStage> load_schedule(const std::filesystem::path& path);
void save_schedule(const std::filesystem::path& path, std::span<const TrainingStage> stages);

// Steps for a stage: max(1, round(epochs * epoch_scale * steps_per_epoch)).
int stage_steps(const TrainingStage& stage, double epoch_scale, int steps_per_epoch);

}  // namespace nvc
