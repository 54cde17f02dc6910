#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nvc/model/train.hpp"

namespace nvc {

// Desk-scale training run on procedural toy clips.
struct ExperimentOptions {
  TrainOptions train;
  int clips = 100;
  int clip_width = 96;
  int clip_height = 96;
  int clip_frames = 6;
  int patch = 64;
  std::uint64_t data_seed = 1;
  int intra_steps = 100;
  int flow_steps = 50;
  double warmup_lr = 1e-3;
  int validation_clips = 8;
  int validation_frames = 4;
};

struct ExperimentResult {
  double untrained_loss = 0.0;  // validation L_all before the warm-ups
  double initial_loss = 0.0;  // validation L_all after the warm-ups, before the first stage
  double final_loss = 0.0;
  TrainResult train;
  double seconds = 0.0;
};

// Validation clips are drawn with data_seed + 1 and never trained on.
std::vector<torch::Tensor> validation_frames(const ExperimentOptions& options);

ExperimentResult run_experiment(CodecModel& model, std::span<const TrainingStage> schedule,
                                const ExperimentOptions& options);

}  // namespace nvc
