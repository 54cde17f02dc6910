#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "nvc/data_io.hpp"
#include "nvc/loss.hpp"
#include "nvc/model/codec.hpp"

namespace nvc {

// Per-frame loss tensors of one P-frame, reduced over the batch.
torch::Tensor frame_loss(LossKind kind, double w, double lambda, const InterForward& f);
LossBreakdown breakdown_of(const InterForward& f);

// Rolls a clip through the model with each frame referencing the previous
// decoded state. frames[0] is intra coded. Full autograd graph.
struct Rollout {
  IntraForward intra;
  std::vector<InterForward> inter;  // frames.size() - 1 entries
  torch::Tensor loss;               // intra term plus the P-frame all losses, averaged over all frames
};
Rollout cascaded_rollout(CodecModel& model, const std::vector<torch::Tensor>& frames, int lambda_index);

// Accumulates gradients of the cascaded loss into the trainable parameters
// and returns its value. With recompute the rollout is run once without a
// graph and replayed frame by frame in reverse, so only one frame's
// activations are alive at a time. mean receives the P-frame average.
double cascaded_backward(CodecModel& model, const std::vector<torch::Tensor>& frames, int lambda_index,
                         bool recompute, LossBreakdown* mean = nullptr);

// Mean all loss (w lambda D_y + R_m + R_y) over the P-frames of the clips in
// eval mode (rounded latents, state detached between frames).
double evaluate_all_loss(CodecModel& model, const std::vector<torch::Tensor>& frames, int lambda_index);

// FNV-1a over the raw bytes of each module group's parameters.
std::map<std::string, std::uint64_t> group_checksums(CodecModel& model);

struct StepRecord {
  int stage = 0;
  int step = 0;
  LossKind kind = LossKind::kAll;
  double loss = 0.0;
  LossBreakdown mean;  // averaged over the P-frames of the step
};

struct StageReport {
  int stage = 0;
  int steps = 0;
  std::vector<std::string> trained;
  bool frozen_intact = true;  // checksums of untrained groups unchanged
};

struct TrainOptions {
  int lambda_index = 3;
  int batch_size = 4;
  double epoch_scale = 1.0;
  int steps_per_epoch = 10;
  double lr_scale = 1.0;
  double grad_clip = 1.0;
  bool recompute = true;
  std::uint64_t seed = 0;
  int first_stage = 0;                       // resume cursor
  std::filesystem::path log_path;            // CSV step log; empty for none
  std::filesystem::path checkpoint_path;     // written after every stage; empty for none
  std::function<void(const StepRecord&)> on_step;
};

struct TrainResult {
  std::vector<StepRecord> log;
  std::vector<StageReport> stages;
};

// Throws kNanLoss naming the stage and step when a loss is not finite.
TrainResult run_schedule(CodecModel& model, std::span<const TrainingStage> stages, ClipSampler& sampler,
                         const TrainOptions& options);

// Separate warm-up passes run before the schedule.
double pretrain_intra(CodecModel& model, ClipSampler& sampler, const TrainOptions& options, int steps,
                      double learning_rate);
double pretrain_flow(CodecModel& model, ClipSampler& sampler, const TrainOptions& options, int steps,
                     double learning_rate);

struct Checkpoint {
  ModelConfig config;
  int lambda_index = 0;
  int stage_cursor = 0;  // index of the next stage to run
};

void save_checkpoint(CodecModel& model, const Checkpoint& meta, const std::filesystem::path& path);
// Throws kMissingCheckpoint when the file does not exist.
std::pair<CodecModel, Checkpoint> load_checkpoint(const std::filesystem::path& path);

// Frames [T] of [B, 3, H, W] for the next batch of clips.
std::vector<torch::Tensor> next_batch_tensors(ClipSampler& sampler, int batch_size, int frames);

}  // namespace nvc
