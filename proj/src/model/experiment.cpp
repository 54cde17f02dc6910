#include "nvc/model/experiment.hpp"

#include <chrono>

#include "nvc/synthetic.hpp"

namespace nvc {

std::vector<torch::Tensor> validation_frames(const ExperimentOptions& options) {
  ClipSampler sampler(make_toy_clips(options.validation_clips, options.clip_width, options.clip_height,
                                     options.clip_frames, options.data_seed + 1),
                      options.validation_frames, options.patch, options.data_seed + 1);
  return next_batch_tensors(sampler, options.validation_clips, options.validation_frames);
}

ExperimentResult run_experiment(CodecModel& model, std::span<const TrainingStage> schedule,
                                const ExperimentOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  int clip_len = options.clip_frames;
  for (const auto& s : schedule) clip_len = std::max(clip_len, s.frames);
  ClipSampler sampler(make_toy_clips(options.clips, options.clip_width, options.clip_height, clip_len,
                                     options.data_seed),
                      clip_len, options.patch, options.train.seed);
  const auto validation = validation_frames(options);

  ExperimentResult r;
  r.untrained_loss = evaluate_all_loss(model, validation, options.train.lambda_index);
  torch::manual_seed(options.train.seed);
  if (options.intra_steps > 0) pretrain_intra(model, sampler, options.train, options.intra_steps, options.warmup_lr);
  if (options.flow_steps > 0) pretrain_flow(model, sampler, options.train, options.flow_steps, options.warmup_lr);

  r.initial_loss = evaluate_all_loss(model, validation, options.train.lambda_index);
  r.train = run_schedule(model, schedule, sampler, options.train);
  r.final_loss = evaluate_all_loss(model, validation, options.train.lambda_index);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace nvc
