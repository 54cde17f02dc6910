#pragma once

#include <array>

#include <torch/torch.h>

#include "nvc/config.hpp"
#include "nvc/model/layers.hpp"
#include "nvc/model/motion.hpp"

namespace nvc {

inline constexpr int kContextLevels = 3;

// Level l has (1, 2, 4)[l] * N channels at 1 / 2^l resolution.
using ContextPyramid = std::array<torch::Tensor, kContextLevels>;

int context_channels(const TcmConfig& config, int level);

struct LongTermState {
  torch::Tensor hidden;
  torch::Tensor cell;

  bool defined() const { return hidden.defined(); }
  static LongTermState zeros(int64_t batch, int64_t channels, int64_t h, int64_t w,
                             const torch::TensorOptions& options);
};

class FeaturePyramidImpl : public torch::nn::Module {
 public:
  FeaturePyramidImpl(const TcmConfig& config, ArchKind kind, const AttentionConfig& attention);
  ContextPyramid forward(const torch::Tensor& feature);

 private:
  torch::nn::Conv2d in_{nullptr};
  Down d1_{nullptr}, d2_{nullptr};
  Body b0_{nullptr}, b1_{nullptr}, b2_{nullptr};
};
TORCH_MODULE(FeaturePyramid);

// Warps every level with both decoded flows (average-pooled to the level),
// merges the two warped maps with a 1x1 conv initialised to their mean and
// refines with a zero-initialised residual branch.
class ContextMinerImpl : public torch::nn::Module {
 public:
  ContextMinerImpl(const TcmConfig& config, ArchKind kind, const AttentionConfig& attention);
  // flows: per-level motion; throws kLevelCountMismatch unless there are three.
  ContextPyramid forward(const ContextPyramid& pyramid, const std::vector<MotionField>& flows);

 private:
  torch::nn::ModuleList merges_;
  torch::nn::ModuleList refines_;
};
TORCH_MODULE(ContextMiner);

// Per-level flows: full resolution, then average-pooled with halved magnitude.
std::vector<MotionField> context_flows(const MotionField& motion);

// ConvLSTM on the reference feature.
class LongTermMemoryImpl : public torch::nn::Module {
 public:
  explicit LongTermMemoryImpl(int feature_channels);
  // Throws kDimMismatch when the state and feature disagree in shape.
  LongTermState forward(const LongTermState& state, const torch::Tensor& feature);

 private:
  int channels_;
  torch::nn::Conv2d gates_{nullptr};
};
TORCH_MODULE(LongTermMemory);

// Top-down fusion of the hidden state into the raw contexts. The output
// projections start at zero, so a fresh module returns the raw contexts.
class ContextFusionImpl : public torch::nn::Module {
 public:
  ContextFusionImpl(const TcmConfig& config, ArchKind kind);
  ContextPyramid forward(const ContextPyramid& raw, const torch::Tensor& hidden);

 private:
  torch::nn::ModuleList mix_;
  torch::nn::ModuleList down_;
  torch::nn::ModuleList out_;
};
TORCH_MODULE(ContextFusion);

struct TcmOutput {
  ContextPyramid contexts;
  LongTermState state;
};

class TemporalContextMiningImpl : public torch::nn::Module {
 public:
  TemporalContextMiningImpl(const TcmConfig& config, ArchKind kind, const AttentionConfig& attention);
  TcmOutput forward(const torch::Tensor& ref_feature, const LongTermState& state,
                    const MotionField& motion);

  FeaturePyramid pyramid{nullptr};
  ContextMiner miner{nullptr};
  LongTermMemory memory{nullptr};
  ContextFusion fusion{nullptr};
};
TORCH_MODULE(TemporalContextMining);

}  // namespace nvc
