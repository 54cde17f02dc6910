#include "nvc/model/tcm.hpp"

#include "nvc/error.hpp"

namespace nvc {

int context_channels(const TcmConfig& config, int level) { return config.channels << level; }

LongTermState LongTermState::zeros(int64_t batch, int64_t channels, int64_t h, int64_t w,
                                   const torch::TensorOptions& options) {
  return {torch::zeros({batch, channels, h, w}, options), torch::zeros({batch, channels, h, w}, options)};
}

FeaturePyramidImpl::FeaturePyramidImpl(const TcmConfig& config, ArchKind kind,
                                       const AttentionConfig& attention) {
  const int n = config.channels;
  in_ = register_module("head", merge_conv(config.feature_channels, n, kind));
  b0_ = register_module("b0", Body(n, config.res_blocks, kind, attention));
  d1_ = register_module("d1", Down(n, 2 * n, kind));
  b1_ = register_module("b1", Body(2 * n, config.res_blocks, kind, attention));
  d2_ = register_module("d2", Down(2 * n, 4 * n, kind));
  b2_ = register_module("b2", Body(4 * n, config.res_blocks, kind, attention));
}

ContextPyramid FeaturePyramidImpl::forward(const torch::Tensor& feature) {
  auto l0 = b0_(in_(feature));
  auto l1 = b1_(d1_(l0));
  auto l2 = b2_(d2_(l1));
  return {l0, l1, l2};
}

ContextMinerImpl::ContextMinerImpl(const TcmConfig& config, ArchKind kind,
                                   const AttentionConfig& attention) {
  for (int l = 0; l < kContextLevels; ++l) {
    const int c = context_channels(config, l);
    auto merge = conv1(2 * c, c);
    {
      torch::NoGradGuard guard;
      auto eye = torch::eye(c) * 0.5;
      merge->weight.copy_(torch::cat({eye, eye}, 1).view({c, 2 * c, 1, 1}));
      merge->bias.zero_();
    }
    merges_->push_back(merge);
    refines_->push_back(Refine(c, config.res_blocks, kind, attention));
  }
  register_module("merges", merges_);
  register_module("refines", refines_);
}

std::vector<MotionField> context_flows(const MotionField& motion) {
  std::vector<MotionField> flows{motion};
  for (int l = 1; l < kContextLevels; ++l) {
    flows.push_back({downsample_flow(flows.back().flow_s), downsample_flow(flows.back().flow_d)});
  }
  return flows;
}

ContextPyramid ContextMinerImpl::forward(const ContextPyramid& pyramid,
                                         const std::vector<MotionField>& flows) {
  if (flows.size() != static_cast<std::size_t>(kContextLevels)) {
    throw Error(ErrorCode::kLevelCountMismatch,
                "expected 3 flow levels, got " + std::to_string(flows.size()));
  }
  ContextPyramid out;
  for (int l = 0; l < kContextLevels; ++l) {
    auto ws = warp(pyramid[l], flows[l].flow_s);
    auto wd = warp(pyramid[l], flows[l].flow_d);
    auto merged = merges_[l]->as<torch::nn::Conv2dImpl>()->forward(torch::cat({ws, wd}, 1));
    out[l] = refines_[l]->as<RefineImpl>()->forward(merged);
  }
  return out;
}

LongTermMemoryImpl::LongTermMemoryImpl(int feature_channels)
    : channels_(feature_channels),
      gates_(register_module("gates", conv3(2 * feature_channels, 4 * feature_channels))) {}

LongTermState LongTermMemoryImpl::forward(const LongTermState& state, const torch::Tensor& feature) {
  if (state.hidden.sizes() != feature.sizes() || state.cell.sizes() != feature.sizes()) {
    throw Error(ErrorCode::kDimMismatch, "long-term state does not match the reference feature");
  }
  auto g = gates_(torch::cat({feature, state.hidden}, 1)).chunk(4, 1);
  auto i = torch::sigmoid(g[0]);
  auto f = torch::sigmoid(g[1]);
  auto o = torch::sigmoid(g[2]);
  auto candidate = torch::tanh(g[3]);
  auto cell = f * state.cell + i * candidate;
  return {o * torch::tanh(cell), cell};
}

ContextFusionImpl::ContextFusionImpl(const TcmConfig& config, ArchKind kind) {
  const int n = config.channels;
  for (int l = 0; l < kContextLevels; ++l) {
    const int c = context_channels(config, l);
    const int extra = l == 0 ? config.feature_channels : n;
    mix_->push_back(merge_conv(c + extra, n, kind));
    if (l + 1 < kContextLevels) down_->push_back(conv3(n, n, 2));
    auto out = conv1(n, c);
    {
      torch::NoGradGuard guard;
      out->weight.zero_();
      out->bias.zero_();
    }
    out_->push_back(out);
  }
  register_module("mix", mix_);
  register_module("down", down_);
  register_module("out", out_);
}

ContextPyramid ContextFusionImpl::forward(const ContextPyramid& raw, const torch::Tensor& hidden) {
  ContextPyramid out;
  torch::Tensor carry = hidden;
  for (int l = 0; l < kContextLevels; ++l) {
    auto u = leaky(mix_[l]->as<torch::nn::Conv2dImpl>()->forward(torch::cat({raw[l], carry}, 1)));
    out[l] = raw[l] + out_[l]->as<torch::nn::Conv2dImpl>()->forward(u);
    if (l + 1 < kContextLevels) carry = down_[l]->as<torch::nn::Conv2dImpl>()->forward(u);
  }
  return out;
}

TemporalContextMiningImpl::TemporalContextMiningImpl(const TcmConfig& config, ArchKind kind,
                                                     const AttentionConfig& attention)
    : pyramid(register_module("pyramid", FeaturePyramid(config, kind, attention))),
      miner(register_module("miner", ContextMiner(config, kind, attention))),
      memory(register_module("memory", LongTermMemory(config.feature_channels))),
      fusion(register_module("fusion", ContextFusion(config, kind))) {}

TcmOutput TemporalContextMiningImpl::forward(const torch::Tensor& ref_feature,
                                             const LongTermState& state, const MotionField& motion) {
  auto raw = miner(pyramid(ref_feature), context_flows(motion));
  auto next = memory(state, ref_feature);
  return {fusion(raw, next.hidden), next};
}

}  // namespace nvc
