#pragma once

#include <torch/torch.h>

#include "nvc/config.hpp"
#include "nvc/model/layers.hpp"

namespace nvc {

// All tensors are [B, C, H, W]; flows are [B, 2, H, W] with channel 0 the
// horizontal and channel 1 the vertical displacement in pixels.

struct StructureDetail {
  torch::Tensor structure;
  torch::Tensor detail;
};

// 5x5 Gaussian kernel, sigma 1.5, normalised to unit sum.
torch::Tensor gaussian_kernel();

// structure = Gaussian low-pass with replicate border; detail = x - structure.
StructureDetail decompose_structure_detail(const torch::Tensor& x);

// Backward bilinear warp: out(y, x) = source(y + flow_y, x + flow_x) with
// sample coordinates clamped to the frame (border replication). Zero flow
// returns the source exactly.
torch::Tensor warp(const torch::Tensor& source, const torch::Tensor& flow);

// 2x average pool with displacements halved.
torch::Tensor downsample_flow(const torch::Tensor& flow);

// Bilinear 2x up-sampling with displacements doubled.
torch::Tensor upsample_flow(const torch::Tensor& flow);

struct MotionField {
  torch::Tensor flow_s;
  torch::Tensor flow_d;

  torch::Tensor concat() const { return torch::cat({flow_s, flow_d}, 1); }
  static MotionField split(const torch::Tensor& four_channels);
};

// Three-level coarse-to-fine flow estimator. Each level predicts a residual
// flow from [cur, warp(ref, flow), flow]; the last layer of every level
// starts at zero, so an untrained net predicts zero motion.
class FlowNetImpl : public torch::nn::Module {
 public:
  explicit FlowNetImpl(int channels);
  torch::Tensor forward(const torch::Tensor& cur, const torch::Tensor& ref);

 private:
  torch::nn::ModuleList levels_;
};
TORCH_MODULE(FlowNet);

// Separate flow nets on the structure and detail components.
class MotionEstimationImpl : public torch::nn::Module {
 public:
  explicit MotionEstimationImpl(const FlowNetConfig& config);
  // Throws kDimMismatch when cur and ref differ in shape.
  MotionField forward(const torch::Tensor& cur, const torch::Tensor& ref);

  FlowNet structure_net{nullptr};
  FlowNet detail_net{nullptr};
};
TORCH_MODULE(MotionEstimation);

// x_tilde = warp(ref_s, flow_s) + warp(ref_d, flow_d).
torch::Tensor motion_compensate(const torch::Tensor& reference, const MotionField& motion);

// 4-channel motion at H x W to C_m channels at H/16 x W/16.
class MotionEncoderImpl : public torch::nn::Module {
 public:
  MotionEncoderImpl(const EncDecConfig& config, int latent_channels, ArchKind kind,
                    const AttentionConfig& attention);
  // Throws kShapeMismatch unless H and W are multiples of 16.
  torch::Tensor forward(const torch::Tensor& motion);

 private:
  torch::nn::Conv2d in_{nullptr}, d1_{nullptr}, d2_{nullptr}, out_{nullptr};
  Body b0_{nullptr}, b1_{nullptr}, b2_{nullptr};
};
TORCH_MODULE(MotionEncoder);

class MotionDecoderImpl : public torch::nn::Module {
 public:
  MotionDecoderImpl(const EncDecConfig& config, int latent_channels, ArchKind kind,
                    const AttentionConfig& attention);
  torch::Tensor forward(const torch::Tensor& latent);

 private:
  SubpixelUp u0_{nullptr}, u1_{nullptr}, u2_{nullptr}, u3_{nullptr};
  Body b0_{nullptr}, b1_{nullptr}, b2_{nullptr};
};
TORCH_MODULE(MotionDecoder);

// Throws kShapeMismatch unless a [B, C, H, W] tensor has H, W divisible by m.
void require_multiple(const torch::Tensor& x, int m, const char* what);

}  // namespace nvc
