#pragma once

#include <torch/torch.h>

#include "nvc/config.hpp"
#include "nvc/model/layers.hpp"
#include "nvc/model/tcm.hpp"

namespace nvc {

struct Reconstruction {
  torch::Tensor frame;    // [B, 3, H, W] in [0, 1]
  torch::Tensor feature;  // [B, C_F, H, W]
};

// Four stride-2 stages; contexts c0, c1, c2 are concatenated before the
// first three.
class ContextualEncoderImpl : public torch::nn::Module {
 public:
  ContextualEncoderImpl(const ContextualEncDecConfig& config, const TcmConfig& tcm, ArchKind kind,
                        const AttentionConfig& attention);
  // Throws kShapeMismatch for unpadded frames or contexts at the wrong scale.
  torch::Tensor forward(const torch::Tensor& x, const ContextPyramid& ctx);

 private:
  Down d0_{nullptr}, d1_{nullptr}, d2_{nullptr}, d3_{nullptr};
  Body b0_{nullptr}, b1_{nullptr}, b2_{nullptr};
};
TORCH_MODULE(ContextualEncoder);

class ContextualDecoderImpl : public torch::nn::Module {
 public:
  ContextualDecoderImpl(const ContextualEncDecConfig& config, const TcmConfig& tcm, ArchKind kind,
                        const AttentionConfig& attention);
  Reconstruction forward(const torch::Tensor& latent, const ContextPyramid& ctx);

 private:
  Up u0_{nullptr}, u1_{nullptr}, u2_{nullptr}, u3_{nullptr};
  Body b0_{nullptr}, b1_{nullptr}, b2_{nullptr};
  torch::nn::Conv2d m2_{nullptr}, m1_{nullptr}, m0_{nullptr}, rgb_{nullptr};
};
TORCH_MODULE(ContextualDecoder);

// Throws kShapeMismatch unless the pyramid matches an H x W frame.
void check_contexts(const ContextPyramid& ctx, int64_t h, int64_t w, const TcmConfig& tcm);

}  // namespace nvc
