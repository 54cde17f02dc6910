#pragma once

#include <torch/torch.h>

#include "nvc/config.hpp"

namespace nvc {

torch::Tensor leaky(const torch::Tensor& x);

// Values clamped to [0, 1]; the gradient passes through unchanged.
torch::Tensor clamp_unit(const torch::Tensor& x);

torch::nn::Conv2d conv3(int in, int out, int stride = 1);
torch::nn::Conv2d conv1(int in, int out);

// conv3 - leaky - conv3 plus the input.
class ResBlockImpl : public torch::nn::Module {
 public:
  explicit ResBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d a_{nullptr}, b_{nullptr};
};
TORCH_MODULE(ResBlock);

// Sub-pixel x2 up-sampling: conv3 to 4 * out channels, then pixel shuffle.
class SubpixelUpImpl : public torch::nn::Module {
 public:
  SubpixelUpImpl(int in, int out);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(SubpixelUp);

// Window size actually used on an h x w map: the configured window halved
// until it fits.
int effective_window(int configured, int h, int w);

// Pre-norm windowed multi-head self-attention with shifted windows and a
// relative position bias, followed by a pre-norm MLP (ratio 2, GELU).
class SwinLayerImpl : public torch::nn::Module {
 public:
  SwinLayerImpl(int channels, int heads, int window, bool shifted);
  // x: [B, C, H, W]
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::Tensor attention(const torch::Tensor& x, int window, int shift);

  int channels_, heads_, window_;
  bool shifted_;
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Linear qkv_{nullptr}, proj_{nullptr}, fc1_{nullptr}, fc2_{nullptr};
  torch::Tensor bias_table_;  // [(2w-1)^2, heads]
};
TORCH_MODULE(SwinLayer);

// Space-to-depth by 2 followed by a linear map (transformer down-sampling).
class PatchMergeImpl : public torch::nn::Module {
 public:
  PatchMergeImpl(int in, int out);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::LayerNorm norm_{nullptr};
  torch::nn::Linear linear_{nullptr};
};
TORCH_MODULE(PatchMerge);

// Linear map to 4 * out channels followed by depth-to-space by 2.
class PatchSplitImpl : public torch::nn::Module {
 public:
  PatchSplitImpl(int in, int out);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Linear linear_{nullptr};
};
TORCH_MODULE(PatchSplit);

// Processing body at a fixed width: residual blocks (cnn), residual blocks
// each followed by `depth` Swin layers (mixed), or Swin layers only
// (transformer).
class BodyImpl : public torch::nn::Module {
 public:
  BodyImpl(int channels, int blocks, ArchKind kind, const AttentionConfig& attention);
  torch::Tensor forward(torch::Tensor x);

 private:
  torch::nn::ModuleList layers_;
};
TORCH_MODULE(Body);

// Stride-2 down-sampling for the given architecture.
class DownImpl : public torch::nn::Module {
 public:
  DownImpl(int in, int out, ArchKind kind);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_{nullptr};
  PatchMerge merge_{nullptr};
};
TORCH_MODULE(Down);

class UpImpl : public torch::nn::Module {
 public:
  UpImpl(int in, int out, ArchKind kind);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  SubpixelUp conv_{nullptr};
  PatchSplit split_{nullptr};
};
TORCH_MODULE(Up);

// Channel merge after a concatenation: conv3 (cnn, mixed) or 1x1 (transformer).
torch::nn::Conv2d merge_conv(int in, int out, ArchKind kind);

// x + proj(body(x)) with proj zero-initialised, so the block starts as the
// identity.
class RefineImpl : public torch::nn::Module {
 public:
  RefineImpl(int channels, int blocks, ArchKind kind, const AttentionConfig& attention);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  Body body_{nullptr};
  torch::nn::Conv2d proj_{nullptr};
};
TORCH_MODULE(Refine);

std::int64_t parameter_count(const torch::nn::Module& module);

}  // namespace nvc
