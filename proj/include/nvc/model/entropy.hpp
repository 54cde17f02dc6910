#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "nvc/config.hpp"
#include "nvc/model/layers.hpp"
#include "nvc/range_coder.hpp"

namespace nvc {

inline constexpr double kScaleMin = 0.011;
inline constexpr double kProbFloor = 1.0 / 65536.0;
inline constexpr int kHyperHalfWidth = 64;

// Ties round away from zero.
torch::Tensor round_half_away(const torch::Tensor& x);
// round_half_away in the forward pass, identity gradient.
torch::Tensor round_ste(const torch::Tensor& x);

enum class QuantMode { kTrain, kInfer };

// kTrain: values + U[-0.5, 0.5); kInfer: round(values - mean) + mean.
torch::Tensor quantize(const torch::Tensor& values, const torch::Tensor& mean, QuantMode mode);

// -log2 of the Laplace(mean, scale) mass on [q - 0.5, q + 0.5], with the
// probability floored at 2^-16. Differentiable in q, mean and scale; works in
// any floating dtype.
torch::Tensor laplace_bits(const torch::Tensor& q, const torch::Tensor& mean, const torch::Tensor& scale);
double laplace_bits(double delta, double scale);

// Coding scales: a geometric ladder from kScaleMin; sigma maps to the
// nearest rung in log space.
int scale_index(double sigma);
double scale_of_index(int index);
const CdfTable& scale_table(int index);
int scale_table_count();

// ---------------------------------------------------------------------------
// Quadtree schedule: the 2x2 spatial phases (0,0), (1,1), (0,1), (1,0) form
// groups 1..4, decoded in that order.

inline constexpr int kQuadtreeSteps = 4;
inline constexpr std::array<std::pair<int, int>, kQuadtreeSteps> kQuadtreePhases{
    {{0, 0}, {1, 1}, {0, 1}, {1, 0}}};

struct QuadtreeSchedule {
  int height = 0;
  int width = 0;
  // (row, col) positions of each group, row-major within a group.
  std::array<std::vector<std::pair<int, int>>, kQuadtreeSteps> groups;
};

// Throws kOddDimensions when h or w is odd.
QuadtreeSchedule quadtree_partition(int h, int w);

// [1, 1, h, w] indicator of group `step` (0-based).
torch::Tensor quadtree_mask(int64_t h, int64_t w, int step, const torch::TensorOptions& options);
// Union of groups before `step`.
torch::Tensor quadtree_decoded_mask(int64_t h, int64_t w, int step, const torch::TensorOptions& options);

// ---------------------------------------------------------------------------

// Learned per-channel monotone CDF (stack of softplus-weighted affine maps
// with tanh gates, filters (3, 3, 3, 3)).
class FactorizedPriorImpl : public torch::nn::Module {
 public:
  explicit FactorizedPriorImpl(int channels);

  // x: [C, 1, N] -> logits of the CDF, same shape.
  torch::Tensor logits_cdf(const torch::Tensor& x);
  // z: [B, C, H, W] -> per-element bits.
  torch::Tensor bits(const torch::Tensor& z);
  // One table per channel over [-half_width, half_width], tails folded.
  std::vector<CdfTable> tables(int half_width = kHyperHalfWidth);

  int channels() const { return channels_; }

 private:
  int channels_;
  std::vector<torch::Tensor> matrices_, biases_, factors_;
};
TORCH_MODULE(FactorizedPrior);

struct DistributionParams {
  torch::Tensor mean;
  torch::Tensor scale;
};

// Priors beyond the hyperprior; undefined tensors mean "not used".
struct EntropyPriors {
  torch::Tensor latent;    // previous quantized latent, C channels at the latent grid
  torch::Tensor temporal;  // smallest context c2, at 4x the latent grid
};

struct LatentTrainOutput {
  torch::Tensor y_hat;        // decoder input (rounded, straight-through)
  torch::Tensor latent_bits;  // [B, C, h, w]
  torch::Tensor hyper_bits;   // [B, C_h, h/4, w/4]
};

struct CodedLatent {
  torch::Tensor y_hat;
  std::vector<std::uint8_t> hyper_bytes;
  std::vector<std::uint8_t> latent_bytes;
  double estimated_hyper_bits = 0.0;
  double estimated_latent_bits = 0.0;
  torch::Tensor latent_bits;  // [C, h, w] estimated bits per element
};

// Hyperprior, latent prior, quadtree spatial prior and optional temporal
// prior fused into per-element Laplace parameters.
class LatentEntropyModelImpl : public torch::nn::Module {
 public:
  LatentEntropyModelImpl(int latent_channels, int channels, int hyper_channels, int temporal_channels,
                         bool use_latent_prior, ArchKind kind, const AttentionConfig& attention);

  // Rates use additive noise in training mode and rounding in eval mode.
  LatentTrainOutput forward(const torch::Tensor& y, const EntropyPriors& priors);

  // Batch size 1. The returned y_hat equals what decompress produces.
  CodedLatent compress(const torch::Tensor& y, const EntropyPriors& priors);
  // Returns y_hat and the per-element estimated bits [C, h, w].
  std::pair<torch::Tensor, torch::Tensor> decompress(const std::vector<std::uint8_t>& hyper_bytes,
                                                     const std::vector<std::uint8_t>& latent_bytes,
                                                     int64_t h, int64_t w, const EntropyPriors& priors);

  torch::Tensor hyper_analysis(const torch::Tensor& y);
  torch::Tensor hyper_synthesis(const torch::Tensor& z_hat);

  // Throws kAlignmentMismatch when a prior is off the latent grid or a
  // required prior is missing.
  DistributionParams predict_params(const torch::Tensor& hyper, const torch::Tensor& spatial,
                                    const EntropyPriors& priors);
  // Parameters for quadtree step `step` given the latent decoded so far
  // (only groups before `step` are read).
  DistributionParams step_params(int step, const torch::Tensor& hyper, const torch::Tensor& decoded,
                                 const EntropyPriors& priors);

  int latent_channels() const { return latent_channels_; }
  bool uses_temporal_prior() const { return temporal_channels_ > 0; }
  bool uses_latent_prior() const { return use_latent_prior_; }

  FactorizedPrior factorized{nullptr};

 private:
  enum class Direction { kEncode, kDecode };
  // Shared encoder/decoder path; exactly one of y (encode) and the byte
  // buffers (decode) is used.
  CodedLatent run(Direction direction, const torch::Tensor& y, const std::vector<std::uint8_t>* hyper_bytes,
                  const std::vector<std::uint8_t>* latent_bytes, int64_t h, int64_t w,
                  const EntropyPriors& priors);

  int latent_channels_, channels_, hyper_channels_, temporal_channels_;
  bool use_latent_prior_;
  torch::nn::Conv2d ha0_{nullptr}, ha1_{nullptr}, ha2_{nullptr};
  SubpixelUp hs0_{nullptr}, hs1_{nullptr};
  torch::nn::Conv2d hs2_{nullptr};
  torch::nn::Conv2d tp0_{nullptr}, tp1_{nullptr};
  torch::nn::ModuleList spatial_;
  torch::nn::Conv2d fuse_in_{nullptr}, fuse_out_{nullptr};
  Body fuse_body_{nullptr};
};
TORCH_MODULE(LatentEntropyModel);

}  // namespace nvc
