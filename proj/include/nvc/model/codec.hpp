#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "nvc/config.hpp"
#include "nvc/frame.hpp"
#include "nvc/loss.hpp"
#include "nvc/model/contextual.hpp"
#include "nvc/model/entropy.hpp"
#include "nvc/model/motion.hpp"
#include "nvc/model/tcm.hpp"

namespace nvc {

// Mean-scale hyperprior image codec for I-frames. Produces the reference
// feature for the first P-frame.
class IntraCodecImpl : public torch::nn::Module {
 public:
  IntraCodecImpl(const IntraConfig& config, int feature_channels, const AttentionConfig& attention);

  torch::Tensor analysis(const torch::Tensor& x);
  Reconstruction synthesis(const torch::Tensor& y_hat);

  LatentEntropyModel entropy{nullptr};

 private:
  torch::nn::Sequential encoder_{nullptr};
  torch::nn::Sequential decoder_{nullptr};
  torch::nn::Conv2d rgb_{nullptr};
};
TORCH_MODULE(IntraCodec);

// Decoder-side state carried from frame to frame.
struct FrameState {
  torch::Tensor frame;          // x_hat of the previous frame
  torch::Tensor feature;        // F_hat of the previous frame
  LongTermState long_term;      // zeros after an intra frame
  torch::Tensor motion_prior;   // previous m_hat, zeros at GOP start
  torch::Tensor context_prior;  // previous y_hat, zeros at GOP start
  int p_index = 0;              // P-frames coded since the last intra frame

  bool defined() const { return frame.defined(); }
  FrameState detached() const;
};

struct IntraForward {
  Reconstruction recon;
  torch::Tensor rate;        // [B] bits per pixel
  torch::Tensor distortion;  // scalar MSE
  FrameState state;
};

struct InterForward {
  torch::Tensor warped;        // x_tilde
  torch::Tensor d_m, d_y;      // scalar MSE
  torch::Tensor r_m, r_y;      // [B] bits per pixel
  Reconstruction recon;        // undefined for motion-only passes
  FrameState state;
  torch::Tensor motion_latent_bits;   // [B, C_m, h, w]
  torch::Tensor context_latent_bits;  // [B, C_y, h, w]
};

struct ParamReport {
  std::vector<std::pair<std::string, std::int64_t>> per_module;
  std::int64_t total = 0;

  std::int64_t at(const std::string& name) const;
};

class CodecModelImpl : public torch::nn::Module {
 public:
  explicit CodecModelImpl(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  IntraForward intra_forward(const torch::Tensor& x);
  // motion_only skips TCM and the contextual parts (meD / meRD stages).
  InterForward inter_forward(const torch::Tensor& x, const FrameState& state, bool motion_only = false);

  // Parameters of the named module groups (see module_names()).
  std::vector<torch::Tensor> group_parameters(const std::vector<std::string>& names);

  MotionEstimation motion_estimation{nullptr};
  MotionEncoder motion_encoder{nullptr};
  MotionDecoder motion_decoder{nullptr};
  LatentEntropyModel motion_entropy{nullptr};
  TemporalContextMining tcm{nullptr};
  ContextualEncoder contextual_encoder{nullptr};
  ContextualDecoder contextual_decoder{nullptr};
  LatentEntropyModel contextual_entropy{nullptr};
  IntraCodec intra{nullptr};

 private:
  ModelConfig config_;
};
TORCH_MODULE(CodecModel);

inline const std::vector<std::string>& module_names() {
  static const std::vector<std::string> names{"motion_estimation", "motion_enc_dec",     "motion_entropy",
                                              "contextual_enc_dec", "contextual_entropy", "tcm",
                                              "intra"};
  return names;
}

// Validates the config and builds the model with a seeded initialisation.
CodecModel build_model(const ModelConfig& config, std::uint64_t seed = 0);
ParamReport count_parameters(CodecModel& model);

// Module groups trained by a scope; cascaded stages also train the intra codec.
std::vector<std::string> scope_modules(TrainScope scope, bool include_intra);

// Zero priors and long-term state for the first P-frame after an intra frame.
FrameState intra_state(const Reconstruction& recon, const ModelConfig& config);

// [1, 3, H, W] float tensor from a frame and back.
torch::Tensor frame_to_tensor(const Frame& frame);
Frame tensor_to_frame(const torch::Tensor& t);
// Stacks clip frames [B][T] into T tensors of [B, 3, H, W].
std::vector<torch::Tensor> stack_clips(const std::vector<std::vector<Frame>>& clips);

}  // namespace nvc
