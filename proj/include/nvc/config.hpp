#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nvc {

enum class ArchKind { kCnn, kMixed, kTransformer };

std::string_view to_string(ArchKind kind);
ArchKind parse_arch_kind(std::string_view name);

struct FlowNetConfig {
  int channels = 16;
  bool operator==(const FlowNetConfig&) const = default;
};

struct EncDecConfig {
  int channels = 32;
  int res_blocks = 1;
  bool operator==(const EncDecConfig&) const = default;
};

struct MotionEntropyConfig {
  int channels = 32;
  int latent_channels = 32;  // C_m
  int hyper_channels = 16;
  bool operator==(const MotionEntropyConfig&) const = default;
};

struct ContextualEncDecConfig {
  int channels = 32;
  int res_blocks = 1;
  int latent_channels = 32;  // C_y
  bool operator==(const ContextualEncDecConfig&) const = default;
};

struct ContextualEntropyConfig {
  int channels = 32;
  int hyper_channels = 16;
  bool operator==(const ContextualEntropyConfig&) const = default;
};

struct TcmConfig {
  int channels = 16;          // N
  int res_blocks = 1;
  int feature_channels = 16;  // C_F
  bool operator==(const TcmConfig&) const = default;
};

struct IntraConfig {
  int channels = 32;
  int latent_channels = 32;
  int hyper_channels = 16;
  bool operator==(const IntraConfig&) const = default;
};

struct AttentionConfig {
  int window = 8;
  int heads = 4;
  int depth = 1;
  bool operator==(const AttentionConfig&) const = default;
};

// Widths and depths of every coding part. arch_kind applies to the
// contextual encoder-decoder, contextual entropy model and temporal context
// mining; motion_arch applies to the motion encoder-decoder and may not be
// a transformer.
struct ModelConfig {
  FlowNetConfig motion_estimation;
  EncDecConfig motion_enc_dec;
  MotionEntropyConfig motion_entropy;
  ContextualEncDecConfig contextual_enc_dec;
  ContextualEntropyConfig contextual_entropy;
  TcmConfig tcm;
  IntraConfig intra;
  ArchKind arch_kind = ArchKind::kCnn;
  ArchKind motion_arch = ArchKind::kCnn;
  AttentionConfig attention;

  bool operator==(const ModelConfig&) const = default;
};

// Throws Error(kInvalidConfig) naming the offending field, or
// Error(kUnsupportedCombination) for a transformer motion encoder-decoder.
void validate(const ModelConfig& config);

std::string to_json(const ModelConfig& config);
ModelConfig config_from_json(std::string_view text);
ModelConfig load_config(const std::filesystem::path& path);
void save_config(const ModelConfig& config, const std::filesystem::path& path);

namespace presets {
// All channels 32, one residual block, C_m = C_y = 32, C_F = 16.
ModelConfig tiny();
// Small desk-scale model used for training experiments.
ModelConfig toy();
// Allocation mirroring the 1B model: contextual parts and TCM hold almost
// everything, motion parts stay below one percent.
ModelConfig paper_pattern();
ModelConfig by_name(std::string_view name);
}  // namespace presets

enum class SweepAxis { kMotionEncDec, kMotionEntropy, kContextualEncDec, kContextualEntropy, kTcm };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view name);

// Scales the selected axis' channels by each multiplier and adds
// floor(log2(multiplier)) residual blocks where the axis has them.
std::vector<ModelConfig> enumerate_sweep(const ModelConfig& base, SweepAxis axis,
                                         std::span<const double> scales);

}  // namespace nvc
