#include "nvc/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "nvc/error.hpp"

namespace nvc {

using nlohmann::json;

std::string_view to_string(ArchKind kind) {
  switch (kind) {
    case ArchKind::kCnn: return "cnn";
    case ArchKind::kMixed: return "mixed_cnn_transformer";
    case ArchKind::kTransformer: return "transformer";
  }
  return "cnn";
}

ArchKind parse_arch_kind(std::string_view name) {
  if (name == "cnn") return ArchKind::kCnn;
  if (name == "mixed" || name == "mixed_cnn_transformer") return ArchKind::kMixed;
  if (name == "transformer") return ArchKind::kTransformer;
  throw Error(ErrorCode::kInvalidConfig, "arch_kind: unknown value '" + std::string(name) + "'");
}

namespace {

void require_at_least(int value, int minimum, const char* field) {
  if (value < minimum) {
    throw Error(ErrorCode::kInvalidConfig, std::string(field) + " must be >= " +
                                               std::to_string(minimum) + ", got " +
                                               std::to_string(value));
  }
}

void require_divisible(int channels, int heads, const char* field) {
  if (channels % heads != 0) {
    throw Error(ErrorCode::kInvalidConfig, std::string(field) + " (" + std::to_string(channels) +
                                               ") not divisible by attention.heads (" +
                                               std::to_string(heads) + ")");
  }
}

}  // namespace

void validate(const ModelConfig& c) {
  require_at_least(c.motion_estimation.channels, 2, "motion_estimation.channels");
  require_at_least(c.motion_enc_dec.channels, 1, "motion_enc_dec.channels");
  require_at_least(c.motion_enc_dec.res_blocks, 1, "motion_enc_dec.res_blocks");
  require_at_least(c.motion_entropy.channels, 1, "motion_entropy.channels");
  require_at_least(c.motion_entropy.latent_channels, 2, "motion_entropy.latent_channels");
  require_at_least(c.motion_entropy.hyper_channels, 1, "motion_entropy.hyper_channels");
  require_at_least(c.contextual_enc_dec.channels, 1, "contextual_enc_dec.channels");
  require_at_least(c.contextual_enc_dec.res_blocks, 1, "contextual_enc_dec.res_blocks");
  require_at_least(c.contextual_enc_dec.latent_channels, 2, "contextual_enc_dec.latent_channels");
  require_at_least(c.contextual_entropy.channels, 1, "contextual_entropy.channels");
  require_at_least(c.contextual_entropy.hyper_channels, 1, "contextual_entropy.hyper_channels");
  require_at_least(c.tcm.channels, 1, "tcm.channels");
  require_at_least(c.tcm.res_blocks, 1, "tcm.res_blocks");
  require_at_least(c.tcm.feature_channels, 2, "tcm.feature_channels");
  require_at_least(c.intra.channels, 1, "intra.channels");
  require_at_least(c.intra.latent_channels, 2, "intra.latent_channels");
  require_at_least(c.intra.hyper_channels, 1, "intra.hyper_channels");
  require_at_least(c.attention.window, 1, "attention.window");
  require_at_least(c.attention.heads, 1, "attention.heads");
  require_at_least(c.attention.depth, 1, "attention.depth");

  if (c.arch_kind != ArchKind::kCnn) {
    require_divisible(c.contextual_enc_dec.channels, c.attention.heads, "contextual_enc_dec.channels");
    require_divisible(c.contextual_entropy.channels, c.attention.heads, "contextual_entropy.channels");
    require_divisible(c.tcm.channels, c.attention.heads, "tcm.channels");
  }
  if (c.motion_arch == ArchKind::kTransformer) {
    throw Error(ErrorCode::kUnsupportedCombination,
                "motion_arch: transformer motion encoder-decoder is not supported");
  }
  if (c.motion_arch == ArchKind::kMixed) {
    require_divisible(c.motion_enc_dec.channels, c.attention.heads, "motion_enc_dec.channels");
  }
}

namespace {

json to_json_value(const ModelConfig& c) {
  return json{
      {"motion_estimation", {{"channels", c.motion_estimation.channels}}},
      {"motion_enc_dec",
       {{"channels", c.motion_enc_dec.channels}, {"res_blocks", c.motion_enc_dec.res_blocks}}},
      {"motion_entropy",
       {{"channels", c.motion_entropy.channels},
        {"latent_channels", c.motion_entropy.latent_channels},
        {"hyper_channels", c.motion_entropy.hyper_channels}}},
      {"contextual_enc_dec",
       {{"channels", c.contextual_enc_dec.channels},
        {"res_blocks", c.contextual_enc_dec.res_blocks},
        {"latent_channels", c.contextual_enc_dec.latent_channels}}},
      {"contextual_entropy",
       {{"channels", c.contextual_entropy.channels},
        {"hyper_channels", c.contextual_entropy.hyper_channels}}},
      {"tcm",
       {{"channels", c.tcm.channels},
        {"res_blocks", c.tcm.res_blocks},
        {"feature_channels", c.tcm.feature_channels}}},
      {"intra",
       {{"channels", c.intra.channels},
        {"latent_channels", c.intra.latent_channels},
        {"hyper_channels", c.intra.hyper_channels}}},
      {"arch_kind", std::string(to_string(c.arch_kind))},
      {"motion_arch", std::string(to_string(c.motion_arch))},
      {"attention",
       {{"window", c.attention.window}, {"heads", c.attention.heads}, {"depth", c.attention.depth}}},
  };
}

// Missing keys keep their defaults so hand-written configs can stay short.
template <typename T>
void read_int(const json& object, const char* section, const char* key, T& out) {
  if (!object.contains(section)) return;
  const json& s = object.at(section);
  if (!s.is_object()) {
    throw Error(ErrorCode::kInvalidConfig, std::string(section) + " must be an object");
  }
  if (!s.contains(key)) return;
  const json& v = s.at(key);
  if (!v.is_number_integer()) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string(section) + "." + key + " must be an integer");
  }
  out = v.get<T>();
}

}  // namespace

std::string to_json(const ModelConfig& config) { return to_json_value(config).dump(2); }

ModelConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("parse error: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, "config root must be an object");

  ModelConfig c;
  read_int(j, "motion_estimation", "channels", c.motion_estimation.channels);
  read_int(j, "motion_enc_dec", "channels", c.motion_enc_dec.channels);
  read_int(j, "motion_enc_dec", "res_blocks", c.motion_enc_dec.res_blocks);
  read_int(j, "motion_entropy", "channels", c.motion_entropy.channels);
  read_int(j, "motion_entropy", "latent_channels", c.motion_entropy.latent_channels);
  read_int(j, "motion_entropy", "hyper_channels", c.motion_entropy.hyper_channels);
  read_int(j, "contextual_enc_dec", "channels", c.contextual_enc_dec.channels);
  read_int(j, "contextual_enc_dec", "res_blocks", c.contextual_enc_dec.res_blocks);
  read_int(j, "contextual_enc_dec", "latent_channels", c.contextual_enc_dec.latent_channels);
  read_int(j, "contextual_entropy", "channels", c.contextual_entropy.channels);
  read_int(j, "contextual_entropy", "hyper_channels", c.contextual_entropy.hyper_channels);
  read_int(j, "tcm", "channels", c.tcm.channels);
  read_int(j, "tcm", "res_blocks", c.tcm.res_blocks);
  read_int(j, "tcm", "feature_channels", c.tcm.feature_channels);
  read_int(j, "intra", "channels", c.intra.channels);
  read_int(j, "intra", "latent_channels", c.intra.latent_channels);
  read_int(j, "intra", "hyper_channels", c.intra.hyper_channels);
  read_int(j, "attention", "window", c.attention.window);
  read_int(j, "attention", "heads", c.attention.heads);
  read_int(j, "attention", "depth", c.attention.depth);
  if (j.contains("arch_kind")) c.arch_kind = parse_arch_kind(j.at("arch_kind").get<std::string>());
  if (j.contains("motion_arch")) {
    c.motion_arch = parse_arch_kind(j.at("motion_arch").get<std::string>());
  }
  return c;
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json(buffer.str());
}

void save_config(const ModelConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write config " + path.string());
  out << to_json(config) << '\n';
}

namespace presets {

ModelConfig tiny() {
  ModelConfig c;
  c.motion_estimation = {32};
  c.motion_enc_dec = {32, 1};
  c.motion_entropy = {32, 32, 32};
  c.contextual_enc_dec = {32, 1, 32};
  c.contextual_entropy = {32, 32};
  c.tcm = {32, 1, 16};
  c.intra = {32, 32, 32};
  return c;
}

ModelConfig toy() {
  ModelConfig c;
  c.motion_estimation = {12};
  c.motion_enc_dec = {16, 1};
  c.motion_entropy = {16, 16, 8};
  c.contextual_enc_dec = {16, 1, 24};
  c.contextual_entropy = {16, 8};
  c.tcm = {8, 1, 8};
  c.intra = {24, 24, 8};
  c.attention = {8, 2, 1};
  return c;
}

ModelConfig paper_pattern() {
  ModelConfig c;
  c.motion_estimation = {8};
  c.motion_enc_dec = {16, 1};
  c.motion_entropy = {16, 16, 8};
  c.contextual_enc_dec = {128, 3, 96};
  c.contextual_entropy = {272, 64};
  c.tcm = {56, 3, 48};
  c.intra = {32, 32, 16};
  return c;
}

ModelConfig by_name(std::string_view name) {
  if (name == "tiny") return tiny();
  if (name == "toy") return toy();
  if (name == "paper-pattern" || name == "paper_pattern") return paper_pattern();
  throw Error(ErrorCode::kInvalidConfig, "unknown preset '" + std::string(name) + "'");
}

}  // namespace presets

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kMotionEncDec: return "motion_ed";
    case SweepAxis::kMotionEntropy: return "motion_em";
    case SweepAxis::kContextualEncDec: return "ctx_ed";
    case SweepAxis::kContextualEntropy: return "ctx_em";
    case SweepAxis::kTcm: return "tcm";
  }
  return "motion_ed";
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "motion_ed") return SweepAxis::kMotionEncDec;
  if (name == "motion_em") return SweepAxis::kMotionEntropy;
  if (name == "ctx_ed") return SweepAxis::kContextualEncDec;
  if (name == "ctx_em") return SweepAxis::kContextualEntropy;
  if (name == "tcm") return SweepAxis::kTcm;
  throw Error(ErrorCode::kInvalidConfig, "unknown sweep axis '" + std::string(name) + "'");
}

namespace {

int scale_channels(int base, double s, int granule) {
  const double target = base * s;
  int scaled = static_cast<int>(std::lround(target / granule)) * granule;
  return std::max(scaled, base);
}

int scale_blocks(int base, double s) {
  return base + static_cast<int>(std::floor(std::log2(s) + 1e-9));
}

}  // namespace

std::vector<ModelConfig> enumerate_sweep(const ModelConfig& base, SweepAxis axis,
                                         std::span<const double> scales) {
  if (scales.empty()) throw Error(ErrorCode::kEmptyScales, "sweep needs at least one multiplier");
  validate(base);
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!std::isfinite(scales[i]) || scales[i] < 1.0) {
      throw Error(ErrorCode::kInvalidConfig, "sweep multipliers must be finite and >= 1");
    }
    if (i > 0 && scales[i] <= scales[i - 1]) {
      throw Error(ErrorCode::kInvalidConfig, "sweep multipliers must be strictly increasing");
    }
  }

  const bool attention = base.arch_kind != ArchKind::kCnn;
  const int granule = attention ? base.attention.heads : 1;
  const int motion_granule = base.motion_arch == ArchKind::kMixed ? base.attention.heads : 1;

  std::vector<ModelConfig> out;
  out.reserve(scales.size());
  for (double s : scales) {
    ModelConfig c = base;
    switch (axis) {
      case SweepAxis::kMotionEncDec:
        c.motion_enc_dec.channels = scale_channels(base.motion_enc_dec.channels, s, motion_granule);
        c.motion_enc_dec.res_blocks = scale_blocks(base.motion_enc_dec.res_blocks, s);
        break;
      case SweepAxis::kMotionEntropy:
        c.motion_entropy.channels = scale_channels(base.motion_entropy.channels, s, 1);
        c.motion_entropy.hyper_channels = scale_channels(base.motion_entropy.hyper_channels, s, 1);
        break;
      case SweepAxis::kContextualEncDec:
        c.contextual_enc_dec.channels = scale_channels(base.contextual_enc_dec.channels, s, granule);
        c.contextual_enc_dec.res_blocks = scale_blocks(base.contextual_enc_dec.res_blocks, s);
        break;
      case SweepAxis::kContextualEntropy:
        c.contextual_entropy.channels = scale_channels(base.contextual_entropy.channels, s, granule);
        c.contextual_entropy.hyper_channels =
            scale_channels(base.contextual_entropy.hyper_channels, s, 1);
        break;
      case SweepAxis::kTcm:
        c.tcm.channels = scale_channels(base.tcm.channels, s, granule);
        c.tcm.res_blocks = scale_blocks(base.tcm.res_blocks, s);
        break;
    }
    if (!out.empty() && c == out.back()) {
      throw Error(ErrorCode::kInvalidConfig,
                  "sweep multipliers too close: two points round to the same configuration");
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace nvc
