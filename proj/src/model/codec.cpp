#include "nvc/model/codec.hpp"

#include "nvc/error.hpp"

namespace nvc {

IntraCodecImpl::IntraCodecImpl(const IntraConfig& config, int feature_channels, const AttentionConfig& attention) {
  const int c = config.channels;
  encoder_ = register_module(
      "encoder", torch::nn::Sequential(conv3(3, c, 2), ResBlock(c), conv3(c, c, 2), ResBlock(c), conv3(c, c, 2),
                                       ResBlock(c), conv3(c, config.latent_channels, 2)));
  decoder_ = register_module(
      "decoder", torch::nn::Sequential(SubpixelUp(config.latent_channels, c), ResBlock(c), SubpixelUp(c, c),
                                       ResBlock(c), SubpixelUp(c, c), ResBlock(c), SubpixelUp(c, feature_channels)));
  rgb_ = register_module("rgb", conv3(feature_channels, 3));
  entropy = register_module("entropy", LatentEntropyModel(config.latent_channels, c, config.hyper_channels, 0, false,
                                                          ArchKind::kCnn, attention));
}

torch::Tensor IntraCodecImpl::analysis(const torch::Tensor& x) {
  require_multiple(x, 64, "intra encoder");
  return encoder_->forward(x);
}

Reconstruction IntraCodecImpl::synthesis(const torch::Tensor& y_hat) {
  auto feature = decoder_->forward(y_hat);
  return {clamp_unit(rgb_(leaky(feature))), feature};
}

FrameState FrameState::detached() const {
  FrameState s = *this;
  auto d = [](torch::Tensor& t) {
    if (t.defined()) t = t.detach();
  };
  d(s.frame);
  d(s.feature);
  d(s.long_term.hidden);
  d(s.long_term.cell);
  d(s.motion_prior);
  d(s.context_prior);
  return s;
}

std::int64_t ParamReport::at(const std::string& name) const {
  for (const auto& [n, v] : per_module) {
    if (n == name) return v;
  }
  throw Error(ErrorCode::kInvalidConfig, "no module named " + name);
}

CodecModelImpl::CodecModelImpl(const ModelConfig& config) : config_(config) {
  const auto& a = config.attention;
  const auto kind = config.arch_kind;
  motion_estimation = register_module("motion_estimation", MotionEstimation(config.motion_estimation));
  motion_encoder = register_module(
      "motion_encoder", MotionEncoder(config.motion_enc_dec, config.motion_entropy.latent_channels, config.motion_arch, a));
  motion_decoder = register_module(
      "motion_decoder", MotionDecoder(config.motion_enc_dec, config.motion_entropy.latent_channels, config.motion_arch, a));
  motion_entropy = register_module(
      "motion_entropy", LatentEntropyModel(config.motion_entropy.latent_channels, config.motion_entropy.channels,
                                           config.motion_entropy.hyper_channels, 0, true, ArchKind::kCnn, a));
  tcm = register_module("tcm", TemporalContextMining(config.tcm, kind, a));
  contextual_encoder =
      register_module("contextual_encoder", ContextualEncoder(config.contextual_enc_dec, config.tcm, kind, a));
  contextual_decoder =
      register_module("contextual_decoder", ContextualDecoder(config.contextual_enc_dec, config.tcm, kind, a));
  contextual_entropy = register_module(
      "contextual_entropy",
      LatentEntropyModel(config.contextual_enc_dec.latent_channels, config.contextual_entropy.channels,
                         config.contextual_entropy.hyper_channels, context_channels(config.tcm, 2), true, kind, a));
  intra = register_module("intra", IntraCodec(config.intra, config.tcm.feature_channels, a));
}

namespace {

torch::Tensor per_pixel(const torch::Tensor& bits, int64_t pixels) {
  return bits.sum({1, 2, 3}) / static_cast<double>(pixels);
}

torch::Tensor zeros_latent(const torch::Tensor& x, int channels) {
  return torch::zeros({x.size(0), channels, x.size(2) / 16, x.size(3) / 16}, x.options());
}

}  // namespace

FrameState intra_state(const Reconstruction& recon, const ModelConfig& config) {
  FrameState s;
  s.frame = recon.frame;
  s.feature = recon.feature;
  const auto& f = recon.feature;
  s.long_term = LongTermState::zeros(f.size(0), f.size(1), f.size(2), f.size(3), f.options());
  s.motion_prior = zeros_latent(recon.frame, config.motion_entropy.latent_channels);
  s.context_prior = zeros_latent(recon.frame, config.contextual_enc_dec.latent_channels);
  s.p_index = 0;
  return s;
}

IntraForward CodecModelImpl::intra_forward(const torch::Tensor& x) {
  auto y = intra->analysis(x);
  auto e = intra->entropy(y, EntropyPriors{});
  auto recon = intra->synthesis(e.y_hat);
  const int64_t pixels = x.size(2) * x.size(3);
  IntraForward out;
  out.rate = per_pixel(e.latent_bits, pixels) + per_pixel(e.hyper_bits, pixels);
  out.distortion = torch::mse_loss(recon.frame, x);
  out.state = intra_state(recon, config_);
  out.recon = std::move(recon);
  return out;
}

InterForward CodecModelImpl::inter_forward(const torch::Tensor& x, const FrameState& state, bool motion_only) {
  if (!state.defined()) throw Error(ErrorCode::kShapeMismatch, "inter frame needs a reference state");
  require_multiple(x, 64, "inter frame");
  const int64_t pixels = x.size(2) * x.size(3);
  InterForward out;

  auto motion = motion_estimation(x, state.frame);
  auto m = motion_encoder(motion.concat());
  auto motion_prior =
      state.motion_prior.defined() ? state.motion_prior : zeros_latent(x, config_.motion_entropy.latent_channels);
  auto me = motion_entropy(m, EntropyPriors{motion_prior, {}});
  auto decoded_motion = MotionField::split(motion_decoder(me.y_hat));
  out.warped = motion_compensate(state.frame, decoded_motion);
  out.d_m = torch::mse_loss(out.warped, x);
  out.r_m = per_pixel(me.latent_bits, pixels) + per_pixel(me.hyper_bits, pixels);
  out.motion_latent_bits = me.latent_bits;
  out.state = state;
  out.state.motion_prior = me.y_hat;
  out.state.p_index = state.p_index + 1;
  if (motion_only) return out;

  auto t = tcm(state.feature, state.long_term, decoded_motion);
  auto y = contextual_encoder(x, t.contexts);
  auto context_prior =
      state.context_prior.defined() ? state.context_prior : zeros_latent(x, config_.contextual_enc_dec.latent_channels);
  auto ce = contextual_entropy(y, EntropyPriors{context_prior, t.contexts[2]});
  out.recon = contextual_decoder(ce.y_hat, t.contexts);
  out.d_y = torch::mse_loss(out.recon.frame, x);
  out.r_y = per_pixel(ce.latent_bits, pixels) + per_pixel(ce.hyper_bits, pixels);
  out.context_latent_bits = ce.latent_bits;
  out.state.frame = out.recon.frame;
  out.state.feature = out.recon.feature;
  out.state.long_term = t.state;
  out.state.context_prior = ce.y_hat;
  return out;
}

std::vector<torch::Tensor> CodecModelImpl::group_parameters(const std::vector<std::string>& names) {
  std::vector<torch::Tensor> params;
  auto add = [&](torch::nn::Module& m) {
    for (auto& p : m.parameters()) params.push_back(p);
  };
  for (const auto& n : names) {
    if (n == "motion_estimation") {
      add(*motion_estimation);
    } else if (n == "motion_enc_dec") {
      add(*motion_encoder);
      add(*motion_decoder);
    } else if (n == "motion_entropy") {
      add(*motion_entropy);
    } else if (n == "contextual_enc_dec") {
      add(*contextual_encoder);
      add(*contextual_decoder);
    } else if (n == "contextual_entropy") {
      add(*contextual_entropy);
    } else if (n == "tcm") {
      add(*tcm);
    } else if (n == "intra") {
      add(*intra);
    } else {
      throw Error(ErrorCode::kInvalidConfig, "unknown module group " + n);
    }
  }
  return params;
}

CodecModel build_model(const ModelConfig& config, std::uint64_t seed) {
  validate(config);
  torch::manual_seed(seed);
  return CodecModel(config);
}

ParamReport count_parameters(CodecModel& model) {
  ParamReport r;
  for (const auto& name : module_names()) {
    std::int64_t n = 0;
    for (const auto& p : model->group_parameters({name})) n += p.numel();
    r.per_module.emplace_back(name, n);
    r.total += n;
  }
  return r;
}

std::vector<std::string> scope_modules(TrainScope scope, bool include_intra) {
  std::vector<std::string> names;
  switch (scope) {
    case TrainScope::kInter:
      names = {"motion_estimation", "motion_enc_dec", "motion_entropy"};
      break;
    case TrainScope::kRecon:
      names = {"tcm", "contextual_enc_dec", "contextual_entropy"};
      break;
    case TrainScope::kAll:
      names = {"motion_estimation", "motion_enc_dec", "motion_entropy", "tcm", "contextual_enc_dec",
               "contextual_entropy"};
      break;
  }
  if (include_intra) names.push_back("intra");
  return names;
}

torch::Tensor frame_to_tensor(const Frame& frame) {
  auto t = torch::empty({1, 3, frame.height, frame.width}, torch::kFloat32);
  auto* p = t.data_ptr<float>();
  for (std::size_t i = 0; i < frame.data.size(); ++i) p[i] = static_cast<float>(frame.data[i]);
  return t;
}

Frame tensor_to_frame(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat64).contiguous();
  Frame f(static_cast<int>(c.size(-1)), static_cast<int>(c.size(-2)));
  const double* p = c.data_ptr<double>();
  std::copy(p, p + f.data.size(), f.data.begin());
  return f;
}

std::vector<torch::Tensor> stack_clips(const std::vector<std::vector<Frame>>& clips) {
  if (clips.empty()) return {};
  const std::size_t frames = clips.front().size();
  std::vector<torch::Tensor> out;
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<torch::Tensor> batch;
    for (const auto& clip : clips) batch.push_back(frame_to_tensor(clip.at(t)));
    out.push_back(torch::cat(batch, 0));
  }
  return out;
}

}  // namespace nvc
