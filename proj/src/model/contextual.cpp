#include "nvc/model/contextual.hpp"

#include <string>

#include "nvc/error.hpp"
#include "nvc/model/motion.hpp"

namespace nvc {

void check_contexts(const ContextPyramid& ctx, int64_t h, int64_t w, const TcmConfig& tcm) {
  for (int l = 0; l < kContextLevels; ++l) {
    const auto& c = ctx[l];
    if (!c.defined() || c.dim() != 4 || c.size(1) != context_channels(tcm, l) ||
        c.size(2) != (h >> l) || c.size(3) != (w >> l)) {
      throw Error(ErrorCode::kShapeMismatch,
                  "context level " + std::to_string(l) + " does not match a " + std::to_string(h) + "x" +
                      std::to_string(w) + " frame");
    }
  }
}

ContextualEncoderImpl::ContextualEncoderImpl(const ContextualEncDecConfig& config, const TcmConfig& tcm,
                                             ArchKind kind, const AttentionConfig& attention) {
  const int c = config.channels;
  const int b = config.res_blocks;
  d0_ = register_module("d0", Down(3 + context_channels(tcm, 0), c, kind));
  b0_ = register_module("b0", Body(c, b, kind, attention));
  d1_ = register_module("d1", Down(c + context_channels(tcm, 1), c, kind));
  b1_ = register_module("b1", Body(c, b, kind, attention));
  d2_ = register_module("d2", Down(c + context_channels(tcm, 2), c, kind));
  b2_ = register_module("b2", Body(c, b, kind, attention));
  d3_ = register_module("d3", Down(c, config.latent_channels, kind));
}

torch::Tensor ContextualEncoderImpl::forward(const torch::Tensor& x, const ContextPyramid& ctx) {
  require_multiple(x, 16, "contextual encoder");
  for (int l = 0; l < kContextLevels; ++l) {
    if (!ctx[l].defined() || ctx[l].size(2) != (x.size(2) >> l) || ctx[l].size(3) != (x.size(3) >> l)) {
      throw Error(ErrorCode::kShapeMismatch, "context level " + std::to_string(l) + " has the wrong scale");
    }
  }
  auto h = b0_(d0_(torch::cat({x, ctx[0]}, 1)));
  h = b1_(d1_(torch::cat({h, ctx[1]}, 1)));
  h = b2_(d2_(torch::cat({h, ctx[2]}, 1)));
  return d3_(h);
}

ContextualDecoderImpl::ContextualDecoderImpl(const ContextualEncDecConfig& config, const TcmConfig& tcm,
                                             ArchKind kind, const AttentionConfig& attention) {
  const int c = config.channels;
  const int b = config.res_blocks;
  u0_ = register_module("u0", Up(config.latent_channels, c, kind));
  b0_ = register_module("b0", Body(c, b, kind, attention));
  u1_ = register_module("u1", Up(c, c, kind));
  m2_ = register_module("m2", merge_conv(c + context_channels(tcm, 2), c, kind));
  b1_ = register_module("b1", Body(c, b, kind, attention));
  u2_ = register_module("u2", Up(c, c, kind));
  m1_ = register_module("m1", merge_conv(c + context_channels(tcm, 1), c, kind));
  b2_ = register_module("b2", Body(c, b, kind, attention));
  u3_ = register_module("u3", Up(c, c, kind));
  m0_ = register_module("m0", merge_conv(c + context_channels(tcm, 0), tcm.feature_channels, kind));
  rgb_ = register_module("rgb", conv3(tcm.feature_channels, 3));
}

Reconstruction ContextualDecoderImpl::forward(const torch::Tensor& latent, const ContextPyramid& ctx) {
  const auto h = latent.size(2) * 16, w = latent.size(3) * 16;
  for (int l = 0; l < kContextLevels; ++l) {
    if (!ctx[l].defined() || ctx[l].size(2) != (h >> l) || ctx[l].size(3) != (w >> l)) {
      throw Error(ErrorCode::kShapeMismatch, "context level " + std::to_string(l) + " has the wrong scale");
    }
  }
  auto x = b0_(u0_(latent));
  x = b1_(m2_(torch::cat({u1_(x), ctx[2]}, 1)));
  x = b2_(m1_(torch::cat({u2_(x), ctx[1]}, 1)));
  auto feature = m0_(torch::cat({u3_(x), ctx[0]}, 1));
  auto frame = clamp_unit(rgb_(leaky(feature)));
  return {frame, feature};
}

}  // namespace nvc
