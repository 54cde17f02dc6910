#include "nvc/model/motion.hpp"

#include <cmath>
#include <string>

#include "nvc/error.hpp"

namespace nvc {

namespace F = torch::nn::functional;

namespace {

std::string shape_string(const torch::Tensor& x) {
  std::string s = "[";
  for (int i = 0; i < x.dim(); ++i) s += (i ? "," : "") + std::to_string(x.size(i));
  return s + "]";
}

}  // namespace

void require_multiple(const torch::Tensor& x, int m, const char* what) {
  if (x.dim() != 4 || x.size(2) % m != 0 || x.size(3) % m != 0) {
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + " needs H, W divisible by " +
                                               std::to_string(m) + ", got " + shape_string(x));
  }
}

torch::Tensor gaussian_kernel() {
  auto k = torch::arange(-2, 3, torch::kFloat32);
  auto g = torch::exp(-(k * k) / (2.0 * 1.5 * 1.5));
  g = g / g.sum();
  return torch::outer(g, g);
}

StructureDetail decompose_structure_detail(const torch::Tensor& x) {
  const auto c = x.size(1);
  auto kernel = gaussian_kernel().to(x.dtype()).view({1, 1, 5, 5}).repeat({c, 1, 1, 1});
  auto padded = F::pad(x, F::PadFuncOptions({2, 2, 2, 2}).mode(torch::kReplicate));
  auto structure = F::conv2d(padded, kernel, F::Conv2dFuncOptions().groups(c));
  return {structure, x - structure};
}

torch::Tensor warp(const torch::Tensor& source, const torch::Tensor& flow) {
  const auto B = source.size(0), C = source.size(1), H = source.size(2), W = source.size(3);
  auto opts = source.options();
  auto gx = torch::arange(W, opts).view({1, 1, W}) + flow.select(1, 0);
  auto gy = torch::arange(H, opts).view({1, H, 1}) + flow.select(1, 1);
  gx = gx.clamp(0, W - 1);
  gy = gy.clamp(0, H - 1);
  auto x0f = gx.floor().detach();
  auto y0f = gy.floor().detach();
  auto wx = (gx - x0f).unsqueeze(1);
  auto wy = (gy - y0f).unsqueeze(1);
  // Non-finite coordinates sample index 0 and keep their NaN weights.
  auto x0 = torch::nan_to_num(x0f, 0.0, 0.0, 0.0).to(torch::kLong);
  auto y0 = torch::nan_to_num(y0f, 0.0, 0.0, 0.0).to(torch::kLong);
  auto x1 = (x0 + 1).clamp_max(W - 1);
  auto y1 = (y0 + 1).clamp_max(H - 1);

  auto flat = source.reshape({B, C, H * W});
  auto sample = [&](const torch::Tensor& yi, const torch::Tensor& xi) {
    auto idx = (yi * W + xi).view({B, 1, H * W}).expand({B, C, H * W});
    return flat.gather(2, idx).view({B, C, H, W});
  };
  auto top = sample(y0, x0) * (1 - wx) + sample(y0, x1) * wx;
  auto bottom = sample(y1, x0) * (1 - wx) + sample(y1, x1) * wx;
  return top * (1 - wy) + bottom * wy;
}

torch::Tensor downsample_flow(const torch::Tensor& flow) {
  return F::avg_pool2d(flow, F::AvgPool2dFuncOptions(2)) * 0.5;
}

torch::Tensor upsample_flow(const torch::Tensor& flow) {
  auto up = F::interpolate(flow, F::InterpolateFuncOptions()
                                     .scale_factor(std::vector<double>{2.0, 2.0})
                                     .mode(torch::kBilinear)
                                     .align_corners(false));
  return up * 2.0;
}

MotionField MotionField::split(const torch::Tensor& four_channels) {
  auto parts = four_channels.split(2, 1);
  return {parts[0], parts[1]};
}

namespace {

class FlowLevelImpl : public torch::nn::Module {
 public:
  explicit FlowLevelImpl(int c) {
    const int half = std::max(c / 2, 2);
    c1_ = register_module("c1", conv3(8, c));
    c2_ = register_module("c2", conv3(c, c));
    c3_ = register_module("c3", conv3(c, half));
    c4_ = register_module("c4", conv3(half, 2));
    torch::NoGradGuard guard;
    c4_->weight.zero_();
    c4_->bias.zero_();
  }

  torch::Tensor forward(const torch::Tensor& x) {
    return c4_(leaky(c3_(leaky(c2_(leaky(c1_(x)))))));
  }

 private:
  torch::nn::Conv2d c1_{nullptr}, c2_{nullptr}, c3_{nullptr}, c4_{nullptr};
};
TORCH_MODULE(FlowLevel);

constexpr int kFlowLevels = 3;

}  // namespace

FlowNetImpl::FlowNetImpl(int channels) {
  for (int i = 0; i < kFlowLevels; ++i) levels_->push_back(FlowLevel(channels));
  register_module("levels", levels_);
}

torch::Tensor FlowNetImpl::forward(const torch::Tensor& cur, const torch::Tensor& ref) {
  std::vector<torch::Tensor> curs{cur}, refs{ref};
  for (int i = 1; i < kFlowLevels; ++i) {
    curs.push_back(F::avg_pool2d(curs.back(), F::AvgPool2dFuncOptions(2)));
    refs.push_back(F::avg_pool2d(refs.back(), F::AvgPool2dFuncOptions(2)));
  }
  torch::Tensor flow;
  for (int i = kFlowLevels - 1; i >= 0; --i) {
    const auto& c = curs[i];
    if (!flow.defined()) {
      flow = torch::zeros({c.size(0), 2, c.size(2), c.size(3)}, c.options());
    } else {
      flow = upsample_flow(flow);
    }
    auto input = torch::cat({c, warp(refs[i], flow), flow}, 1);
    flow = flow + levels_[kFlowLevels - 1 - i]->as<FlowLevelImpl>()->forward(input);
  }
  return flow;
}

MotionEstimationImpl::MotionEstimationImpl(const FlowNetConfig& config)
    : structure_net(register_module("structure_net", FlowNet(config.channels))),
      detail_net(register_module("detail_net", FlowNet(config.channels))) {}

MotionField MotionEstimationImpl::forward(const torch::Tensor& cur, const torch::Tensor& ref) {
  if (cur.sizes() != ref.sizes()) {
    throw Error(ErrorCode::kDimMismatch,
                "motion estimation inputs " + shape_string(cur) + " vs " + shape_string(ref));
  }
  require_multiple(cur, 4, "motion estimation");
  auto c = decompose_structure_detail(cur);
  auto r = decompose_structure_detail(ref);
  return {structure_net(c.structure, r.structure), detail_net(c.detail, r.detail)};
}

torch::Tensor motion_compensate(const torch::Tensor& reference, const MotionField& motion) {
  auto r = decompose_structure_detail(reference);
  return warp(r.structure, motion.flow_s) + warp(r.detail, motion.flow_d);
}

MotionEncoderImpl::MotionEncoderImpl(const EncDecConfig& config, int latent_channels, ArchKind kind,
                                     const AttentionConfig& attention) {
  const int c = config.channels;
  in_ = register_module("head", conv3(4, c, 2));
  b0_ = register_module("b0", Body(c, config.res_blocks, kind, attention));
  d1_ = register_module("d1", conv3(c, c, 2));
  b1_ = register_module("b1", Body(c, config.res_blocks, kind, attention));
  d2_ = register_module("d2", conv3(c, c, 2));
  b2_ = register_module("b2", Body(c, config.res_blocks, kind, attention));
  out_ = register_module("out", conv3(c, latent_channels, 2));
}

torch::Tensor MotionEncoderImpl::forward(const torch::Tensor& motion) {
  require_multiple(motion, 16, "motion encoder");
  auto h = b0_(in_(motion));
  h = b1_(d1_(h));
  h = b2_(d2_(h));
  return out_(h);
}

MotionDecoderImpl::MotionDecoderImpl(const EncDecConfig& config, int latent_channels, ArchKind kind,
                                     const AttentionConfig& attention) {
  const int c = config.channels;
  u0_ = register_module("u0", SubpixelUp(latent_channels, c));
  b0_ = register_module("b0", Body(c, config.res_blocks, kind, attention));
  u1_ = register_module("u1", SubpixelUp(c, c));
  b1_ = register_module("b1", Body(c, config.res_blocks, kind, attention));
  u2_ = register_module("u2", SubpixelUp(c, c));
  b2_ = register_module("b2", Body(c, config.res_blocks, kind, attention));
  u3_ = register_module("u3", SubpixelUp(c, 4));
}

torch::Tensor MotionDecoderImpl::forward(const torch::Tensor& latent) {
  auto h = b0_(u0_(latent));
  h = b1_(u1_(h));
  h = b2_(u2_(h));
  return u3_(h);
}

}  // namespace nvc
