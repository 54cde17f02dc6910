#include "nvc/model/layers.hpp"

#include <cmath>

namespace nvc {

namespace F = torch::nn::functional;

torch::Tensor leaky(const torch::Tensor& x) { return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(0.1)); }

torch::Tensor clamp_unit(const torch::Tensor& x) { return x + (x.clamp(0.0, 1.0) - x).detach(); }

torch::nn::Conv2d conv3(int in, int out, int stride) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

torch::nn::Conv2d conv1(int in, int out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1));
}

ResBlockImpl::ResBlockImpl(int channels)
    : a_(register_module("a", conv3(channels, channels))),
      b_(register_module("b", conv3(channels, channels))) {}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) { return x + b_(leaky(a_(x))); }

SubpixelUpImpl::SubpixelUpImpl(int in, int out) : conv_(register_module("conv", conv3(in, out * 4))) {}

torch::Tensor SubpixelUpImpl::forward(const torch::Tensor& x) {
  return F::pixel_shuffle(conv_(x), F::PixelShuffleFuncOptions(2));
}

int effective_window(int configured, int h, int w) {
  int win = configured;
  while (win > 1 && (win > h || win > w || h % win != 0 || w % win != 0)) win /= 2;
  return std::max(win, 1);
}

SwinLayerImpl::SwinLayerImpl(int channels, int heads, int window, bool shifted)
    : channels_(channels), heads_(heads), window_(window), shifted_(shifted) {
  norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({channels})));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({channels})));
  qkv_ = register_module("qkv", torch::nn::Linear(channels, 3 * channels));
  proj_ = register_module("proj", torch::nn::Linear(channels, channels));
  fc1_ = register_module("fc1", torch::nn::Linear(channels, 2 * channels));
  fc2_ = register_module("fc2", torch::nn::Linear(2 * channels, channels));
  bias_table_ = register_parameter(
      "bias_table", torch::randn({(2 * window - 1) * (2 * window - 1), heads}) * 0.02);
}

torch::Tensor SwinLayerImpl::attention(const torch::Tensor& t, int w, int shift) {
  const auto B = t.size(0), H = t.size(1), W = t.size(2), C = t.size(3);
  const int n = w * w;
  torch::Tensor x = shift > 0 ? torch::roll(t, {-shift, -shift}, {1, 2}) : t;
  torch::Tensor win = x.view({B, H / w, w, W / w, w, C}).permute({0, 1, 3, 2, 4, 5}).reshape({-1, n, C});
  const auto bn = win.size(0);
  const int head_dim = channels_ / heads_;
  auto qkv = qkv_(win).reshape({bn, n, 3, heads_, head_dim}).permute({2, 0, 3, 1, 4});
  auto q = qkv[0] * (1.0 / std::sqrt(static_cast<double>(head_dim)));
  auto attn = torch::matmul(q, qkv[1].transpose(-2, -1));

  // Relative offsets index the table built for the configured window; a
  // smaller window uses its centre.
  auto coords = torch::arange(w, torch::kLong);
  auto cy = coords.repeat_interleave(w);
  auto cx = coords.repeat({w});
  auto dy = cy.unsqueeze(1) - cy.unsqueeze(0) + (window_ - 1);
  auto dx = cx.unsqueeze(1) - cx.unsqueeze(0) + (window_ - 1);
  auto index = (dy * (2 * window_ - 1) + dx).reshape({-1});
  auto bias = bias_table_.index_select(0, index).view({n, n, heads_}).permute({2, 0, 1});
  attn = attn + bias.unsqueeze(0);

  if (shift > 0) {
    auto region = torch::zeros({H, W}, torch::kLong);
    const std::int64_t hs[] = {0, H - w, H - shift, H};
    const std::int64_t ws[] = {0, W - w, W - shift, W};
    std::int64_t label = 0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        region.index_put_({torch::indexing::Slice(hs[i], hs[i + 1]), torch::indexing::Slice(ws[j], ws[j + 1])},
                          label++);
      }
    }
    auto rw = region.view({H / w, w, W / w, w}).permute({0, 2, 1, 3}).reshape({-1, n});
    auto mask = (rw.unsqueeze(1) != rw.unsqueeze(2)).to(attn.dtype()) * -100.0;
    const auto nw = mask.size(0);
    attn = (attn.view({B, nw, heads_, n, n}) + mask.unsqueeze(0).unsqueeze(2)).view({bn, heads_, n, n});
  }
  attn = torch::softmax(attn, -1);
  auto out = torch::matmul(attn, qkv[2]).transpose(1, 2).reshape({bn, n, C});
  out = proj_(out);
  out = out.view({B, H / w, W / w, w, w, C}).permute({0, 1, 3, 2, 4, 5}).reshape({B, H, W, C});
  return shift > 0 ? torch::roll(out, {shift, shift}, {1, 2}) : out;
}

torch::Tensor SwinLayerImpl::forward(const torch::Tensor& x) {
  const int h = static_cast<int>(x.size(2));
  const int w = static_cast<int>(x.size(3));
  const int win = effective_window(window_, h, w);
  const int shift = shifted_ && h > win && w > win ? win / 2 : 0;
  auto t = x.permute({0, 2, 3, 1});
  t = t + attention(norm1_(t), win, shift);
  t = t + fc2_(F::gelu(fc1_(norm2_(t))));
  return t.permute({0, 3, 1, 2}).contiguous();
}

PatchMergeImpl::PatchMergeImpl(int in, int out)
    : norm_(register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({4 * in})))),
      linear_(register_module("linear", torch::nn::Linear(4 * in, out))) {}

torch::Tensor PatchMergeImpl::forward(const torch::Tensor& x) {
  auto t = F::pixel_unshuffle(x, F::PixelUnshuffleFuncOptions(2)).permute({0, 2, 3, 1});
  return linear_(norm_(t)).permute({0, 3, 1, 2}).contiguous();
}

PatchSplitImpl::PatchSplitImpl(int in, int out)
    : linear_(register_module("linear", torch::nn::Linear(in, 4 * out))) {}

torch::Tensor PatchSplitImpl::forward(const torch::Tensor& x) {
  auto t = linear_(x.permute({0, 2, 3, 1})).permute({0, 3, 1, 2});
  return F::pixel_shuffle(t, F::PixelShuffleFuncOptions(2));
}

BodyImpl::BodyImpl(int channels, int blocks, ArchKind kind, const AttentionConfig& a) {
  int swin = 0;
  auto add_swin = [&] {
    layers_->push_back(SwinLayer(channels, a.heads, a.window, swin % 2 == 1));
    ++swin;
  };
  for (int b = 0; b < blocks; ++b) {
    switch (kind) {
      case ArchKind::kCnn:
        layers_->push_back(ResBlock(channels));
        break;
      case ArchKind::kMixed:
        layers_->push_back(ResBlock(channels));
        for (int d = 0; d < a.depth; ++d) add_swin();
        break;
      case ArchKind::kTransformer:
        for (int d = 0; d < 2 * a.depth; ++d) add_swin();
        break;
    }
  }
  register_module("layers", layers_);
}

torch::Tensor BodyImpl::forward(torch::Tensor x) {
  for (auto& layer : *layers_) {
    if (auto* r = layer->as<ResBlockImpl>()) {
      x = r->forward(x);
    } else {
      x = layer->as<SwinLayerImpl>()->forward(x);
    }
  }
  return x;
}

DownImpl::DownImpl(int in, int out, ArchKind kind) {
  if (kind == ArchKind::kTransformer) {
    merge_ = register_module("merge", PatchMerge(in, out));
  } else {
    conv_ = register_module("conv", conv3(in, out, 2));
  }
}

torch::Tensor DownImpl::forward(const torch::Tensor& x) { return merge_ ? merge_(x) : conv_(x); }

UpImpl::UpImpl(int in, int out, ArchKind kind) {
  if (kind == ArchKind::kTransformer) {
    split_ = register_module("split", PatchSplit(in, out));
  } else {
    conv_ = register_module("conv", SubpixelUp(in, out));
  }
}

torch::Tensor UpImpl::forward(const torch::Tensor& x) { return split_ ? split_(x) : conv_(x); }

torch::nn::Conv2d merge_conv(int in, int out, ArchKind kind) {
  return kind == ArchKind::kTransformer ? conv1(in, out) : conv3(in, out);
}

RefineImpl::RefineImpl(int channels, int blocks, ArchKind kind, const AttentionConfig& attention)
    : body_(register_module("body", Body(channels, blocks, kind, attention))),
      proj_(register_module("proj", conv1(channels, channels))) {
  torch::NoGradGuard guard;
  proj_->weight.zero_();
  proj_->bias.zero_();
}

torch::Tensor RefineImpl::forward(const torch::Tensor& x) { return x + proj_(body_(x)); }

std::int64_t parameter_count(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

}  // namespace nvc
