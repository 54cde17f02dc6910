#include "nvc/model/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "nvc/error.hpp"
#include "nvc/symbol_coding.hpp"

namespace nvc {

namespace F = torch::nn::functional;

torch::Tensor round_half_away(const torch::Tensor& x) {
  return torch::sign(x) * torch::floor(torch::abs(x) + 0.5);
}

torch::Tensor round_ste(const torch::Tensor& x) { return x + (round_half_away(x) - x).detach(); }

torch::Tensor quantize(const torch::Tensor& values, const torch::Tensor& mean, QuantMode mode) {
  if (mode == QuantMode::kTrain) return values + torch::rand_like(values) - 0.5;
  return round_half_away(values - mean) + mean;
}

namespace {

constexpr double kMaxBits = 16.0;

}  // namespace

torch::Tensor laplace_bits(const torch::Tensor& q, const torch::Tensor& mean, const torch::Tensor& scale) {
  auto a = torch::abs(q - mean);
  // Each branch only sees the side of 0.5 it is valid on, so neither
  // overflows and the unused branch contributes no NaN gradient.
  auto far = a.clamp_min(0.5);
  auto near = a.clamp_max(0.5);
  auto log_far = std::log(0.5) - (far - 0.5) / scale + torch::log(-torch::expm1(-1.0 / scale));
  auto log_near = torch::log1p(-0.5 * (torch::exp(-(0.5 - near) / scale) + torch::exp(-(0.5 + near) / scale)));
  auto log_p = torch::where(a >= 0.5, log_far, log_near);
  return (-log_p / std::numbers::ln2).clamp_max(kMaxBits);
}

double laplace_bits(double delta, double scale) {
  const double a = std::abs(delta);
  double log_p;
  if (a >= 0.5) {
    log_p = std::log(0.5) - (a - 0.5) / scale + std::log(-std::expm1(-1.0 / scale));
  } else {
    log_p = std::log1p(-0.5 * (std::exp(-(0.5 - a) / scale) + std::exp(-(0.5 + a) / scale)));
  }
  return std::min(-log_p / std::numbers::ln2, kMaxBits);
}

namespace {

constexpr int kScaleRungs = 192;
constexpr double kScaleMax = 256.0;

double rung_log_step() { return std::log(kScaleMax / kScaleMin) / (kScaleRungs - 1); }

const std::vector<CdfTable>& scale_tables() {
  static const std::vector<CdfTable> tables = [] {
    std::vector<CdfTable> t;
    t.reserve(kScaleRungs);
    for (int i = 0; i < kScaleRungs; ++i) t.push_back(laplace_cdf(scale_of_index(i)));
    return t;
  }();
  return tables;
}

}  // namespace

int scale_index(double sigma) {
  if (!(sigma > kScaleMin)) return 0;
  const long i = std::lround(std::log(sigma / kScaleMin) / rung_log_step());
  return static_cast<int>(std::clamp<long>(i, 0, kScaleRungs - 1));
}

double scale_of_index(int index) { return kScaleMin * std::exp(index * rung_log_step()); }

const CdfTable& scale_table(int index) { return scale_tables().at(index); }

int scale_table_count() { return kScaleRungs; }

QuadtreeSchedule quadtree_partition(int h, int w) {
  if (h % 2 != 0 || w % 2 != 0 || h <= 0 || w <= 0) {
    throw Error(ErrorCode::kOddDimensions,
                "quadtree needs even latent dims, got " + std::to_string(h) + "x" + std::to_string(w));
  }
  QuadtreeSchedule s;
  s.height = h;
  s.width = w;
  for (int k = 0; k < kQuadtreeSteps; ++k) {
    const auto [pr, pc] = kQuadtreePhases[k];
    for (int r = pr; r < h; r += 2) {
      for (int c = pc; c < w; c += 2) s.groups[k].emplace_back(r, c);
    }
  }
  return s;
}

torch::Tensor quadtree_mask(int64_t h, int64_t w, int step, const torch::TensorOptions& options) {
  using torch::indexing::None;
  using torch::indexing::Slice;
  auto m = torch::zeros({1, 1, h, w}, options);
  const auto [pr, pc] = kQuadtreePhases.at(step);
  m.index_put_({Slice(), Slice(), Slice(pr, None, 2), Slice(pc, None, 2)}, 1.0);
  return m;
}

torch::Tensor quadtree_decoded_mask(int64_t h, int64_t w, int step, const torch::TensorOptions& options) {
  auto m = torch::zeros({1, 1, h, w}, options);
  for (int k = 0; k < step; ++k) m = m + quadtree_mask(h, w, k, options);
  return m;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<int, 6> kFilterDims{1, 3, 3, 3, 3, 1};
constexpr double kInitScale = 10.0;

}  // namespace

FactorizedPriorImpl::FactorizedPriorImpl(int channels) : channels_(channels) {
  const int layers = static_cast<int>(kFilterDims.size()) - 1;
  const double scale = std::pow(kInitScale, 1.0 / layers);
  for (int i = 0; i < layers; ++i) {
    const int in = kFilterDims[i], out = kFilterDims[i + 1];
    const double init = std::log(std::expm1(1.0 / scale / out));
    matrices_.push_back(register_parameter("matrix" + std::to_string(i), torch::full({channels, out, in}, init)));
    biases_.push_back(register_parameter("bias" + std::to_string(i), torch::rand({channels, out, 1}) - 0.5));
    if (i + 1 < layers) {
      factors_.push_back(register_parameter("factor" + std::to_string(i), torch::zeros({channels, out, 1})));
    }
  }
}

torch::Tensor FactorizedPriorImpl::logits_cdf(const torch::Tensor& x) {
  auto h = x;
  for (std::size_t i = 0; i < matrices_.size(); ++i) {
    h = torch::matmul(F::softplus(matrices_[i]), h) + biases_[i];
    if (i < factors_.size()) h = h + torch::tanh(factors_[i]) * torch::tanh(h);
  }
  return h;
}

torch::Tensor FactorizedPriorImpl::bits(const torch::Tensor& z) {
  const auto B = z.size(0), C = z.size(1), H = z.size(2), W = z.size(3);
  auto x = z.transpose(0, 1).reshape({C, 1, -1});
  auto lower = logits_cdf(x - 0.5);
  auto upper = logits_cdf(x + 0.5);
  auto sign = -torch::sign(lower + upper).detach();
  auto p = torch::abs(torch::sigmoid(sign * upper) - torch::sigmoid(sign * lower));
  auto b = -torch::log2(p.clamp_min(kProbFloor));
  return b.view({C, B, H, W}).transpose(0, 1);
}

std::vector<CdfTable> FactorizedPriorImpl::tables(int half_width) {
  torch::NoGradGuard guard;
  const int n = 2 * half_width + 1;
  auto v = torch::arange(-half_width, half_width + 1, torch::kFloat32).view({1, 1, n}).expand({channels_, 1, n});
  auto lower = logits_cdf(v - 0.5);
  auto upper = logits_cdf(v + 0.5);
  auto sign = -torch::sign(lower + upper);
  auto p = torch::abs(torch::sigmoid(sign * upper) - torch::sigmoid(sign * lower)).to(torch::kFloat64);
  p.select(2, 0).copy_(torch::sigmoid(lower.select(2, 0)).to(torch::kFloat64));
  p.select(2, n - 1).copy_(torch::sigmoid(-lower.select(2, n - 1)).to(torch::kFloat64));
  auto acc = p.contiguous();
  std::vector<CdfTable> out;
  out.reserve(channels_);
  for (int c = 0; c < channels_; ++c) {
    const double* row = acc.data_ptr<double>() + static_cast<std::ptrdiff_t>(c) * n;
    out.push_back(build_cdf(std::span<const double>(row, n), -half_width));
  }
  return out;
}

// ---------------------------------------------------------------------------

LatentEntropyModelImpl::LatentEntropyModelImpl(int latent_channels, int channels, int hyper_channels,
                                               int temporal_channels, bool use_latent_prior, ArchKind kind,
                                               const AttentionConfig& attention)
    : latent_channels_(latent_channels),
      channels_(channels),
      hyper_channels_(hyper_channels),
      temporal_channels_(temporal_channels),
      use_latent_prior_(use_latent_prior) {
  ha0_ = register_module("ha0", conv3(latent_channels, channels));
  ha1_ = register_module("ha1", conv3(channels, channels, 2));
  ha2_ = register_module("ha2", conv3(channels, hyper_channels, 2));
  factorized = register_module("factorized", FactorizedPrior(hyper_channels));
  hs0_ = register_module("hs0", SubpixelUp(hyper_channels, channels));
  hs1_ = register_module("hs1", SubpixelUp(channels, channels));
  hs2_ = register_module("hs2", conv3(channels, channels));
  if (temporal_channels > 0) {
    tp0_ = register_module("tp0", conv3(temporal_channels, channels, 2));
    tp1_ = register_module("tp1", conv3(channels, channels, 2));
  }
  for (int k = 1; k < kQuadtreeSteps; ++k) spatial_->push_back(conv3(latent_channels, channels));
  register_module("spatial", spatial_);
  const int fused = 2 * channels + (use_latent_prior ? latent_channels : 0) + (temporal_channels > 0 ? channels : 0);
  fuse_in_ = register_module("fuse_in", conv1(fused, channels));
  fuse_body_ = register_module("fuse_body", Body(channels, 1, kind, attention));
  fuse_out_ = register_module("fuse_out", conv1(channels, 2 * latent_channels));
}

torch::Tensor LatentEntropyModelImpl::hyper_analysis(const torch::Tensor& y) {
  if (y.dim() != 4 || y.size(1) != latent_channels_ || y.size(2) % 4 != 0 || y.size(3) % 4 != 0) {
    throw Error(ErrorCode::kShapeMismatch, "latent must have " + std::to_string(latent_channels_) +
                                               " channels and dims divisible by 4");
  }
  return ha2_(leaky(ha1_(leaky(ha0_(y)))));
}

torch::Tensor LatentEntropyModelImpl::hyper_synthesis(const torch::Tensor& z_hat) {
  return hs2_(leaky(hs1_(leaky(hs0_(z_hat)))));
}

namespace {

void require_grid(const torch::Tensor& t, int64_t b, int64_t h, int64_t w, const char* what) {
  if (t.dim() != 4 || t.size(0) != b || t.size(2) != h || t.size(3) != w) {
    throw Error(ErrorCode::kAlignmentMismatch, std::string(what) + " is not aligned with the latent grid");
  }
}

}  // namespace

DistributionParams LatentEntropyModelImpl::predict_params(const torch::Tensor& hyper, const torch::Tensor& spatial,
                                                          const EntropyPriors& priors) {
  const auto b = hyper.size(0), h = hyper.size(2), w = hyper.size(3);
  require_grid(spatial, b, h, w, "spatial prior");
  std::vector<torch::Tensor> inputs{hyper, spatial};
  if (use_latent_prior_) {
    if (!priors.latent.defined()) throw Error(ErrorCode::kAlignmentMismatch, "latent prior missing");
    require_grid(priors.latent, b, h, w, "latent prior");
    inputs.push_back(priors.latent);
  }
  if (temporal_channels_ > 0) {
    if (!priors.temporal.defined()) throw Error(ErrorCode::kAlignmentMismatch, "temporal prior missing");
    require_grid(priors.temporal, b, 4 * h, 4 * w, "temporal prior");
    inputs.push_back(tp1_(leaky(tp0_(priors.temporal))));
  }
  auto out = fuse_out_(fuse_body_(leaky(fuse_in_(torch::cat(inputs, 1))))).chunk(2, 1);
  return {out[0], F::softplus(out[1]).clamp_min(kScaleMin)};
}

DistributionParams LatentEntropyModelImpl::step_params(int step, const torch::Tensor& hyper,
                                                       const torch::Tensor& decoded, const EntropyPriors& priors) {
  torch::Tensor spatial;
  if (step == 0) {
    spatial = torch::zeros({hyper.size(0), channels_, hyper.size(2), hyper.size(3)}, hyper.options());
  } else {
    auto mask = quadtree_decoded_mask(decoded.size(2), decoded.size(3), step, decoded.options());
    spatial = spatial_[step - 1]->as<torch::nn::Conv2dImpl>()->forward(decoded * mask);
  }
  return predict_params(hyper, spatial, priors);
}

LatentTrainOutput LatentEntropyModelImpl::forward(const torch::Tensor& y, const EntropyPriors& priors) {
  const auto mode = is_training() ? QuantMode::kTrain : QuantMode::kInfer;
  auto z = hyper_analysis(y);
  auto hyper_bits = factorized->bits(quantize(z, torch::zeros_like(z), mode));
  auto hyper = hyper_synthesis(round_ste(z));

  const auto h = y.size(2), w = y.size(3);
  quadtree_partition(static_cast<int>(h), static_cast<int>(w));
  auto decoded = torch::zeros_like(y);
  auto mean = torch::zeros_like(y);
  auto scale = torch::zeros_like(y);
  for (int k = 0; k < kQuadtreeSteps; ++k) {
    auto p = step_params(k, hyper, decoded, priors);
    auto m = quadtree_mask(h, w, k, y.options());
    decoded = decoded + m * (round_ste(y - p.mean) + p.mean);
    mean = mean + m * p.mean;
    scale = scale + m * p.scale;
  }
  auto latent_bits = laplace_bits(quantize(y, mean, mode), mean, scale);
  return {decoded, latent_bits, hyper_bits};
}

CodedLatent LatentEntropyModelImpl::compress(const torch::Tensor& y, const EntropyPriors& priors) {
  if (y.size(0) != 1) throw Error(ErrorCode::kShapeMismatch, "coding expects batch size 1");
  return run(Direction::kEncode, y, nullptr, nullptr, y.size(2), y.size(3), priors);
}

std::pair<torch::Tensor, torch::Tensor> LatentEntropyModelImpl::decompress(
    const std::vector<std::uint8_t>& hyper_bytes, const std::vector<std::uint8_t>& latent_bytes, int64_t h,
    int64_t w, const EntropyPriors& priors) {
  auto r = run(Direction::kDecode, torch::Tensor(), &hyper_bytes, &latent_bytes, h, w, priors);
  return {r.y_hat, r.latent_bits};
}

namespace {

int round_away(float v) {
  const float r = std::floor(std::abs(v) + 0.5f);
  return static_cast<int>(v < 0 ? -r : r);
}

}  // namespace

CodedLatent LatentEntropyModelImpl::run(Direction direction, const torch::Tensor& y,
                                        const std::vector<std::uint8_t>* hyper_bytes,
                                        const std::vector<std::uint8_t>* latent_bytes, int64_t h, int64_t w,
                                        const EntropyPriors& priors) {
  torch::NoGradGuard guard;
  const bool encode = direction == Direction::kEncode;
  const auto schedule = quadtree_partition(static_cast<int>(h), static_cast<int>(w));
  if (h % 4 != 0 || w % 4 != 0) {
    throw Error(ErrorCode::kShapeMismatch, "latent dims must be divisible by 4");
  }
  auto options = torch::TensorOptions().dtype(torch::kFloat32);
  CodedLatent out;

  // Hyperprior.
  const int64_t zh = h / 4, zw = w / 4;
  torch::Tensor z_hat;
  const auto tables = factorized->tables();
  if (encode) {
    z_hat = round_half_away(hyper_analysis(y)).contiguous();
    RangeEncoder enc;
    auto acc = z_hat.accessor<float, 4>();
    for (int c = 0; c < hyper_channels_; ++c) {
      for (int64_t r = 0; r < zh; ++r) {
        for (int64_t q = 0; q < zw; ++q) encode_escaped(enc, static_cast<int>(acc[0][c][r][q]), tables[c]);
      }
    }
    out.hyper_bytes = enc.finish();
  } else {
    z_hat = torch::zeros({1, hyper_channels_, zh, zw}, options);
    RangeDecoder dec(*hyper_bytes);
    auto acc = z_hat.accessor<float, 4>();
    for (int c = 0; c < hyper_channels_; ++c) {
      for (int64_t r = 0; r < zh; ++r) {
        for (int64_t q = 0; q < zw; ++q) acc[0][c][r][q] = static_cast<float>(decode_escaped(dec, tables[c]));
      }
    }
  }
  out.estimated_hyper_bits = factorized->bits(z_hat).sum().item<double>();
  auto hyper = hyper_synthesis(z_hat);

  // Latent, one quadtree step at a time.
  auto decoded = torch::zeros({1, latent_channels_, h, w}, options);
  auto bits = torch::zeros({latent_channels_, h, w}, torch::kFloat64);
  auto dacc = decoded.accessor<float, 4>();
  auto bacc = bits.accessor<double, 3>();
  torch::Tensor y_contig = encode ? y.contiguous() : torch::Tensor();
  RangeEncoder enc;
  std::optional<RangeDecoder> dec;
  if (!encode) dec.emplace(*latent_bytes);
  for (int k = 0; k < kQuadtreeSteps; ++k) {
    auto p = step_params(k, hyper, decoded, priors);
    auto mean = p.mean.contiguous();
    auto scale = p.scale.contiguous();
    auto macc = mean.accessor<float, 4>();
    auto sacc = scale.accessor<float, 4>();
    for (int c = 0; c < latent_channels_; ++c) {
      for (const auto& [r, q] : schedule.groups[k]) {
        const float mu = macc[0][c][r][q];
        const float sigma = sacc[0][c][r][q];
        const CdfTable& table = scale_table(scale_index(sigma));
        int s;
        if (encode) {
          s = round_away(y_contig.accessor<float, 4>()[0][c][r][q] - mu);
          encode_escaped(enc, s, table);
        } else {
          s = decode_escaped(*dec, table);
        }
        dacc[0][c][r][q] = static_cast<float>(s) + mu;
        bacc[c][r][q] = laplace_bits(static_cast<double>(s), static_cast<double>(sigma));
      }
    }
  }
  if (encode) out.latent_bytes = enc.finish();
  out.y_hat = decoded;
  out.latent_bits = bits;
  out.estimated_latent_bits = bits.sum().item<double>();
  return out;
}

}  // namespace nvc
