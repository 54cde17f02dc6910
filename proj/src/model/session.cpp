#include "nvc/model/session.hpp"

#include <string>

#include "nvc/data_io.hpp"
#include "nvc/error.hpp"

namespace nvc {

namespace {

int padded_dim(int v) { return (v + kPadMultiple - 1) / kPadMultiple * kPadMultiple; }

const Chunk& find_chunk(const BitstreamUnit& unit, ChunkId id) {
  for (const auto& c : unit.chunks) {
    if (c.id == id) return c;
  }
  throw Error(ErrorCode::kMalformedStream, "missing chunk " + std::to_string(static_cast<int>(id)));
}

// One entropy-coded latent: compressed from y when encoding, read back from
// the chunks when decoding. Both directions return the same y_hat.
struct LatentStep {
  bool encode;
  BitstreamUnit* out;
  const BitstreamUnit* in;
  FrameCodingStats* stats;

  torch::Tensor operator()(LatentEntropyModel& model, const torch::Tensor& y, int64_t h, int64_t w,
                           const EntropyPriors& priors, ChunkId hyper_id, ChunkId latent_id,
                           torch::Tensor* bits_out) const {
    torch::Tensor y_hat, bits;
    if (encode) {
      auto c = model->compress(y, priors);
      stats->estimated_bits += c.estimated_hyper_bits + c.estimated_latent_bits;
      out->chunks.push_back({hyper_id, std::move(c.hyper_bytes)});
      out->chunks.push_back({latent_id, std::move(c.latent_bytes)});
      y_hat = c.y_hat;
      bits = c.latent_bits;
    } else {
      const auto& hyper = find_chunk(*in, hyper_id).payload;
      const auto& latent = find_chunk(*in, latent_id).payload;
      auto [decoded, latent_bits] = model->decompress(hyper, latent, h, w, priors);
      y_hat = decoded;
      bits = latent_bits;
      stats->estimated_bits += latent_bits.sum().item<double>();
    }
    if (bits_out) *bits_out = bits;
    return y_hat;
  }
};

CodedFrame code_frame(CodecModel& model, const torch::Tensor* x, const BitstreamUnit* in, const FrameState& state,
                      FrameType type, int lambda_index, int width, int height) {
  torch::NoGradGuard guard;
  model->eval();
  const bool encode = x != nullptr;
  const auto& cfg = model->config();
  const int64_t ph = padded_dim(height), pw = padded_dim(width);
  const int64_t lh = ph / 16, lw = pw / 16;

  CodedFrame result;
  result.unit.frame_type = type;
  result.unit.width = static_cast<std::uint16_t>(width);
  result.unit.height = static_cast<std::uint16_t>(height);
  result.unit.lambda_index = static_cast<std::uint8_t>(lambda_index);
  LatentStep step{encode, &result.unit, in, &result.stats};

  if (type == FrameType::kIntra) {
    torch::Tensor y = encode ? model->intra->analysis(*x) : torch::Tensor();
    auto y_hat = step(model->intra->entropy, y, lh, lw, {}, ChunkId::kIntraHyper, ChunkId::kIntraLatent, nullptr);
    result.state = intra_state(model->intra->synthesis(y_hat), cfg);
  } else {
    if (!state.defined()) throw Error(ErrorCode::kMalformedStream, "inter frame without a preceding intra frame");
    if (state.frame.size(2) != ph || state.frame.size(3) != pw) {
      throw Error(ErrorCode::kMalformedStream, "inter frame dimensions differ from the reference");
    }
    torch::Tensor m;
    if (encode) m = model->motion_encoder(model->motion_estimation(*x, state.frame).concat());
    auto m_hat = step(model->motion_entropy, m, lh, lw, {state.motion_prior, {}}, ChunkId::kMotionHyper,
                      ChunkId::kMotionLatent, &result.stats.motion_bits);
    result.stats.decoded_motion = model->motion_decoder(m_hat);
    auto motion = MotionField::split(result.stats.decoded_motion);
    auto t = model->tcm(state.feature, state.long_term, motion);
    result.stats.contexts = t.contexts;
    torch::Tensor y;
    if (encode) y = model->contextual_encoder(*x, t.contexts);
    auto y_hat = step(model->contextual_entropy, y, lh, lw, {state.context_prior, t.contexts[2]},
                      ChunkId::kContextHyper, ChunkId::kContextLatent, &result.stats.context_bits);
    auto recon = model->contextual_decoder(y_hat, t.contexts);
    result.state.frame = recon.frame;
    result.state.feature = recon.feature;
    result.state.long_term = t.state;
    result.state.motion_prior = m_hat;
    result.state.context_prior = y_hat;
    result.state.p_index = state.p_index + 1;
  }
  if (!encode) result.unit = *in;
  result.stats.payload_bytes = result.unit.payload_bytes();
  result.stats.bpp = result.unit.bpp();
  return result;
}

}  // namespace

CodedFrame encode_frame(CodecModel& model, const torch::Tensor& x, const FrameState& state, FrameType type,
                        int lambda_index, int width, int height) {
  require_multiple(x, kPadMultiple, "frame");
  return code_frame(model, &x, nullptr, state, type, lambda_index, width, height);
}

CodedFrame decode_frame(CodecModel& model, const BitstreamUnit& unit, const FrameState& state) {
  if (unit.version != kBitstreamVersion) {
    throw Error(ErrorCode::kVersionMismatch, "unit version " + std::to_string(unit.version));
  }
  const std::size_t expected = unit.frame_type == FrameType::kIntra ? 2 : 4;
  if (unit.chunks.size() != expected) {
    throw Error(ErrorCode::kMalformedStream, "unexpected chunk count " + std::to_string(unit.chunks.size()));
  }
  return code_frame(model, nullptr, &unit, state, unit.frame_type, unit.lambda_index, unit.width, unit.height);
}

FrameType frame_type_at(int index, int intra_period) {
  if (intra_period < 1) throw Error(ErrorCode::kIndexOutOfRange, "intra period must be >= 1");
  return index % intra_period == 0 ? FrameType::kIntra : FrameType::kInter;
}

StreamEncoder::StreamEncoder(CodecModel model, int lambda_index, int intra_period)
    : model_(std::move(model)), lambda_index_(lambda_index), intra_period_(intra_period) {}

CodedFrame StreamEncoder::encode(const Frame& frame) {
  if (index_ > 0 && (frame.width != width_ || frame.height != height_)) {
    throw Error(ErrorCode::kDimMismatch, "frame size changed within the stream");
  }
  width_ = frame.width;
  height_ = frame.height;
  auto padded = pad_to_multiple(frame, kPadMultiple);
  auto x = frame_to_tensor(padded.frame);
  auto coded = encode_frame(model_, x, state_, frame_type_at(index_, intra_period_), lambda_index_, width_, height_);
  state_ = coded.state;
  ++index_;
  return coded;
}

Frame StreamEncoder::reconstruction() const { return crop(tensor_to_frame(state_.frame), width_, height_); }

StreamDecoder::StreamDecoder(CodecModel model) : model_(std::move(model)) {}

CodedFrame StreamDecoder::decode(const BitstreamUnit& unit) {
  auto decoded = decode_frame(model_, unit, state_);
  state_ = decoded.state;
  width_ = unit.width;
  height_ = unit.height;
  return decoded;
}

Frame StreamDecoder::reconstruction() const { return crop(tensor_to_frame(state_.frame), width_, height_); }

SequenceCoding encode_sequence(CodecModel model, const std::vector<Frame>& frames, int lambda_index,
                               int intra_period) {
  StreamEncoder encoder(std::move(model), lambda_index, intra_period);
  SequenceCoding out;
  for (const auto& f : frames) {
    auto coded = encoder.encode(f);
    out.units.push_back(std::move(coded.unit));
    out.encoder_padded.push_back(coded.state.frame);
    out.encoder_reconstructions.push_back(encoder.reconstruction());
    out.stats.push_back(std::move(coded.stats));
  }
  return out;
}

SequenceDecoding decode_sequence(CodecModel model, const std::vector<BitstreamUnit>& units) {
  StreamDecoder decoder(std::move(model));
  SequenceDecoding out;
  for (const auto& u : units) {
    auto decoded = decoder.decode(u);
    out.padded.push_back(decoded.state.frame);
    out.reconstructions.push_back(decoder.reconstruction());
  }
  return out;
}

}  // namespace nvc
