#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "nvc/bitstream.hpp"
#include "nvc/frame.hpp"
#include "nvc/model/codec.hpp"

namespace nvc {

inline constexpr int kPadMultiple = 64;
inline constexpr int kDefaultIntraPeriod = 32;

struct FrameCodingStats {
  double estimated_bits = 0.0;  // sum of -log2 p over every coded symbol
  std::size_t payload_bytes = 0;
  double bpp = 0.0;             // header and payload bits per original pixel
  torch::Tensor motion_bits;    // [C_m, h, w] estimated, inter frames only
  torch::Tensor context_bits;   // [C_y, h, w] estimated, inter frames only
  torch::Tensor decoded_motion; // [1, 4, H, W] structure and detail flows, inter frames only
  ContextPyramid contexts;      // inter frames only
};

struct CodedFrame {
  BitstreamUnit unit;
  FrameState state;             // state after this frame (reconstruction in state.frame)
  FrameCodingStats stats;
};

// x: padded [1, 3, H, W] with H, W multiples of 64. The encoder runs the
// decoder path on the quantized values, so the returned state matches
// decode_frame bit for bit on the same device.
CodedFrame encode_frame(CodecModel& model, const torch::Tensor& x, const FrameState& state, FrameType type,
                        int lambda_index, int width, int height);

// Throws kMalformedStream for a unit that does not fit the state or model.
CodedFrame decode_frame(CodecModel& model, const BitstreamUnit& unit, const FrameState& state);

// Intra frames at multiples of intra_period.
FrameType frame_type_at(int index, int intra_period);

class StreamEncoder {
 public:
  StreamEncoder(CodecModel model, int lambda_index, int intra_period = kDefaultIntraPeriod);

  CodedFrame encode(const Frame& frame);
  // Encoder-side reconstruction of the last frame, cropped to its original size.
  Frame reconstruction() const;

 private:
  CodecModel model_;
  int lambda_index_;
  int intra_period_;
  int index_ = 0;
  int width_ = 0, height_ = 0;
  FrameState state_;
};

class StreamDecoder {
 public:
  explicit StreamDecoder(CodecModel model);

  CodedFrame decode(const BitstreamUnit& unit);
  Frame reconstruction() const;

 private:
  CodecModel model_;
  int width_ = 0, height_ = 0;
  FrameState state_;
};

struct SequenceCoding {
  std::vector<BitstreamUnit> units;
  std::vector<Frame> encoder_reconstructions;
  std::vector<torch::Tensor> encoder_padded;  // padded reconstructions for exact comparison
  std::vector<FrameCodingStats> stats;
};

SequenceCoding encode_sequence(CodecModel model, const std::vector<Frame>& frames, int lambda_index,
                               int intra_period = kDefaultIntraPeriod);

struct SequenceDecoding {
  std::vector<Frame> reconstructions;
  std::vector<torch::Tensor> padded;
};

SequenceDecoding decode_sequence(CodecModel model, const std::vector<BitstreamUnit>& units);

}  // namespace nvc
