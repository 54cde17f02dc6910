#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nvc/frame.hpp"

namespace nvc {

// ---------------------------------------------------------------------------
// Raw planar 8-bit YUV 4:2:0.

// Reads n_frames frames. The returned frames are kYuv with chroma upsampled
// bilinearly; the on-disk planes are kept in Frame::native.
VideoSequence read_yuv420(const std::filesystem::path& path, int width, int height, int n_frames);

// Writes frames as 8-bit 4:2:0 (RGB frames are converted first).
void write_yuv420(const std::filesystem::path& path, std::span<const Frame> frames);

// ---------------------------------------------------------------------------
// Color conversion, BT.601 limited range:
//   Y  = (16  + 219 * Y') / 255,  Y' = 0.299 R + 0.587 G + 0.114 B
//   Cb = (128 + 224 * (B - Y') / 1.772) / 255
//   Cr = (128 + 224 * (R - Y') / 1.402) / 255
// yuv_to_rgb clamps to [0, 1]; rgb_to_yuv also fills Frame::native.

Frame yuv_to_rgb(const Frame& frame);
Frame rgb_to_yuv(const Frame& frame);

// Native 4:2:0 planes of a frame: the stored planes when available, else
// derived by conversion and 2x2 chroma averaging.
Yuv420Planes to_yuv420_planes(const Frame& frame);

// Converts 4:2:0 planes to a kYuv working frame (chroma upsampled bilinearly).
Frame frame_from_planes(const Yuv420Planes& planes);

// ---------------------------------------------------------------------------
// Geometry.

struct PaddedFrame {
  Frame frame;
  int original_width = 0;
  int original_height = 0;
};

// Replicate-pads right and bottom up to the next multiple of m.
PaddedFrame pad_to_multiple(const Frame& frame, int m);
Frame crop(const Frame& frame, int width, int height);
Frame crop_region(const Frame& frame, int x0, int y0, int width, int height);

// ---------------------------------------------------------------------------
// PNG (8-bit RGB).

Frame read_png(const std::filesystem::path& path);
void write_png(const Frame& frame, const std::filesystem::path& path);
void write_png_rgb8(const std::filesystem::path& path, int width, int height,
                    std::span<const std::uint8_t> rgb);

// ---------------------------------------------------------------------------
// Dataset manifest: a JSON document
//   {"sequences": [{"name": ..., "format": "yuv420" | "png", "path": ...,
//                   "width": W, "height": H, "frames": N, "fps": F}]}
// where png paths are printf patterns with one integer field ("f%03d.png").

struct SequenceEntry {
  std::string name;
  std::string format = "yuv420";
  std::string path;
  int width = 0;
  int height = 0;
  int frames = 0;
  double fps = 30.0;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<SequenceEntry> sequences;
};

DatasetManifest load_manifest(const std::filesystem::path& manifest_path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& manifest_path);

// Loads the sequence as RGB frames (YUV sources keep their native planes).
VideoSequence load_sequence(const DatasetManifest& manifest, const SequenceEntry& entry,
                            int max_frames = -1);

// ---------------------------------------------------------------------------
// Training clip sampling.

struct ClipCrop {
  std::size_t sequence = 0;
  int first_frame = 0;
  int x = 0;
  int y = 0;

  bool operator==(const ClipCrop&) const = default;
};

struct Clip {
  ClipCrop crop;
  std::vector<Frame> frames;
};

// Seeded random spatio-temporal crops over an in-memory set of sequences.
// The same seed and sequence set always produce the same stream.
class ClipSampler {
 public:
  ClipSampler(std::vector<VideoSequence> sequences, int clip_len, int patch, std::uint64_t seed);

  Clip next();
  std::vector<Clip> next_batch(int batch_size);
  ClipCrop next_crop();

  int clip_len() const { return clip_len_; }
  int patch() const { return patch_; }
  const std::vector<VideoSequence>& sequences() const { return sequences_; }

 private:
  std::vector<VideoSequence> sequences_;
  std::vector<std::size_t> eligible_;
  int clip_len_;
  int patch_;
  std::mt19937_64 rng_;
};

// Loads every sequence listed in <dataset_root>/manifest.json and returns a
// sampler over them.
ClipSampler sample_training_clips(const std::filesystem::path& dataset_root, int clip_len,
                                  int patch, std::uint64_t seed);

}  // namespace nvc
