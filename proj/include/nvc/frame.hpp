#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nvc {

// kYuv marks a frame whose working planes hold Y, U, V at full resolution
// (chroma upsampled from a 4:2:0 source or produced by rgb_to_yuv).
enum class ColorSpace { kRgb, kYuv };

// 8-bit 4:2:0 planes exactly as stored on disk.
struct Yuv420Planes {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> y;  // width * height
  std::vector<std::uint8_t> u;  // (width / 2) * (height / 2)
  std::vector<std::uint8_t> v;

  bool operator==(const Yuv420Planes&) const = default;
};

// Three planar channels of width * height samples each, values in [0, 1].
struct Frame {
  int width = 0;
  int height = 0;
  ColorSpace color_space = ColorSpace::kRgb;
  std::vector<double> data;
  std::optional<Yuv420Planes> native;

  Frame() = default;
  Frame(int w, int h, ColorSpace space = ColorSpace::kRgb)
      : width(w), height(h), color_space(space), data(static_cast<std::size_t>(3) * w * h, 0.0) {}

  std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
  double& at(int c, int y, int x) { return data[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
  double at(int c, int y, int x) const {
    return data[c * plane_size() + static_cast<std::size_t>(y) * width + x];
  }

  bool operator==(const Frame&) const = default;
};

struct VideoSequence {
  std::vector<Frame> frames;
  double fps = 30.0;
  std::string name;
};

}  // namespace nvc
