#include "visualize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "nvc/data_io.hpp"

namespace nvc::tools {

namespace {

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  std::array<double, 3> rgb{};
  switch (static_cast<int>(hp) % 6) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  const double m = v - c;
  for (auto& ch : rgb) ch += m;
  return rgb;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5); }

}  // namespace

void write_flow_png(const torch::Tensor& flow, const std::filesystem::path& path) {
  auto f = flow.detach().to(torch::kFloat64).contiguous();
  const int h = static_cast<int>(f.size(1)), w = static_cast<int>(f.size(2));
  auto mag = f.pow(2).sum(0).sqrt();
  const double max_mag = std::max(mag.max().item<double>(), 1e-9);
  auto fx_t = f[0].contiguous(), fy_t = f[1].contiguous();
  auto fx = fx_t.accessor<double, 2>();
  auto fy = fy_t.accessor<double, 2>();
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(3) * w * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double angle = std::atan2(fy[y][x], fx[y][x]);
      const double hue = (angle + std::numbers::pi) / (2.0 * std::numbers::pi);
      const double sat = std::hypot(fx[y][x], fy[y][x]) / max_mag;
      const auto c = hsv_to_rgb(std::min(hue, 0.999999), sat, 1.0);
      for (int k = 0; k < 3; ++k) rgb[(static_cast<std::size_t>(y) * w + x) * 3 + k] = to_byte(c[k]);
    }
  }
  write_png_rgb8(path, w, h, rgb);
}

void write_context_grids(const ContextPyramid& contexts, const std::filesystem::path& stem) {
  for (std::size_t l = 0; l < contexts.size(); ++l) {
    auto c = contexts[l][0].detach().to(torch::kFloat64);
    const int channels = static_cast<int>(std::min<int64_t>(c.size(0), 16));
    const int h = static_cast<int>(c.size(1)), w = static_cast<int>(c.size(2));
    const int gw = 4 * w, gh = 4 * h;
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(3) * gw * gh, 0);
    for (int ch = 0; ch < channels; ++ch) {
      auto plane = c[ch];
      const double lo = plane.min().item<double>(), hi = plane.max().item<double>();
      auto norm = ((plane - lo) / std::max(hi - lo, 1e-12)).contiguous();
      auto a = norm.accessor<double, 2>();
      const int ox = (ch % 4) * w, oy = (ch / 4) * h;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const auto v = to_byte(a[y][x]);
          const std::size_t i = (static_cast<std::size_t>(oy + y) * gw + ox + x) * 3;
          rgb[i] = rgb[i + 1] = rgb[i + 2] = v;
        }
      }
    }
    auto path = stem;
    path += "_level" + std::to_string(l) + ".png";
    write_png_rgb8(path, gw, gh, rgb);
  }
}

}  // namespace nvc::tools
