#include "nvc/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "nvc/data_io.hpp"
#include "nvc/error.hpp"

namespace nvc {

std::string_view to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::kStatic: return "static";
    case SyntheticKind::kTranslate: return "translate";
    case SyntheticKind::kObjects: return "objects";
    case SyntheticKind::kOcclusion: return "occlusion";
  }
  return "static";
}

SyntheticKind parse_synthetic_kind(std::string_view name) {
  if (name == "static") return SyntheticKind::kStatic;
  if (name == "translate") return SyntheticKind::kTranslate;
  if (name == "objects") return SyntheticKind::kObjects;
  if (name == "occlusion") return SyntheticKind::kOcclusion;
  throw Error(ErrorCode::kInvalidConfig, "unknown synthetic kind '" + std::string(name) + "'");
}

namespace {

struct Wave {
  double fx, fy, phase, amp;
};

class Texture {
 public:
  Texture(std::mt19937_64& rng, double base_freq) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int c = 0; c < 3; ++c) {
      offset_[c] = 0.3 + 0.4 * u(rng);
      for (auto& w : waves_[c]) {
        const double angle = 2.0 * std::numbers::pi * u(rng);
        const double freq = base_freq * (0.4 + 1.6 * u(rng));
        w = {freq * std::cos(angle), freq * std::sin(angle), 2.0 * std::numbers::pi * u(rng),
             0.06 + 0.08 * u(rng)};
      }
    }
  }

  double sample(int c, double x, double y) const {
    double v = offset_[c];
    for (const auto& w : waves_[c]) v += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
    return std::clamp(v, 0.02, 0.98);
  }

 private:
  std::array<double, 3> offset_{};
  std::array<std::array<Wave, 5>, 3> waves_{};
};

struct Square {
  double x, y, vx, vy, size;
  Texture texture;
};

}  // namespace

VideoSequence make_synthetic_sequence(SyntheticKind kind, int width, int height, int frames,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Texture background(rng, 0.25);

  const double speed = kind == SyntheticKind::kStatic ? 0.0 : 0.5 + 2.5 * u(rng);
  const double angle = 2.0 * std::numbers::pi * u(rng);
  double bvx = speed * std::cos(angle);
  double bvy = speed * std::sin(angle);
  if (kind == SyntheticKind::kOcclusion) bvx = bvy = 0.0;

  std::vector<Square> squares;
  if (kind == SyntheticKind::kObjects) {
    const int n = 1 + static_cast<int>(u(rng) * 2.0);
    for (int i = 0; i < n; ++i) {
      squares.push_back({u(rng) * width * 0.6, u(rng) * height * 0.6, -3.0 + 6.0 * u(rng),
                         -3.0 + 6.0 * u(rng), 12.0 + u(rng) * 0.25 * std::min(width, height),
                         Texture(rng, 0.5)});
    }
  } else if (kind == SyntheticKind::kOcclusion) {
    // Crosses the frame, leaves it, then comes back over the same background.
    const double size = 0.35 * std::min(width, height);
    squares.push_back({0.1 * width, 0.3 * height, 0.0, 0.0, size, Texture(rng, 0.5)});
  }

  VideoSequence seq;
  seq.name = std::string(to_string(kind)) + "_" + std::to_string(seed);
  seq.fps = 30.0;
  seq.frames.reserve(frames);
  const double occluder_speed = std::max(4.0, 1.6 * width / std::max(frames, 1));
  for (int t = 0; t < frames; ++t) {
    Frame f(width, height, ColorSpace::kRgb);
    std::vector<std::array<double, 2>> pos;
    for (const auto& s : squares) {
      if (kind == SyntheticKind::kOcclusion) {
        // Triangle wave in x: out past the right edge and back.
        const double span = 1.4 * width;
        double p = std::fmod(0.1 * width + occluder_speed * t, 2.0 * span);
        if (p > span) p = 2.0 * span - p;
        pos.push_back({p, s.y});
      } else {
        pos.push_back({s.x + s.vx * t, s.y + s.vy * t});
      }
    }
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        for (int c = 0; c < 3; ++c) {
          double v = background.sample(c, x - bvx * t, y - bvy * t);
          for (std::size_t k = 0; k < squares.size(); ++k) {
            const double lx = x - pos[k][0];
            const double ly = y - pos[k][1];
            if (lx >= 0 && ly >= 0 && lx < squares[k].size && ly < squares[k].size) {
              v = squares[k].texture.sample(c, lx, ly);
            }
          }
          f.at(c, y, x) = v;
        }
      }
    }
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

std::vector<VideoSequence> make_toy_clips(int count, int width, int height, int frames,
                                          std::uint64_t seed) {
  constexpr std::array kinds = {SyntheticKind::kTranslate, SyntheticKind::kObjects,
                                SyntheticKind::kOcclusion, SyntheticKind::kStatic};
  std::vector<VideoSequence> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    out.push_back(make_synthetic_sequence(kinds[i % kinds.size()], width, height, frames,
                                          seed * 7919 + static_cast<std::uint64_t>(i)));
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<VideoSequence>& sequences) {
  std::filesystem::create_directories(dir);
  DatasetManifest manifest;
  manifest.root = dir;
  for (const auto& s : sequences) {
    const std::string file = s.name + ".yuv";
    write_yuv420(dir / file, s.frames);
    manifest.sequences.push_back({s.name, "yuv420", file, s.frames.front().width,
                                  s.frames.front().height, static_cast<int>(s.frames.size()), s.fps});
  }
  save_manifest(manifest, dir / "manifest.json");
}

}  // namespace nvc
