#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "nvc/frame.hpp"

namespace nvc {

// Procedural toy video. Textures are smooth sums of sinusoids evaluated in
// continuous coordinates, so sub-pixel motion is exact.
enum class SyntheticKind {
  kStatic,     // textured still image
  kTranslate,  // global pan at constant velocity
  kObjects,    // panning background with independently moving squares
  kOcclusion,  // static background, an occluder leaves and re-enters
};

std::string_view to_string(SyntheticKind kind);
SyntheticKind parse_synthetic_kind(std::string_view name);

VideoSequence make_synthetic_sequence(SyntheticKind kind, int width, int height, int frames,
                                      std::uint64_t seed);

// n clips cycling through translate/objects/occlusion/static.
std::vector<VideoSequence> make_toy_clips(int count, int width, int height, int frames,
                                          std::uint64_t seed);

// Writes each sequence as <name>.yuv plus manifest.json under dir.
void write_dataset(const std::filesystem::path& dir, const std::vector<VideoSequence>& sequences);

}  // namespace nvc
