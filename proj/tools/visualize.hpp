#pragma once

#include <filesystem>

#include <torch/torch.h>

#include "nvc/model/tcm.hpp"

namespace nvc::tools {

// Colour-wheel rendering of a [2, H, W] flow: hue from direction, saturation
// from magnitude relative to the largest vector.
void write_flow_png(const torch::Tensor& flow, const std::filesystem::path& path);

// Up to 16 channels of each context level, min-max normalised per channel,
// tiled 4 x 4 in grey.
void write_context_grids(const ContextPyramid& contexts, const std::filesystem::path& stem);

}  // namespace nvc::tools
