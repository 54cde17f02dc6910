#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace nvc {

// Frame unit layout (little-endian):
//   "NVC1" | version u8 | frame_type u8 | width u16 | height u16 |
//   lambda_index u8 | chunk_count u8 | { chunk_id u8 | length u32 | payload }*
// Intra units carry [intra_hyper, intra_latent]; inter units carry
// [motion_hyper, motion_latent, ctx_hyper, ctx_latent] in that order.

inline constexpr std::uint8_t kBitstreamVersion = 1;
inline constexpr std::size_t kUnitHeaderBytes = 12;
inline constexpr std::size_t kChunkHeaderBytes = 5;

enum class FrameType : std::uint8_t { kIntra = 0, kInter = 1 };

enum class ChunkId : std::uint8_t {
  kIntraHyper = 0,
  kIntraLatent = 1,
  kMotionHyper = 2,
  kMotionLatent = 3,
  kContextHyper = 4,
  kContextLatent = 5,
};

struct Chunk {
  ChunkId id = ChunkId::kIntraHyper;
  std::vector<std::uint8_t> payload;

  bool operator==(const Chunk&) const = default;
};

struct BitstreamUnit {
  std::uint8_t version = kBitstreamVersion;
  FrameType frame_type = FrameType::kIntra;
  std::uint16_t width = 0;   // original (unpadded) frame width
  std::uint16_t height = 0;
  std::uint8_t lambda_index = 0;
  std::vector<Chunk> chunks;

  std::size_t payload_bytes() const;
  // Unit header, chunk headers and payloads.
  std::size_t total_bytes() const;
  double bpp() const;
  const Chunk& chunk(ChunkId id) const;

  bool operator==(const BitstreamUnit&) const = default;
};

std::vector<std::uint8_t> serialize(const BitstreamUnit& unit);
void append_serialized(const BitstreamUnit& unit, std::vector<std::uint8_t>& out);

// Parses one unit starting at offset and advances offset past it. Throws
// kBadMagic, kVersionMismatch, kUnknownChunk or kMalformedStream.
BitstreamUnit parse_unit(std::span<const std::uint8_t> bytes, std::size_t& offset);
std::vector<BitstreamUnit> parse_stream(std::span<const std::uint8_t> bytes);

void write_stream(const std::filesystem::path& path, std::span<const BitstreamUnit> units);
std::vector<BitstreamUnit> read_stream(const std::filesystem::path& path);

}  // namespace nvc
