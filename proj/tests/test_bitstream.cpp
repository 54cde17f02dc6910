#include <filesystem>
#include <random>

#include "doctest.h"
#include "nvc/bitstream.hpp"
#include "nvc/error.hpp"

using namespace nvc;

namespace {

std::vector<std::uint8_t> random_bytes(std::mt19937& rng, std::size_t n) {
  std::vector<std::uint8_t> v(n);
  for (auto& b : v) b = static_cast<std::uint8_t>(rng());
  return v;
}

BitstreamUnit inter_unit(std::mt19937& rng) {
  BitstreamUnit u;
  u.frame_type = FrameType::kInter;
  u.width = 96;
  u.height = 64;
  u.lambda_index = 2;
  for (ChunkId id : {ChunkId::kMotionHyper, ChunkId::kMotionLatent, ChunkId::kContextHyper,
                     ChunkId::kContextLatent}) {
    u.chunks.push_back({id, random_bytes(rng, rng() % 50)});
  }
  return u;
}

BitstreamUnit intra_unit(std::mt19937& rng) {
  BitstreamUnit u;
  u.frame_type = FrameType::kIntra;
  u.width = 64;
  u.height = 64;
  u.chunks.push_back({ChunkId::kIntraHyper, random_bytes(rng, 7)});
  u.chunks.push_back({ChunkId::kIntraLatent, random_bytes(rng, 100)});
  return u;
}

ErrorCode parse_error(std::vector<std::uint8_t> bytes) {
  try {
    parse_stream(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a parse error");
  return ErrorCode::kIoError;
}

}  // namespace

TEST_CASE("serialize and parse round trip") {
  std::mt19937 rng(1);
  std::vector<BitstreamUnit> units = {intra_unit(rng), inter_unit(rng), inter_unit(rng)};
  std::vector<std::uint8_t> bytes;
  for (const auto& u : units) append_serialized(u, bytes);
  CHECK(parse_stream(bytes) == units);

  const auto path = std::filesystem::temp_directory_path() / "nvc_bitstream_test.nvc1";
  write_stream(path, units);
  CHECK(read_stream(path) == units);
  CHECK(std::filesystem::file_size(path) == bytes.size());
  std::filesystem::remove(path);
}

TEST_CASE("header layout is little endian") {
  BitstreamUnit u;
  u.frame_type = FrameType::kIntra;
  u.width = 0x0102;
  u.height = 0x0304;
  u.lambda_index = 3;
  u.chunks = {{ChunkId::kIntraHyper, {0xAA}}, {ChunkId::kIntraLatent, {}}};
  const auto b = serialize(u);
  const std::vector<std::uint8_t> expected = {'N', 'V', 'C', '1', 1, 0, 0x02, 0x01, 0x04, 0x03, 3, 2,
                                              0, 1, 0, 0, 0, 0xAA, 1, 0, 0, 0, 0};
  CHECK(b == expected);
  CHECK(u.total_bytes() == b.size());
  CHECK(u.bpp() == doctest::Approx(8.0 * b.size() / (0x0102 * 0x0304)));
}

TEST_CASE("bpp counts header and payload bytes") {
  std::mt19937 rng(2);
  const BitstreamUnit u = inter_unit(rng);
  const std::size_t bytes = serialize(u).size();
  CHECK(bytes == kUnitHeaderBytes + 4 * kChunkHeaderBytes + u.payload_bytes());
  CHECK(u.bpp() == doctest::Approx(8.0 * bytes / (96.0 * 64.0)));
}

TEST_CASE("corruption is detected") {
  std::mt19937 rng(3);
  const auto good = serialize(inter_unit(rng));

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(parse_error(bad_magic) == ErrorCode::kBadMagic);

  auto bad_version = good;
  bad_version[4] = 9;
  CHECK(parse_error(bad_version) == ErrorCode::kVersionMismatch);

  auto unknown = good;
  unknown[12] = 17;
  CHECK(parse_error(unknown) == ErrorCode::kUnknownChunk);

  auto reordered = good;
  reordered[12] = static_cast<std::uint8_t>(ChunkId::kContextLatent);
  CHECK(parse_error(reordered) == ErrorCode::kMalformedStream);

  auto truncated = good;
  truncated.pop_back();
  CHECK(parse_error(truncated) == ErrorCode::kMalformedStream);

  auto few = good;
  few[11] = 3;
  CHECK_THROWS_AS(parse_stream(few), Error);

  auto intra_with_inter_chunks = good;
  intra_with_inter_chunks[5] = 0;
  CHECK(parse_error(intra_with_inter_chunks) == ErrorCode::kMalformedStream);
}

TEST_CASE("chunk lookup") {
  std::mt19937 rng(4);
  const BitstreamUnit u = inter_unit(rng);
  CHECK(&u.chunk(ChunkId::kContextHyper) == &u.chunks[2]);
  CHECK_THROWS_AS(u.chunk(ChunkId::kIntraLatent), Error);
}
