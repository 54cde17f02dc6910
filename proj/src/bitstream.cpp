#include "nvc/bitstream.hpp"

#include <array>
#include <fstream>
#include <iterator>
#include <string>

#include "nvc/error.hpp"

namespace nvc {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'N', 'V', 'C', '1'};
constexpr std::array kIntraOrder = {ChunkId::kIntraHyper, ChunkId::kIntraLatent};
constexpr std::array kInterOrder = {ChunkId::kMotionHyper, ChunkId::kMotionLatent,
                                    ChunkId::kContextHyper, ChunkId::kContextLatent};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t offset) : bytes_(bytes), pos_(offset) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw Error(ErrorCode::kMalformedStream, "unit truncated at byte " + std::to_string(pos_));
    }
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::vector<std::uint8_t> take(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> out(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
};

std::span<const ChunkId> expected_order(FrameType type) {
  if (type == FrameType::kIntra) return kIntraOrder;
  return kInterOrder;
}

}  // namespace

std::size_t BitstreamUnit::payload_bytes() const {
  std::size_t n = 0;
  for (const auto& c : chunks) n += c.payload.size();
  return n;
}

std::size_t BitstreamUnit::total_bytes() const {
  return kUnitHeaderBytes + chunks.size() * kChunkHeaderBytes + payload_bytes();
}

double BitstreamUnit::bpp() const {
  return 8.0 * static_cast<double>(total_bytes()) / (static_cast<double>(width) * height);
}

const Chunk& BitstreamUnit::chunk(ChunkId id) const {
  for (const auto& c : chunks) {
    if (c.id == id) return c;
  }
  throw Error(ErrorCode::kMalformedStream,
              "unit has no chunk " + std::to_string(static_cast<int>(id)));
}

void append_serialized(const BitstreamUnit& unit, std::vector<std::uint8_t>& out) {
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  out.push_back(unit.version);
  out.push_back(static_cast<std::uint8_t>(unit.frame_type));
  put_u16(out, unit.width);
  put_u16(out, unit.height);
  out.push_back(unit.lambda_index);
  out.push_back(static_cast<std::uint8_t>(unit.chunks.size()));
  for (const auto& c : unit.chunks) {
    out.push_back(static_cast<std::uint8_t>(c.id));
    put_u32(out, static_cast<std::uint32_t>(c.payload.size()));
    out.insert(out.end(), c.payload.begin(), c.payload.end());
  }
}

std::vector<std::uint8_t> serialize(const BitstreamUnit& unit) {
  std::vector<std::uint8_t> out;
  out.reserve(unit.total_bytes());
  append_serialized(unit, out);
  return out;
}

BitstreamUnit parse_unit(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  Reader r(bytes, offset);
  r.need(kMagic.size());
  for (std::uint8_t m : kMagic) {
    if (r.u8() != m) throw Error(ErrorCode::kBadMagic, "unit does not start with NVC1");
  }
  BitstreamUnit unit;
  unit.version = r.u8();
  if (unit.version != kBitstreamVersion) {
    throw Error(ErrorCode::kVersionMismatch, "bitstream version " + std::to_string(unit.version) +
                                                 ", decoder supports " +
                                                 std::to_string(kBitstreamVersion));
  }
  const std::uint8_t type = r.u8();
  if (type > 1) throw Error(ErrorCode::kMalformedStream, "unknown frame type");
  unit.frame_type = static_cast<FrameType>(type);
  unit.width = r.u16();
  unit.height = r.u16();
  if (unit.width == 0 || unit.height == 0) throw Error(ErrorCode::kMalformedStream, "zero dimensions");
  unit.lambda_index = r.u8();
  const std::uint8_t count = r.u8();
  const auto order = expected_order(unit.frame_type);
  for (std::uint8_t i = 0; i < count; ++i) {
    const std::uint8_t id = r.u8();
    if (id > static_cast<std::uint8_t>(ChunkId::kContextLatent)) {
      throw Error(ErrorCode::kUnknownChunk, "chunk id " + std::to_string(id));
    }
    if (i >= order.size() || static_cast<ChunkId>(id) != order[i]) {
      throw Error(ErrorCode::kMalformedStream, "chunk " + std::to_string(id) + " out of order");
    }
    const std::uint32_t length = r.u32();
    unit.chunks.push_back({static_cast<ChunkId>(id), r.take(length)});
  }
  if (unit.chunks.size() != order.size()) {
    throw Error(ErrorCode::kMalformedStream, "unit carries " + std::to_string(count) +
                                                 " chunks, expected " + std::to_string(order.size()));
  }
  offset = r.pos();
  return unit;
}

std::vector<BitstreamUnit> parse_stream(std::span<const std::uint8_t> bytes) {
  std::vector<BitstreamUnit> units;
  std::size_t offset = 0;
  while (offset < bytes.size()) units.push_back(parse_unit(bytes, offset));
  return units;
}

void write_stream(const std::filesystem::path& path, std::span<const BitstreamUnit> units) {
  std::vector<std::uint8_t> bytes;
  for (const auto& u : units) append_serialized(u, bytes);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<BitstreamUnit> read_stream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_stream(bytes);
}

}  // namespace nvc
