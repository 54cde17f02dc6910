#include "nvc/range_coder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nvc/error.hpp"

namespace nvc {

namespace {
constexpr std::uint32_t kTopValue = 1u << 24;
}

CdfTable build_cdf(std::span<const double> pmf, int min_symbol) {
  const std::size_t n = pmf.size();
  if (n == 0) throw Error(ErrorCode::kEmptyRange, "pmf has no symbols");
  if (n > kCdfTotal) throw Error(ErrorCode::kEmptyRange, "pmf has more symbols than 2^16 counts");

  long double total = 0;
  for (double p : pmf) {
    if (!std::isfinite(p) || p < 0) {
      throw Error(ErrorCode::kInvalidConfig, "pmf entries must be finite and non-negative");
    }
    total += p;
  }

  const std::uint32_t spare = kCdfTotal - static_cast<std::uint32_t>(n);
  std::vector<std::uint32_t> counts(n, 1);
  std::vector<long double> remainder(n, 0);
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double quota =
        total > 0 ? static_cast<long double>(pmf[i]) * spare / total
                  : static_cast<long double>(spare) / n;
    const auto whole = static_cast<std::uint32_t>(std::floor(quota));
    counts[i] += whole;
    remainder[i] = quota - whole;
    assigned += whole;
  }

  std::uint64_t leftover = spare - assigned;
  if (leftover > 0) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; leftover > 0; k = (k + 1) % n, --leftover) ++counts[order[k]];
  }

  CdfTable table;
  table.min_symbol = min_symbol;
  table.cdf.resize(n + 1);
  table.cdf[0] = 0;
  for (std::size_t i = 0; i < n; ++i) table.cdf[i + 1] = table.cdf[i] + counts[i];
  return table;
}

void check_cdf(const CdfTable& table) {
  if (table.cdf.size() < 2) throw Error(ErrorCode::kEmptyRange, "cdf table has no symbols");
  if (table.cdf.front() != 0 || table.cdf.back() != kCdfTotal) {
    throw Error(ErrorCode::kMalformedStream, "cdf table must run from 0 to 2^16");
  }
  for (std::size_t i = 1; i < table.cdf.size(); ++i) {
    if (table.cdf[i] <= table.cdf[i - 1]) {
      throw Error(ErrorCode::kMalformedStream, "cdf table not strictly increasing");
    }
  }
}

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t pending = cache_;
    do {
      bytes_.push_back(static_cast<std::uint8_t>(pending + carry));
      pending = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

void RangeEncoder::encode_interval(std::uint32_t low, std::uint32_t freq) {
  const std::uint32_t r = range_ >> kCdfPrecisionBits;
  low_ += static_cast<std::uint64_t>(r) * low;
  range_ = r * freq;
  while (range_ < kTopValue) {
    range_ <<= 8;
    shift_low();
  }
  ++symbols_;
}

void RangeEncoder::encode(int symbol, const CdfTable& table) {
  const int index = symbol - table.min_symbol;
  if (index < 0 || index >= table.size()) {
    throw Error(ErrorCode::kSymbolOutOfRange,
                "symbol " + std::to_string(symbol) + " outside [" + std::to_string(table.min_symbol) +
                    ", " + std::to_string(table.max_symbol()) + "]");
  }
  encode_interval(table.cdf[index], table.frequency(index));
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  // The first byte is the initial (always zero) cache and carries nothing.
  std::vector<std::uint8_t> out(bytes_.begin() + 1, bytes_.end());
  bytes_.clear();
  return out;
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : bytes_(bytes) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= bytes_.size()) {
    throw Error(ErrorCode::kMalformedStream, "range decoder ran past the end of the chunk");
  }
  return bytes_[pos_++];
}

int RangeDecoder::decode(const CdfTable& table) {
  const std::uint32_t r = range_ >> kCdfPrecisionBits;
  const std::uint32_t value = code_ / r;
  if (value >= kCdfTotal) throw Error(ErrorCode::kMalformedStream, "code value out of range");
  const auto it = std::upper_bound(table.cdf.begin(), table.cdf.end(), value);
  const int index = static_cast<int>(it - table.cdf.begin()) - 1;
  if (index < 0 || index >= table.size()) {
    throw Error(ErrorCode::kMalformedStream, "decoded value outside the table");
  }
  code_ -= r * table.cdf[index];
  range_ = r * table.frequency(index);
  while (range_ < kTopValue) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
  ++symbols_;
  return table.min_symbol + index;
}

CodedChunk rc_encode(std::span<const int> symbols, std::span<const CdfTable> cdfs) {
  if (symbols.size() != cdfs.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one cdf table per symbol required");
  }
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) enc.encode(symbols[i], cdfs[i]);
  return {enc.finish(), symbols.size()};
}

std::vector<int> rc_decode(const CodedChunk& chunk, std::span<const CdfTable> cdfs) {
  if (chunk.symbol_count != cdfs.size()) {
    throw Error(ErrorCode::kMalformedStream,
                "chunk holds " + std::to_string(chunk.symbol_count) + " symbols, " +
                    std::to_string(cdfs.size()) + " tables supplied");
  }
  RangeDecoder dec(chunk.bytes);
  std::vector<int> out;
  out.reserve(cdfs.size());
  for (const auto& table : cdfs) out.push_back(dec.decode(table));
  return out;
}

FlatCdfs flatten(std::span<const CdfTable> tables) {
  FlatCdfs flat;
  flat.offsets.push_back(0);
  for (const auto& t : tables) {
    flat.cdf_data.insert(flat.cdf_data.end(), t.cdf.begin(), t.cdf.end());
    flat.offsets.push_back(flat.cdf_data.size());
    flat.min_symbols.push_back(t.min_symbol);
  }
  return flat;
}

std::vector<CdfTable> unflatten(const FlatCdfs& flat) {
  if (flat.offsets.size() != flat.min_symbols.size() + 1) {
    throw Error(ErrorCode::kMalformedStream, "flat cdf offsets do not match table count");
  }
  std::vector<CdfTable> tables;
  tables.reserve(flat.min_symbols.size());
  for (std::size_t i = 0; i < flat.min_symbols.size(); ++i) {
    if (flat.offsets[i + 1] > flat.cdf_data.size() || flat.offsets[i + 1] < flat.offsets[i]) {
      throw Error(ErrorCode::kMalformedStream, "flat cdf offsets out of bounds");
    }
    CdfTable t;
    t.min_symbol = flat.min_symbols[i];
    t.cdf.assign(flat.cdf_data.begin() + static_cast<std::ptrdiff_t>(flat.offsets[i]),
                 flat.cdf_data.begin() + static_cast<std::ptrdiff_t>(flat.offsets[i + 1]));
    check_cdf(t);
    tables.push_back(std::move(t));
  }
  return tables;
}

}  // namespace nvc
