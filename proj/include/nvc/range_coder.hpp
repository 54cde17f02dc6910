#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nvc {

// Reference implementation of the byte-oriented range coder. It pins the
// byte format: 32-bit range, 16-bit probabilities, LZMA-style carry
// propagation. Any other back end must produce byte-identical output.

inline constexpr int kCdfPrecisionBits = 16;
inline constexpr std::uint32_t kCdfTotal = 1u << kCdfPrecisionBits;
inline constexpr std::uint8_t kRangeCoderFormatVersion = 1;

// Cumulative counts for symbols min_symbol .. min_symbol + size() - 1.
// cdf.front() == 0, cdf.back() == kCdfTotal, strictly increasing.
struct CdfTable {
  int min_symbol = 0;
  std::vector<std::uint32_t> cdf;

  int size() const { return static_cast<int>(cdf.size()) - 1; }
  int max_symbol() const { return min_symbol + size() - 1; }
  std::uint32_t frequency(int index) const { return cdf[index + 1] - cdf[index]; }

  bool operator==(const CdfTable&) const = default;
};

// Quantizes a probability mass function over min_symbol.. to 16-bit counts.
// Every symbol keeps at least one count; the remaining 2^16 - n counts are
// split proportionally with largest-remainder rounding (ties go to the lower
// index). Callers fold out-of-range mass into the boundary entries before
// calling. An all-zero pmf yields a uniform table.
CdfTable build_cdf(std::span<const double> pmf, int min_symbol);

// Throws Error(kEmptyRange / kMalformedStream) when the table is unusable.
void check_cdf(const CdfTable& table);

class RangeEncoder {
 public:
  void encode(int symbol, const CdfTable& table);
  // Encodes a symbol given by its cumulative interval [low, low + freq).
  void encode_interval(std::uint32_t low, std::uint32_t freq);
  std::vector<std::uint8_t> finish();

  std::size_t symbol_count() const { return symbols_; }

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::size_t symbols_ = 0;
  std::vector<std::uint8_t> bytes_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);

  int decode(const CdfTable& table);

  std::size_t symbol_count() const { return symbols_; }
  // True when every input byte has been consumed.
  bool exhausted() const { return pos_ >= bytes_.size(); }

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::size_t symbols_ = 0;
};

struct CodedChunk {
  std::vector<std::uint8_t> bytes;
  std::size_t symbol_count = 0;

  bool operator==(const CodedChunk&) const = default;
};

// One table per symbol. Throws kSymbolOutOfRange when a symbol falls
// outside its table.
CodedChunk rc_encode(std::span<const int> symbols, std::span<const CdfTable> cdfs);
// Throws kMalformedStream when the chunk cannot yield cdfs.size() symbols.
std::vector<int> rc_decode(const CodedChunk& chunk, std::span<const CdfTable> cdfs);

// Flat boundary layout shared with external coder back ends: table i spans
// cdf_data[offsets[i] .. offsets[i + 1]) and starts at min_symbols[i].
struct FlatCdfs {
  std::vector<std::uint32_t> cdf_data;
  std::vector<std::uint64_t> offsets;
  std::vector<std::int32_t> min_symbols;
};

FlatCdfs flatten(std::span<const CdfTable> tables);
std::vector<CdfTable> unflatten(const FlatCdfs& flat);

}  // namespace nvc
