#include "nvc/symbol_coding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "nvc/error.hpp"

namespace nvc {

namespace {

// P(X <= x) for a zero-mean Laplace with scale b.
double laplace_cdf_at(double x, double b) {
  return x < 0 ? 0.5 * std::exp(x / b) : 1.0 - 0.5 * std::exp(-x / b);
}

constexpr std::uint32_t kHalf = kCdfTotal / 2;
constexpr int kMaxExpGolombPrefix = 30;

void encode_bit(RangeEncoder& enc, bool bit) { enc.encode_interval(bit ? kHalf : 0, kHalf); }

const CdfTable& bit_table() {
  static const CdfTable table{0, {0, kHalf, kCdfTotal}};
  return table;
}

void encode_exp_golomb(RangeEncoder& enc, std::uint32_t value) {
  const std::uint64_t v = static_cast<std::uint64_t>(value) + 1;
  int prefix = 0;
  while ((v >> (prefix + 1)) != 0) ++prefix;
  for (int i = 0; i < prefix; ++i) encode_bit(enc, true);
  encode_bit(enc, false);
  for (int i = prefix - 1; i >= 0; --i) encode_bit(enc, ((v >> i) & 1) != 0);
}

std::uint32_t decode_exp_golomb(RangeDecoder& dec) {
  int prefix = 0;
  while (dec.decode(bit_table()) == 1) {
    if (++prefix > kMaxExpGolombPrefix) {
      throw Error(ErrorCode::kMalformedStream, "escape code prefix too long");
    }
  }
  std::uint64_t v = 1;
  for (int i = 0; i < prefix; ++i) v = (v << 1) | static_cast<std::uint64_t>(dec.decode(bit_table()));
  return static_cast<std::uint32_t>(v - 1);
}

}  // namespace

std::vector<double> laplace_pmf(double scale, int half_width) {
  std::vector<double> pmf(2 * half_width + 1);
  // Computed on |s| so the table is exactly symmetric.
  for (int k = 0; k <= half_width; ++k) {
    double p;
    if (k == half_width) {
      p = 0.5 * std::exp(-(k - 0.5) / scale);
    } else if (k == 0) {
      p = 1.0 - std::exp(-0.5 / scale);
    } else {
      p = laplace_cdf_at(k + 0.5, scale) - laplace_cdf_at(k - 0.5, scale);
    }
    pmf[half_width + k] = p;
    pmf[half_width - k] = p;
  }
  return pmf;
}

int laplace_half_width(double scale) {
  const double k = std::ceil(12.0 * scale);
  return static_cast<int>(std::clamp(k, 2.0, 2048.0));
}

CdfTable laplace_cdf(double scale) {
  const int k = laplace_half_width(scale);
  const auto pmf = laplace_pmf(scale, k);
  return build_cdf(pmf, -k);
}

void encode_escaped(RangeEncoder& encoder, int value, const CdfTable& table) {
  const int lo = table.min_symbol;
  const int hi = table.max_symbol();
  if (value <= lo) {
    encoder.encode(lo, table);
    encode_exp_golomb(encoder, static_cast<std::uint32_t>(static_cast<std::int64_t>(lo) - value));
  } else if (value >= hi) {
    encoder.encode(hi, table);
    encode_exp_golomb(encoder, static_cast<std::uint32_t>(static_cast<std::int64_t>(value) - hi));
  } else {
    encoder.encode(value, table);
  }
}

int decode_escaped(RangeDecoder& decoder, const CdfTable& table) {
  const int s = decoder.decode(table);
  if (s == table.min_symbol) return s - static_cast<int>(decode_exp_golomb(decoder));
  if (s == table.max_symbol()) return s + static_cast<int>(decode_exp_golomb(decoder));
  return s;
}

}  // namespace nvc
