#pragma once

#include <vector>

#include "nvc/range_coder.hpp"

namespace nvc {

// Discretized zero-mean Laplace with scale b over integers [-K, K]; the tail
// mass beyond +-K is folded into the boundary entries.
std::vector<double> laplace_pmf(double scale, int half_width);

// Table half-width used for a Laplace scale: ceil(12 b) clamped to [2, 2048].
int laplace_half_width(double scale);

CdfTable laplace_cdf(double scale);

// Symbols at or beyond the table boundary are sent as the boundary symbol
// followed by an order-0 Exp-Golomb code of the overshoot using equiprobable
// binary decisions, so any integer value round-trips.
void encode_escaped(RangeEncoder& encoder, int value, const CdfTable& table);
int decode_escaped(RangeDecoder& decoder, const CdfTable& table);

}  // namespace nvc
