#pragma once

#include <cstddef>

#include "dnagen/gradcore/graph.hpp"

namespace dnagen::ad {

// Constant-value padding applied on both ends of the length axis before a
// convolution.
struct PadSpec {
  std::size_t left = 0;
  std::size_t right = 0;
  double value = 0.0;

  static PadSpec none() { return {}; }
  // Output length equals input length for an odd filter length k.
  static PadSpec same(std::size_t k) { return {(k - 1) / 2, k - 1 - (k - 1) / 2, 0.0}; }
  static PadSpec flank(std::size_t width, double value) { return {width, width, value}; }
};

// x: [D_in] or [B, D_in]; weight: [D_in, D_out]; bias: [D_out].
Var linear(Var x, Var weight, Var bias);

// Cross-correlation: out[p, o] = sum_{k,c} xpad[p + k, c] * filters[k, c, o] + bias[o].
// x: [L, C_in] or [B, L, C_in]; filters: [K, C_in, C_out]; bias: [C_out].
Var conv1d(Var x, Var filters, Var bias, PadSpec pad = {});
Var conv1d(Var x, Var filters, PadSpec pad = {});

inline Var relu(Var x) { return leaky_relu(x, 0.0); }

// Softmax over a trailing axis of exactly four nucleotide channels.
Var softmax_channels(Var x);

// Per-channel maximum over the length axis: [L, C] -> [C], [B, L, C] -> [B, C].
// Ties route the gradient to the lowest position.
Var max_over_length(Var x);
Var mean_over_length(Var x);

// Per-channel max pooling followed by mean pooling: [L, C] -> [2C].
Var pool_concat(Var x);

struct ResBlockParams {
  Var filters1, bias1, filters2, bias2;
};

// x + r * conv(relu(conv(relu(x)))), both convolutions length-preserving.
Var resblock(Var x, const ResBlockParams& p, double r);

}  // namespace dnagen::ad
