#pragma once

// Feature block: box-mean background with edge-aware counts, signed
// residual split into positive and negative parts, one 3x3 conv branch per
// part (separate weights), then a per-pixel sigmoid gate blends the two.

#include <cstdint>
#include <vector>

#include "orthomem/linalg.hpp"

namespace orthomem {

/// Dense B x C x H x W tensor, row-major in (b, c, h, w).
struct Tensor4 {
  Index b = 0, c = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(Index b_, Index c_, Index h_, Index w_, double fill = 0.0);

  Index size() const { return b * c * h * w; }
  bool same_shape(const Tensor4& o) const { return b == o.b && c == o.c && h == o.h && w == o.w; }

  double& operator()(Index n, Index ch, Index y, Index x) { return data[offset(n, ch, y, x)]; }
  double operator()(Index n, Index ch, Index y, Index x) const { return data[offset(n, ch, y, x)]; }

  std::size_t offset(Index n, Index ch, Index y, Index x) const {
    return static_cast<std::size_t>(((n * c + ch) * h + y) * w + x);
  }

  /// Throws InvalidArgument on bad dims, length mismatch or non-finite data.
  void validate() const;
};

/// One Conv3x3 -> affine -> ReLU branch.
struct ConvBranch {
  Tensor4 kernel;  // C_out x C_in x 3 x 3
  VectorXd scale;  // C_out
  VectorXd shift;  // C_out

  Index in_channels() const { return kernel.c; }
  Index out_channels() const { return kernel.b; }
  void validate() const;
};

/// 1x1 gate convolution over the concatenated branch outputs.
struct GateConv {
  MatrixXd weight;  // C x 2C
  VectorXd bias;    // C
};

struct BranchWeights {
  ConvBranch phi_plus;
  ConvBranch phi_minus;
  GateConv gate;

  void validate() const;

  /// Kernels ~ N(0, 1/(9 C_in)), gate ~ N(0, 1/(2C)), unit scale, zero
  /// shift and bias.
  static BranchWeights seeded(Index in_channels, Index out_channels, std::uint64_t seed);
};

struct Polarity {
  Tensor4 plus;
  Tensor4 minus;
};

struct FuseResult {
  Tensor4 z;
  Tensor4 lambda;
};

/// K x K mean centered on each pixel, dividing by the number of in-image
/// pixels in the window. k must be odd and at most 2 max(h, w) - 1.
Tensor4 local_field(const Tensor4& x, Index k);

/// plus = max(x - m, 0), minus = max(m - x, 0).
Polarity decompose(const Tensor4& x, const Tensor4& m);

/// 3x3 convolution (stride 1, zero padding 1), per-channel affine, ReLU.
Tensor4 branch(const Tensor4& x, const ConvBranch& weights);

/// lambda = sigmoid(W_g [h_plus; h_minus] + bias),
/// z = lambda * h_plus + (1 - lambda) * h_minus.
FuseResult fuse(const Tensor4& h_plus, const Tensor4& h_minus, const GateConv& gate);

Tensor4 apfe_forward(const Tensor4& x, Index k, const BranchWeights& weights);

}  // namespace orthomem
