#include "orthomem/apfe.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "orthomem/rng.hpp"

namespace orthomem {
namespace {

std::string dims(const Tensor4& t) {
  return std::to_string(t.b) + "x" + std::to_string(t.c) + "x" + std::to_string(t.h) + "x" + std::to_string(t.w);
}

void require_same(const Tensor4& a, const Tensor4& b, const char* op) {
  if (!a.same_shape(b)) throw InvalidArgument(std::string(op) + ": shapes differ (" + dims(a) + " vs " + dims(b) + ")");
}

}  // namespace

Tensor4::Tensor4(Index b_, Index c_, Index h_, Index w_, double fill) : b(b_), c(c_), h(h_), w(w_) {
  if (b <= 0 || c <= 0 || h <= 0 || w <= 0) throw InvalidArgument("Tensor4: dimensions must be positive");
  data.assign(static_cast<std::size_t>(size()), fill);
}

void Tensor4::validate() const {
  if (b <= 0 || c <= 0 || h <= 0 || w <= 0) throw InvalidArgument("Tensor4: dimensions must be positive");
  if (static_cast<Index>(data.size()) != size()) throw InvalidArgument("Tensor4: data length != b*c*h*w");
  for (double v : data)
    if (!std::isfinite(v)) throw InvalidArgument("Tensor4: non-finite entry");
}

void ConvBranch::validate() const {
  kernel.validate();
  if (kernel.h != 3 || kernel.w != 3) throw InvalidArgument("branch: kernel must be C_out x C_in x 3 x 3");
  if (scale.size() != out_channels() || shift.size() != out_channels())
    throw InvalidArgument("branch: scale/shift length must equal C_out");
  if (!scale.allFinite() || !shift.allFinite()) throw InvalidArgument("branch: non-finite affine parameters");
}

void BranchWeights::validate() const {
  phi_plus.validate();
  phi_minus.validate();
  if (phi_plus.kernel.b != phi_minus.kernel.b || phi_plus.kernel.c != phi_minus.kernel.c)
    throw InvalidArgument("weights: phi_plus and phi_minus shapes differ");
  const Index c = phi_plus.out_channels();
  if (gate.weight.rows() != c || gate.weight.cols() != 2 * c || gate.bias.size() != c)
    throw InvalidArgument("weights: gate must be C x 2C with C biases");
  if (!gate.weight.allFinite() || !gate.bias.allFinite()) throw InvalidArgument("weights: non-finite gate");
}

BranchWeights BranchWeights::seeded(Index in_channels, Index out_channels, std::uint64_t seed) {
  Rng rng(seed);
  auto make_branch = [&] {
    ConvBranch br{Tensor4(out_channels, in_channels, 3, 3), VectorXd::Ones(out_channels),
                  VectorXd::Zero(out_channels)};
    const double sd = 1.0 / std::sqrt(9.0 * static_cast<double>(in_channels));
    for (double& v : br.kernel.data) v = sd * rng.normal();
    return br;
  };
  BranchWeights wts;
  wts.phi_plus = make_branch();
  wts.phi_minus = make_branch();
  wts.gate.weight.resize(out_channels, 2 * out_channels);
  const double sd = 1.0 / std::sqrt(2.0 * static_cast<double>(out_channels));
  for (Index i = 0; i < wts.gate.weight.rows(); ++i)
    for (Index j = 0; j < wts.gate.weight.cols(); ++j) wts.gate.weight(i, j) = sd * rng.normal();
  wts.gate.bias = VectorXd::Zero(out_channels);
  return wts;
}

Tensor4 local_field(const Tensor4& x, Index k) {
  x.validate();
  if (k < 1 || k % 2 == 0) throw InvalidArgument("local_field: kernel size must be a positive odd integer");
  // Past 2*max(h,w)-1 every window already covers the whole image.
  if (k > 2 * std::max(x.h, x.w) - 1) throw InvalidArgument("local_field: kernel size exceeds 2*max(h,w)-1");
  const Index r = k / 2;

  // Separable box sums; the valid-pixel count factorizes as rows * cols.
  Tensor4 rows(x.b, x.c, x.h, x.w);
  Tensor4 out(x.b, x.c, x.h, x.w);
  for (Index n = 0; n < x.b; ++n) {
    for (Index ch = 0; ch < x.c; ++ch) {
      for (Index y = 0; y < x.h; ++y) {
        for (Index xx = 0; xx < x.w; ++xx) {
          double sum = 0.0;
          for (Index j = std::max<Index>(0, xx - r); j <= std::min(x.w - 1, xx + r); ++j) sum += x(n, ch, y, j);
          rows(n, ch, y, xx) = sum;
        }
      }
      for (Index y = 0; y < x.h; ++y) {
        const Index y0 = std::max<Index>(0, y - r), y1 = std::min(x.h - 1, y + r);
        for (Index xx = 0; xx < x.w; ++xx) {
          const Index x0 = std::max<Index>(0, xx - r), x1 = std::min(x.w - 1, xx + r);
          double sum = 0.0;
          for (Index i = y0; i <= y1; ++i) sum += rows(n, ch, i, xx);
          out(n, ch, y, xx) = sum / static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
        }
      }
    }
  }
  return out;
}

Polarity decompose(const Tensor4& x, const Tensor4& m) {
  require_same(x, m, "decompose");
  Polarity p{x, x};
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double d = x.data[i] - m.data[i];
    p.plus.data[i] = d > 0.0 ? d : 0.0;
    p.minus.data[i] = d < 0.0 ? -d : 0.0;
  }
  return p;
}

Tensor4 branch(const Tensor4& x, const ConvBranch& weights) {
  x.validate();
  weights.validate();
  if (x.c != weights.in_channels())
    throw InvalidArgument("branch: input has " + std::to_string(x.c) + " channels, kernel expects " +
                          std::to_string(weights.in_channels()));
  const Tensor4& kern = weights.kernel;
  Tensor4 out(x.b, weights.out_channels(), x.h, x.w);
  for (Index n = 0; n < x.b; ++n) {
    for (Index co = 0; co < out.c; ++co) {
      for (Index y = 0; y < x.h; ++y) {
        for (Index xx = 0; xx < x.w; ++xx) {
          double acc = 0.0;
          for (Index ci = 0; ci < x.c; ++ci) {
            for (Index ky = 0; ky < 3; ++ky) {
              const Index iy = y + ky - 1;
              if (iy < 0 || iy >= x.h) continue;
              for (Index kx = 0; kx < 3; ++kx) {
                const Index ix = xx + kx - 1;
                if (ix < 0 || ix >= x.w) continue;
                acc += kern(co, ci, ky, kx) * x(n, ci, iy, ix);
              }
            }
          }
          const double v = weights.scale(co) * acc + weights.shift(co);
          out(n, co, y, xx) = v > 0.0 ? v : 0.0;
        }
      }
    }
  }
  return out;
}

FuseResult fuse(const Tensor4& h_plus, const Tensor4& h_minus, const GateConv& gate) {
  require_same(h_plus, h_minus, "fuse");
  const Index c = h_plus.c;
  if (gate.weight.rows() != c || gate.weight.cols() != 2 * c || gate.bias.size() != c)
    throw InvalidArgument("fuse: gate must map 2C -> C channels");
  FuseResult r{Tensor4(h_plus.b, c, h_plus.h, h_plus.w), Tensor4(h_plus.b, c, h_plus.h, h_plus.w)};
  for (Index n = 0; n < h_plus.b; ++n) {
    for (Index co = 0; co < c; ++co) {
      for (Index y = 0; y < h_plus.h; ++y) {
        for (Index x = 0; x < h_plus.w; ++x) {
          double logit = gate.bias(co);
          for (Index ci = 0; ci < c; ++ci) logit += gate.weight(co, ci) * h_plus(n, ci, y, x);
          for (Index ci = 0; ci < c; ++ci) logit += gate.weight(co, c + ci) * h_minus(n, ci, y, x);
          const double lambda = 1.0 / (1.0 + std::exp(-logit));
          const double hp = h_plus(n, co, y, x), hm = h_minus(n, co, y, x);
          // h_minus + lambda (h_plus - h_minus) keeps z == h when both inputs
          // agree; the clamp absorbs a last-ulp overshoot of the hull.
          const double z = hm + lambda * (hp - hm);
          r.z(n, co, y, x) = std::clamp(z, std::min(hp, hm), std::max(hp, hm));
          r.lambda(n, co, y, x) = lambda;
        }
      }
    }
  }
  return r;
}

Tensor4 apfe_forward(const Tensor4& x, Index k, const BranchWeights& weights) {
  weights.validate();
  const Tensor4 m = local_field(x, k);
  const Polarity p = decompose(x, m);
  const Tensor4 h_plus = branch(p.plus, weights.phi_plus);
  const Tensor4 h_minus = branch(p.minus, weights.phi_minus);
  return fuse(h_plus, h_minus, weights.gate).z;
}

}  // namespace orthomem
