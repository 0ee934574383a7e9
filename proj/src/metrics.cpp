#include "orthomem/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "orthomem/errors.hpp"

namespace orthomem {
namespace {

void require_same_dims(const BinaryMask& a, const BinaryMask& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument(std::string(op) + ": mask dimensions differ (" + detail::shape_str(a.rows(), a.cols()) +
                          " vs " + detail::shape_str(b.rows(), b.cols()) + ")");
}

// Squared Euclidean distance transform of a sampled function, one dimension
// (Felzenszwalb & Huttenlocher lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<Index>& v, std::vector<double>& z) {
  const Index n = static_cast<Index>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Index k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  auto intersect = [&](Index q, Index p) {
    return ((f[q] + double(q) * double(q)) - (f[p] + double(p) * double(p))) / (2.0 * double(q - p));
  };
  for (Index q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (Index q = 0; q < n; ++q) {
    while (z[k + 1] < double(q)) ++k;
    const double dq = double(q - v[k]);
    d[q] = dq * dq + f[v[k]];
  }
}

// Exact squared distance from every pixel to the nearest set pixel.
Eigen::ArrayXXd squared_distance_to(const BinaryMask& set) {
  const Index h = set.rows(), w = set.cols();
  // Finite sentinel keeps the envelope arithmetic free of inf - inf; any real
  // distance is far below it.
  const double far = 1e20;
  Eigen::ArrayXXd dist(h, w);
  const Index n = std::max(h, w);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<Index> v(n);

  for (Index x = 0; x < w; ++x) {
    f.resize(h); d.resize(h);
    for (Index y = 0; y < h; ++y) f[y] = set(y, x) ? 0.0 : far;
    edt_1d(f, d, v, z);
    for (Index y = 0; y < h; ++y) dist(y, x) = d[y];
  }
  for (Index y = 0; y < h; ++y) {
    f.resize(w); d.resize(w);
    for (Index x = 0; x < w; ++x) f[x] = dist(y, x);
    edt_1d(f, d, v, z);
    for (Index x = 0; x < w; ++x) dist(y, x) = d[x];
  }
  return dist;
}

}  // namespace

double dice(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a, b, "dice");
  const Index sa = a.count(), sb = b.count();
  if (sa + sb == 0) return 1.0;
  const Index inter = (a && b).count();
  return 2.0 * static_cast<double>(inter) / static_cast<double>(sa + sb);
}

BinaryMask boundary(const BinaryMask& a) {
  const Index h = a.rows(), w = a.cols();
  BinaryMask out = BinaryMask::Constant(h, w, false);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      if (!a(y, x)) continue;
      const bool edge = y == 0 || x == 0 || y == h - 1 || x == w - 1;
      out(y, x) = edge || !a(y - 1, x) || !a(y + 1, x) || !a(y, x - 1) || !a(y, x + 1);
    }
  }
  return out;
}

std::vector<double> directed_boundary_distances(const BinaryMask& from, const BinaryMask& to) {
  require_same_dims(from, to, "boundary distance");
  const BinaryMask src = boundary(from);
  const BinaryMask dst = boundary(to);
  if (!dst.any()) throw UndefinedMetric("boundary distance: target mask is empty");
  const Eigen::ArrayXXd dist2 = squared_distance_to(dst);
  std::vector<double> out;
  for (Index y = 0; y < src.rows(); ++y)
    for (Index x = 0; x < src.cols(); ++x)
      if (src(y, x)) out.push_back(std::sqrt(dist2(y, x)));
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw UndefinedMetric("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double hd95(const BinaryMask& a, const BinaryMask& b, Hd95Mode mode, double spacing) {
  require_same_dims(a, b, "hd95");
  if (!a.any() || !b.any()) throw UndefinedMetric("hd95: undefined for an empty mask");
  if (!(spacing > 0.0)) throw InvalidArgument("hd95: spacing must be positive");
  std::vector<double> ab = directed_boundary_distances(a, b);
  std::vector<double> ba = directed_boundary_distances(b, a);
  if (mode == Hd95Mode::kMaxDirected) return spacing * std::max(percentile(ab, 0.95), percentile(ba, 0.95));
  ab.insert(ab.end(), ba.begin(), ba.end());
  return spacing * percentile(std::move(ab), 0.95);
}

double hausdorff(const BinaryMask& a, const BinaryMask& b) {
  if (!a.any() || !b.any()) throw UndefinedMetric("hausdorff: undefined for an empty mask");
  const std::vector<double> ab = directed_boundary_distances(a, b);
  const std::vector<double> ba = directed_boundary_distances(b, a);
  return std::max(*std::max_element(ab.begin(), ab.end()), *std::max_element(ba.begin(), ba.end()));
}

double ef_area(double a_ed, double a_es) {
  if (!(a_ed > 0.0)) throw InvalidArgument("ef_area: end-diastolic area must be positive");
  if (!(a_es >= 0.0)) throw InvalidArgument("ef_area: end-systolic area must be non-negative");
  return (a_ed - a_es) / a_ed;
}

double EfStats::corr_or_throw() const {
  if (!corr) throw UndefinedMetric("ef_stats: correlation undefined for a constant series");
  return *corr;
}

EfStats ef_stats(std::span<const double> pred, std::span<const double> ref) {
  if (pred.size() != ref.size()) throw InvalidArgument("ef_stats: series lengths differ");
  if (pred.size() < 2) throw InvalidArgument("ef_stats: need at least two cases");
  const Eigen::Map<const Eigen::ArrayXd> p(pred.data(), static_cast<Index>(pred.size()));
  const Eigen::Map<const Eigen::ArrayXd> r(ref.data(), static_cast<Index>(ref.size()));
  const double n = static_cast<double>(pred.size());

  EfStats out;
  const Eigen::ArrayXd diff = p - r;
  out.bias = diff.mean();
  out.std = std::sqrt((diff - out.bias).square().sum() / n);

  const Eigen::ArrayXd dp = p - p.mean();
  const Eigen::ArrayXd dr = r - r.mean();
  const double sxx = dp.square().sum(), syy = dr.square().sum();
  if (sxx > 0.0 && syy > 0.0) out.corr = (dp * dr).sum() / std::sqrt(sxx * syy);
  return out;
}

double temporal_matching_error(const MaskSequence& m, const MaskSequence& g) {
  if (m.size() != g.size()) throw InvalidArgument("temporal_matching_error: sequence lengths differ");
  if (m.size() < 2) throw InvalidArgument("temporal_matching_error: need at least two frames");
  for (std::size_t t = 1; t < m.size(); ++t) {
    require_same_dims(m[t], m[0], "temporal_matching_error");
    require_same_dims(g[t], m[0], "temporal_matching_error");
  }
  require_same_dims(g[0], m[0], "temporal_matching_error");
  double sum = 0.0;
  for (std::size_t t = 1; t < m.size(); ++t) sum += std::abs(dice(m[t], m[t - 1]) - dice(g[t], g[t - 1]));
  return sum / static_cast<double>(m.size() - 1);
}

}  // namespace orthomem
