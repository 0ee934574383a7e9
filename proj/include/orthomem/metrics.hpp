#pragma once

// Segmentation and clinical metrics: Dice, HD95, area-based ejection
// fraction, Pearson/bias/std agreement and the temporal matching error.

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "orthomem/linalg.hpp"

namespace orthomem {

using BinaryMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskSequence = std::vector<BinaryMask>;

enum class Hd95Mode {
  kPooled,       // 95th percentile of both directed distance sets pooled
  kMaxDirected,  // max of the two directed 95th percentiles
};

/// 2|A n B| / (|A| + |B|); 1 when both masks are empty.
double dice(const BinaryMask& a, const BinaryMask& b);

/// Mask pixels with at least one 4-neighbour outside the mask or off-image.
BinaryMask boundary(const BinaryMask& a);

/// Distances from each boundary pixel of `from` to the nearest boundary
/// pixel of `to`, in row-major order of `from`'s boundary.
std::vector<double> directed_boundary_distances(const BinaryMask& from, const BinaryMask& to);

/// Linear interpolation between order statistics at position q (n - 1).
double percentile(std::vector<double> values, double q);

/// 95th-percentile boundary distance in pixels times `spacing`.
/// Throws UndefinedMetric if either mask is empty.
double hd95(const BinaryMask& a, const BinaryMask& b, Hd95Mode mode = Hd95Mode::kPooled, double spacing = 1.0);

/// Largest boundary-to-boundary nearest distance (symmetric Hausdorff).
double hausdorff(const BinaryMask& a, const BinaryMask& b);

/// (a_ed - a_es) / a_ed.
double ef_area(double a_ed, double a_es);

struct EfStats {
  std::optional<double> corr;  // empty when either series is constant
  double bias = 0.0;           // mean(pred - ref)
  double std = 0.0;            // population std of (pred - ref)

  /// Throws UndefinedMetric when corr is empty.
  double corr_or_throw() const;
};

EfStats ef_stats(std::span<const double> pred, std::span<const double> ref);

/// Mean |Dice(M_t, M_{t-1}) - Dice(G_t, G_{t-1})| over t = 1..T-1.
double temporal_matching_error(const MaskSequence& m, const MaskSequence& g);

}  // namespace orthomem
