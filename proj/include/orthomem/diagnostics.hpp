#pragma once

// Spectral and numerical stability metrics over a state trajectory.

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "orthomem/linalg.hpp"
#include "orthomem/state.hpp"

namespace orthomem {

/// Steps whose smallest singular value falls below this count as collapsed.
inline constexpr double kCollapseThreshold = 1e-3;

struct StepDiagnostics {
  Index step = 0;
  VectorXd sigma;                       // state spectrum, descending; empty if not computed
  std::optional<double> sigma_min_pre;  // sigma_min of the ambient (pre-projection) update
  double orth_err = 0.0;                // ||(S/gamma)^T (S/gamma) - I||_F
  double update_norm = 0.0;             // ||S_t - S_{t-1}||_F
  double grad_norm = 0.0;               // ||G_t||_F
  bool warming_up = false;
  bool degenerate = false;

  bool has_spectrum() const { return sigma.size() > 0; }
  double sigma_min() const { return sigma(sigma.size() - 1); }
  double sigma_max() const { return sigma(0); }
  double mean_sigma() const { return sigma.mean(); }
  /// Population variance of the spectrum.
  double sigma_variance() const;
  /// sigma_max / sigma_min; +inf when sigma_min is zero.
  double condition_number() const;
};

/// Per-trajectory aggregates. Spectral aggregates (msv, svvar, orth_e,
/// col_r, col_r_pre, series) skip warming_up steps unless every recorded
/// step is warming up, in which case all steps are used.
struct TrajectoryReport {
  Index steps = 0;          // recorded steps
  Index warmup_steps = 0;   // of which tagged warming_up
  double msv = 0.0;
  double svvar = 0.0;
  double orth_e = 0.0;
  double col_r = 0.0;                 // % of steps with post-projection sigma_min < 1e-3
  std::optional<double> col_r_pre;    // same, measured on the ambient update
  double grad_var = 0.0;
  double upd_var = 0.0;
  std::optional<double> drift;        // % mean relative recall change; empty without probes
  std::vector<double> msv_series;
  std::vector<double> sigma_min_series;
};

/// What the memory returned for a probe key right after it was written, and
/// at the end of the trajectory.
struct DriftProbe {
  VectorXd at_insert;
  VectorXd at_end;
};

/// Spectrum via the SVD oracle plus orthogonality, update and gradient norms.
template <typename Scalar>
StepDiagnostics step_diagnostics(const StateMatrix<Scalar>& s, const StateMatrix<Scalar>& s_prev,
                                 const Matrix<Scalar>& grad) {
  if (s.s.rows() != s_prev.s.rows() || s.s.cols() != s_prev.s.cols())
    throw InvalidArgument("step_diagnostics: state shapes differ");
  if (grad.rows() != s.s.rows() || grad.cols() != s.s.cols())
    throw InvalidArgument("step_diagnostics: gradient shape differs from state");
  StepDiagnostics d;
  d.sigma = svd(s.s).sigma.template cast<double>();
  d.orth_err = static_cast<double>(orthogonality_error(s.s, s.gamma));
  d.update_norm = static_cast<double>(frobenius_norm(s.s - s_prev.s));
  d.grad_norm = static_cast<double>(frobenius_norm(grad));
  return d;
}

/// Aggregate a trajectory. Throws InvalidArgument on an empty trajectory or
/// on a step without a spectrum.
TrajectoryReport summarize(std::span<const StepDiagnostics> trajectory, std::span<const DriftProbe> probes = {});

/// 100 * mean_i ||at_end_i - at_insert_i|| / ||at_insert_i||, skipping probes
/// whose insert-time recall is zero. Empty when no probe contributes.
std::optional<double> drift_percent(std::span<const DriftProbe> probes);

}  // namespace orthomem
