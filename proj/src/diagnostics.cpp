#include "orthomem/diagnostics.hpp"

#include <cmath>

namespace orthomem {
namespace {

double mean(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double population_variance(const std::vector<double>& xs) {
  const double mu = mean(xs);
  double sum = 0.0;
  for (double x : xs) sum += (x - mu) * (x - mu);
  return sum / static_cast<double>(xs.size());
}

}  // namespace

double StepDiagnostics::sigma_variance() const {
  const double mu = mean_sigma();
  return (sigma.array() - mu).square().sum() / static_cast<double>(sigma.size());
}

double StepDiagnostics::condition_number() const {
  if (sigma_min() == 0.0) return std::numeric_limits<double>::infinity();
  return sigma_max() / sigma_min();
}

std::optional<double> drift_percent(std::span<const DriftProbe> probes) {
  double sum = 0.0;
  int used = 0;
  for (const DriftProbe& p : probes) {
    if (p.at_insert.size() != p.at_end.size()) throw InvalidArgument("drift probe: vector lengths differ");
    const double base = p.at_insert.norm();
    if (base == 0.0) continue;
    sum += (p.at_end - p.at_insert).norm() / base;
    ++used;
  }
  if (used == 0) return std::nullopt;
  return 100.0 * sum / used;
}

TrajectoryReport summarize(std::span<const StepDiagnostics> trajectory, std::span<const DriftProbe> probes) {
  if (trajectory.empty()) throw InvalidArgument("summarize: empty trajectory");

  TrajectoryReport r;
  r.steps = static_cast<Index>(trajectory.size());
  for (const StepDiagnostics& d : trajectory) {
    if (!d.has_spectrum()) throw InvalidArgument("summarize: step " + std::to_string(d.step) + " has no spectrum");
    if (d.warming_up) ++r.warmup_steps;
  }
  const bool all_warm = r.warmup_steps == r.steps;

  std::vector<double> svvar_series, orth, grads, updates;
  Index collapsed = 0, pre_steps = 0, pre_collapsed = 0;
  for (const StepDiagnostics& d : trajectory) {
    grads.push_back(d.grad_norm);
    updates.push_back(d.update_norm);
    if (d.warming_up && !all_warm) continue;
    r.msv_series.push_back(d.mean_sigma());
    r.sigma_min_series.push_back(d.sigma_min());
    svvar_series.push_back(d.sigma_variance());
    orth.push_back(d.orth_err);
    if (d.sigma_min() < kCollapseThreshold) ++collapsed;
    if (d.sigma_min_pre) {
      ++pre_steps;
      if (*d.sigma_min_pre < kCollapseThreshold) ++pre_collapsed;
    }
  }

  r.msv = mean(r.msv_series);
  r.svvar = mean(svvar_series);
  r.orth_e = mean(orth);
  r.col_r = 100.0 * static_cast<double>(collapsed) / static_cast<double>(r.msv_series.size());
  if (pre_steps > 0) r.col_r_pre = 100.0 * static_cast<double>(pre_collapsed) / static_cast<double>(pre_steps);
  r.grad_var = population_variance(grads);
  r.upd_var = population_variance(updates);
  r.drift = drift_percent(probes);
  return r;
}

}  // namespace orthomem
