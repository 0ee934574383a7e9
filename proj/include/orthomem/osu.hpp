#pragma once

// Orthogonalized state update.
//
// One step of the recurrent memory is a gated delta-rule write in ambient
// space followed by a projection back onto the scaled Stiefel manifold
// {S : S^T S = gamma^2 I}. The projection is a Frobenius prescale followed
// by a fixed number of quintic Newton-Schulz iterations, which use only
// matrix products.

#include <cmath>
#include <string>

#include "orthomem/diagnostics.hpp"
#include "orthomem/linalg.hpp"
#include "orthomem/state.hpp"

namespace orthomem {

namespace detail {

template <typename Scalar>
void check_write(const StateMatrix<Scalar>& prev, const Vector<Scalar>& k, const Vector<Scalar>& v) {
  if (k.size() != prev.c_k())
    throw InvalidArgument("key has length " + std::to_string(k.size()) + ", expected c_k = " +
                          std::to_string(prev.c_k()));
  if (v.size() != prev.c_v())
    throw InvalidArgument("value has length " + std::to_string(v.size()) + ", expected c_v = " +
                          std::to_string(prev.c_v()));
  if (!k.allFinite() || !v.allFinite()) throw InvalidArgument("key/value must be finite");
}

}  // namespace detail

/// G_t = beta * (v - alpha * S_{t-1} k) k^T.
///
/// This is the negative gradient of the linear surrogate
/// l(S) = -Tr(G^T S) and the data term of the proximal step.
template <typename Scalar>
Matrix<Scalar> surrogate_gradient(const StateMatrix<Scalar>& prev, const Vector<Scalar>& k,
                                  const Vector<Scalar>& v, const GateParams<Scalar>& g) {
  detail::check_write(prev, k, v);
  const Vector<Scalar> residual = v - g.alpha * matmul(prev.s, k);
  return g.beta * matmul(residual, k.transpose());
}

/// S_euc = S_{t-1} * alpha (I - beta k k^T) + beta v k^T, evaluated in
/// rank-one form. It is the minimizer of l(S) + 1/2 ||S - alpha S_{t-1}||_F^2.
template <typename Scalar>
Matrix<Scalar> euclidean_update(const StateMatrix<Scalar>& prev, const Vector<Scalar>& k,
                                const Vector<Scalar>& v, const GateParams<Scalar>& g) {
  detail::check_write(prev, k, v);
  const Vector<Scalar> sk = matmul(prev.s, k);
  Matrix<Scalar> out = g.alpha * (prev.s - g.beta * matmul(sk, k.transpose()));
  out += g.beta * matmul(v, k.transpose());
  return out;
}

/// x / (||x||_F + epsilon); spectral norm of the result is at most 1.
template <typename Derived>
Matrix<typename Derived::Scalar> prescale(const Eigen::MatrixBase<Derived>& x, double epsilon) {
  using Scalar = typename Derived::Scalar;
  const Scalar denom = frobenius_norm(x) + static_cast<Scalar>(epsilon);
  if (denom == Scalar(0)) return Matrix<Scalar>::Zero(x.rows(), x.cols());
  return x / denom;
}

/// a X + b X (X^T X) + c X (X^T X)^2, computed as a X + X (b A + c A^2) with A = X^T X.
template <typename Derived>
Matrix<typename Derived::Scalar> ns_step(const Eigen::MatrixBase<Derived>& x, const NsConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  if (x.rows() == 0 || x.cols() == 0) throw InvalidArgument("ns_step: empty matrix");
  // A is exactly symmetric, so A^2 = A^T A and both products go through gram().
  const Matrix<Scalar> xtx = gram(x);
  const Matrix<Scalar> poly = static_cast<Scalar>(cfg.b) * xtx + static_cast<Scalar>(cfg.c) * gram(xtx);
  Matrix<Scalar> out = matmul(x, poly);
  out += static_cast<Scalar>(cfg.a) * x;
  return out;
}

/// gamma * NS^iterations(prescale(x)). Zero input yields zero output.
template <typename Derived>
Matrix<typename Derived::Scalar> orthogonalize(const Eigen::MatrixBase<Derived>& x, const NsConfig& cfg,
                                               typename Derived::Scalar gamma) {
  using Scalar = typename Derived::Scalar;
  if (x.rows() < x.cols())
    throw InvalidArgument("orthogonalize: requires rows >= cols, got " + detail::shape_str(x.rows(), x.cols()));
  cfg.validate();
  Matrix<Scalar> y = prescale(x, cfg.epsilon);
  for (int it = 0; it < cfg.iterations; ++it) y = ns_step(y, cfg);
  y *= gamma;
  return y;
}

enum class DiagnosticsLevel {
  kNone,    // norms only, no SVD oracle
  kOracle,  // spectra of S_euc and S_t via the SVD oracle
};

template <typename Scalar>
struct OsuStepResult {
  StateMatrix<Scalar> state;
  StepDiagnostics diagnostics;
};

/// Gated write followed by projection onto the gamma-scaled manifold, with
/// gamma taken from prev.
///
/// diagnostics.degenerate is set when the ambient update is exactly zero;
/// diagnostics.warming_up is set (oracle level only) while
/// sigma_min(S_euc) <= epsilon, i.e. before enough independent writes have
/// made the intermediate state full rank.
template <typename Scalar>
OsuStepResult<Scalar> osu_step(const StateMatrix<Scalar>& prev, const Vector<Scalar>& k, const Vector<Scalar>& v,
                               const GateParams<Scalar>& g, const NsConfig& cfg,
                               DiagnosticsLevel level = DiagnosticsLevel::kNone) {
  g.validate();
  const Matrix<Scalar> grad = surrogate_gradient(prev, k, v, g);
  const Matrix<Scalar> euc = euclidean_update(prev, k, v, g);
  OsuStepResult<Scalar> out{{orthogonalize(euc, cfg, prev.gamma), prev.gamma}, {}};

  if (level == DiagnosticsLevel::kOracle) {
    out.diagnostics = step_diagnostics(out.state, prev, grad);
    const double pre_min = static_cast<double>(svd(euc).sigma_min());
    out.diagnostics.sigma_min_pre = pre_min;
    out.diagnostics.warming_up = pre_min <= cfg.epsilon;
  } else {
    out.diagnostics.update_norm = static_cast<double>(frobenius_norm(out.state.s - prev.s));
    out.diagnostics.grad_norm = static_cast<double>(frobenius_norm(grad));
  }
  out.diagnostics.degenerate = frobenius_norm(euc) == Scalar(0);
  return out;
}

}  // namespace orthomem
