#pragma once

#include <cmath>
#include <cstdint>

#include "orthomem/linalg.hpp"
#include "orthomem/rng.hpp"

namespace orthomem {

/// Recurrent memory S (c_v x c_k, c_v >= c_k) and its manifold scale.
template <typename Scalar>
struct StateMatrix {
  Matrix<Scalar> s;
  Scalar gamma = Scalar(2);

  Index c_v() const { return s.rows(); }
  Index c_k() const { return s.cols(); }

  static StateMatrix zero(Index c_v, Index c_k, Scalar gamma) {
    check_dims(c_v, c_k, gamma);
    return {Matrix<Scalar>::Zero(c_v, c_k), gamma};
  }

  /// gamma * Q with Q drawn from the Haar-like QR of a seeded Gaussian matrix.
  static StateMatrix random_orthogonal(Index c_v, Index c_k, Scalar gamma, std::uint64_t seed) {
    check_dims(c_v, c_k, gamma);
    Rng rng(seed);
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> g(c_v, c_k);
    for (Index i = 0; i < c_v; ++i)
      for (Index j = 0; j < c_k; ++j) g(i, j) = static_cast<Scalar>(rng.normal());
    Eigen::HouseholderQR<decltype(g)> qr(g);
    Matrix<Scalar> q = qr.householderQ() * Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Identity(c_v, c_k);
    return {gamma * q, gamma};
  }

 private:
  static void check_dims(Index c_v, Index c_k, Scalar gamma) {
    if (c_v <= 0 || c_k <= 0) throw InvalidArgument("StateMatrix: dimensions must be positive");
    if (c_v < c_k) throw InvalidArgument("StateMatrix: requires c_v >= c_k");
    if (!(gamma > Scalar(0)) || !std::isfinite(static_cast<double>(gamma)))
      throw InvalidArgument("StateMatrix: gamma must be positive and finite");
  }
};

/// Retention gate alpha and write gate beta, both in [0, 1].
template <typename Scalar>
struct GateParams {
  Scalar alpha = Scalar(1);
  Scalar beta = Scalar(1);

  void validate() const {
    const auto ok = [](Scalar x) { return std::isfinite(static_cast<double>(x)) && x >= Scalar(0) && x <= Scalar(1); };
    if (!ok(alpha)) throw InvalidArgument("GateParams: alpha must lie in [0, 1]");
    if (!ok(beta)) throw InvalidArgument("GateParams: beta must lie in [0, 1]");
  }
};

/// Coefficients of p(sigma) = a*sigma + b*sigma^3 + c*sigma^5 plus iteration
/// count and prescale guard.
struct NsConfig {
  double a = 15.0 / 8.0;
  double b = -10.0 / 8.0;
  double c = 3.0 / 8.0;
  int iterations = 5;
  double epsilon = 1e-8;

  /// Quintic Taylor scheme for the polar factor: p(1) = 1, p'(1) = p''(1) = 0.
  static NsConfig strict(int iterations = 5) { return {15.0 / 8.0, -10.0 / 8.0, 3.0 / 8.0, iterations, 1e-8}; }

  /// Aggressive coefficients popular for momentum orthogonalization. Singular
  /// values end in a band of about [0.68, 1.21] rather than at 1.
  static NsConfig fast(int iterations = 5) { return {3.4445, -4.7750, 2.0315, iterations, 1e-8}; }

  /// a + b + c == 1, i.e. sigma = 1 is a fixed point.
  bool has_unit_fixed_point() const { return std::abs(a + b + c - 1.0) <= 1e-12; }

  void validate() const {
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c))
      throw InvalidArgument("NsConfig: coefficients must be finite");
    if (iterations < 1 || iterations > 64) throw InvalidArgument("NsConfig: iterations must lie in [1, 64]");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("NsConfig: epsilon must be >= 0");
  }
};

}  // namespace orthomem
