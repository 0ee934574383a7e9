#pragma once

// Dense linear algebra used by the state update and its oracles.
//
// Products go through matmul(), which accumulates each output entry in a
// fixed sequential order over the inner dimension. Together with
// -ffp-contract=off this makes every product bit-reproducible and equal to
// a textbook triple loop, which the tests rely on.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "orthomem/errors.hpp"

namespace orthomem {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using Index = Eigen::Index;

namespace detail {

inline std::string shape_str(Index r, Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace detail

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
  return a.allFinite();
}

/// C = A*B. Row i of C is built as sum_k A(i,k) * B.row(k), k ascending.
template <typename DA, typename DB>
Matrix<typename DA::Scalar> matmul(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  static_assert(std::is_same_v<Scalar, typename DB::Scalar>, "matmul: scalar types differ");
  if (a.cols() != b.rows()) {
    throw InvalidArgument("matmul: inner dimensions differ (" + detail::shape_str(a.rows(), a.cols()) +
                          " * " + detail::shape_str(b.rows(), b.cols()) + ")");
  }
  const Eigen::Ref<const Matrix<Scalar>> lhs(a.derived());
  const Eigen::Ref<const Matrix<Scalar>> rhs(b.derived());
  Matrix<Scalar> out = Matrix<Scalar>::Zero(lhs.rows(), rhs.cols());
  for (Index i = 0; i < lhs.rows(); ++i) {
    for (Index k = 0; k < lhs.cols(); ++k) {
      out.row(i).noalias() += lhs(i, k) * rhs.row(k);
    }
  }
  return out;
}

/// A^T A from the upper triangle, mirrored. Entry (i, j) accumulates
/// A(k, i) * A(k, j) over k ascending, so the result is bit-identical to
/// matmul(a.transpose(), a) at about half the cost.
template <typename Derived>
Matrix<typename Derived::Scalar> gram(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Ref<const Matrix<Scalar>> x(a.derived());
  const Index n = x.cols();
  Matrix<Scalar> out = Matrix<Scalar>::Zero(n, n);
  for (Index k = 0; k < x.rows(); ++k) {
    for (Index i = 0; i < n; ++i) {
      out.row(i).tail(n - i).noalias() += x(k, i) * x.row(k).tail(n - i);
    }
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < i; ++j) out(i, j) = out(j, i);
  return out;
}

template <typename Derived>
typename Derived::Scalar frobenius_norm(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  Scalar sum(0);
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) sum += a(i, j) * a(i, j);
  return std::sqrt(sum);
}

/// Thin SVD a = u * diag(sigma) * vt.
template <typename Scalar>
struct SvdResult {
  Matrix<Scalar> u;          // rows x cols, orthonormal columns
  Vector<Scalar> sigma;      // descending, non-negative
  Matrix<Scalar> vt;         // cols x cols, orthogonal

  Scalar sigma_max() const { return sigma.size() ? sigma(0) : Scalar(0); }
  Scalar sigma_min() const { return sigma.size() ? sigma(sigma.size() - 1) : Scalar(0); }
};

/// One-sided (Hestenes) Jacobi SVD. Requires rows >= cols.
///
/// Column pairs are rotated until every pair satisfies
/// |<u_p, u_q>| <= tol * |u_p| |u_q| with tol = 1e-14. Columns that end up
/// exactly zero get an orthonormal completion so that u always has
/// orthonormal columns.
template <typename Derived>
SvdResult<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  using ColMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index m = a.rows();
  const Index n = a.cols();
  if (m < n) throw InvalidArgument("svd: requires rows >= cols, got " + detail::shape_str(m, n));
  if (n == 0) throw InvalidArgument("svd: empty matrix");
  if (!a.allFinite()) throw InvalidArgument("svd: non-finite entry");

  ColMajor w = a;
  ColMajor v = ColMajor::Identity(n, n);
  const Scalar tol = Scalar(1e-14);
  constexpr int kMaxSweeps = 80;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const Scalar alpha = w.col(p).squaredNorm();
        const Scalar beta = w.col(q).squaredNorm();
        const Scalar gamma = w.col(p).dot(w.col(q));
        if (alpha == Scalar(0) || beta == Scalar(0)) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const Scalar zeta = (beta - alpha) / (Scalar(2) * gamma);
        const Scalar t = (zeta >= Scalar(0) ? Scalar(1) : Scalar(-1)) /
                         (std::abs(zeta) + std::sqrt(Scalar(1) + zeta * zeta));
        const Scalar c = Scalar(1) / std::sqrt(Scalar(1) + t * t);
        const Scalar s = c * t;
        for (Index i = 0; i < m; ++i) {
          const Scalar wp = w(i, p);
          const Scalar wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (Index i = 0; i < n; ++i) {
          const Scalar vp = v(i, p);
          const Scalar vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  Vector<Scalar> norms(n);
  for (Index j = 0; j < n; ++j) norms(j) = w.col(j).norm();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return norms(x) > norms(y); });

  SvdResult<Scalar> out;
  out.u.resize(m, n);
  out.sigma.resize(n);
  out.vt.resize(n, n);
  std::vector<bool> filled(static_cast<std::size_t>(n), false);
  for (Index j = 0; j < n; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    out.sigma(j) = norms(src);
    out.vt.row(j) = v.col(src).transpose();
    if (norms(src) > Scalar(0)) {
      out.u.col(j) = w.col(src) / norms(src);
      filled[static_cast<std::size_t>(j)] = true;
    }
  }

  // Orthonormal completion for exactly-zero singular values.
  Index candidate = 0;
  for (Index j = 0; j < n; ++j) {
    if (filled[static_cast<std::size_t>(j)]) continue;
    while (candidate < m) {
      Vector<Scalar> e = Vector<Scalar>::Unit(m, candidate++);
      for (int pass = 0; pass < 2; ++pass) {
        for (Index other = 0; other < n; ++other) {
          if (filled[static_cast<std::size_t>(other)]) e -= out.u.col(other).dot(e) * out.u.col(other);
        }
      }
      const Scalar len = e.norm();
      if (len > Scalar(1e-8)) {
        out.u.col(j) = e / len;
        filled[static_cast<std::size_t>(j)] = true;
        break;
      }
    }
  }
  return out;
}

/// Closest matrix with orthonormal columns in Frobenius norm: U * V^T.
/// Throws RankDeficient when sigma_min < 1e-12 * sigma_max.
template <typename Derived>
Matrix<typename Derived::Scalar> polar_factor(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const SvdResult<Scalar> dec = svd(a);
  if (!(dec.sigma_min() >= Scalar(1e-12) * dec.sigma_max()) || dec.sigma_max() == Scalar(0)) {
    throw RankDeficient("polar_factor: matrix is rank deficient (sigma_min/sigma_max below 1e-12)");
  }
  return matmul(dec.u, dec.vt);
}

/// ||(S/gamma)^T (S/gamma) - I||_F.
template <typename Derived>
typename Derived::Scalar orthogonality_error(const Eigen::MatrixBase<Derived>& s,
                                             typename Derived::Scalar gamma) {
  using Scalar = typename Derived::Scalar;
  const Matrix<Scalar> scaled = s / gamma;
  Matrix<Scalar> gram = matmul(scaled.transpose(), scaled);
  gram.diagonal().array() -= Scalar(1);
  return frobenius_norm(gram);
}

}  // namespace orthomem
