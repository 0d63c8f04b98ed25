#include "chronoshift/linalg.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "chronoshift/common.h"

namespace chronoshift {
namespace {

// Replaces the listed columns of `u` with unit vectors orthogonal to every
// other column (Gram-Schmidt against the standard basis).
void complete_basis(Eigen::MatrixXd& u, const std::vector<Eigen::Index>& missing) {
  if (missing.empty()) return;
  std::vector<bool> is_missing(u.cols(), false);
  for (auto c : missing) is_missing[c] = true;
  std::vector<Eigen::Index> done;
  for (Eigen::Index c = 0; c < u.cols(); ++c)
    if (!is_missing[c]) done.push_back(c);

  Eigen::Index next_basis = 0;
  for (auto c : missing) {
    for (; next_basis < u.rows(); ++next_basis) {
      Eigen::VectorXd e = Eigen::VectorXd::Unit(u.rows(), next_basis);
      for (int pass = 0; pass < 2; ++pass)
        for (auto d : done) e -= u.col(d).dot(e) * u.col(d);
      const double n = e.norm();
      if (n > 1e-8) {
        u.col(c) = e / n;
        done.push_back(c);
        ++next_basis;
        break;
      }
    }
    Require(static_cast<std::size_t>(done.size()) <= static_cast<std::size_t>(u.rows()),
            errc::kNumerical, "svd: cannot complete orthonormal basis");
  }
}

// Jacobi on a matrix with rows >= cols.
Svd jacobi_tall(const Eigen::MatrixXd& a, const SvdOptions& opt) {
  const Eigen::Index n = a.cols();
  Eigen::MatrixXd w = a;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

  bool converged = n <= 1;
  for (int sweep = 0; sweep < opt.max_sweeps && !converged; ++sweep) {
    bool rotated = false;
    for (Eigen::Index i = 0; i < n - 1; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double alpha = w.col(i).squaredNorm();
        const double beta = w.col(j).squaredNorm();
        if (alpha == 0.0 || beta == 0.0) continue;
        const double gamma = w.col(i).dot(w.col(j));
        if (std::abs(gamma) <= opt.tolerance * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
          const double wi = w(r, i), wj = w(r, j);
          w(r, i) = c * wi - s * wj;
          w(r, j) = s * wi + c * wj;
        }
        for (Eigen::Index r = 0; r < n; ++r) {
          const double vi = v(r, i), vj = v(r, j);
          v(r, i) = c * vi - s * vj;
          v(r, j) = s * vi + c * vj;
        }
      }
    }
    converged = !rotated;
  }
  Require(converged, errc::kNumerical,
          "svd: Jacobi sweeps did not converge within " + std::to_string(opt.max_sweeps));

  Eigen::VectorXd s(n);
  for (Eigen::Index i = 0; i < n; ++i) s(i) = w.col(i).norm();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return s(x) > s(y); });

  Svd out;
  out.U.resize(a.rows(), n);
  out.S.resize(n);
  out.V.resize(n, n);
  const double smax = n > 0 ? s(order[0]) : 0.0;
  const double zero_tol = smax * std::numeric_limits<double>::epsilon() *
                          static_cast<double>(std::max(a.rows(), n));
  std::vector<Eigen::Index> missing;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[k];
    out.V.col(k) = v.col(src);
    if (s(src) > zero_tol && s(src) > 0.0) {
      out.S(k) = s(src);
      out.U.col(k) = w.col(src) / s(src);
    } else {
      out.S(k) = 0.0;
      out.U.col(k).setZero();
      missing.push_back(k);
    }
  }
  complete_basis(out.U, missing);
  return out;
}

}  // namespace

Svd svd(const Eigen::MatrixXd& a, const SvdOptions& options) {
  Require(a.rows() >= 1 && a.cols() >= 1, errc::kInvalidArgument, "svd: empty matrix");
  Require(a.allFinite(), errc::kNumerical, "svd: non-finite input");
  if (a.rows() < a.cols()) {
    Svd t = svd(a.transpose(), options);
    return {std::move(t.V), std::move(t.S), std::move(t.U)};
  }
  if (a.rows() == a.cols()) return jacobi_tall(a, options);

  // Tall: A = Q R, then R = U S V^T and A = (Q U) S V^T.
  const Eigen::Index n = a.cols();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  Svd inner = jacobi_tall(r, options);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), n);
  inner.U = q * inner.U;
  return inner;
}

Eigen::MatrixXd lstsq_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double ridge) {
  Require(x.rows() >= 1 && x.cols() >= 1, errc::kInvalidArgument, "lstsq_ridge: empty design");
  Require(x.rows() == y.rows(), errc::kInvalidArgument, "lstsq_ridge: row count mismatch");
  Require(ridge >= 0.0 && std::isfinite(ridge), errc::kInvalidArgument,
          "lstsq_ridge: ridge must be finite and >= 0");
  Require(x.allFinite() && y.allFinite(), errc::kNumerical, "lstsq_ridge: non-finite input");

  const Svd d = svd(x);
  Eigen::VectorXd gain(d.S.size());
  if (ridge == 0.0) {
    const double smax = d.S.size() ? d.S(0) : 0.0;
    const double tol = smax * std::numeric_limits<double>::epsilon() *
                       static_cast<double>(std::max(x.rows(), x.cols()));
    Require(x.rows() >= x.cols() && d.S.minCoeff() > tol, errc::kNumerical,
            "lstsq_ridge: singular system with ridge = 0");
    gain = d.S.cwiseInverse();
  } else {
    gain = d.S.array() / (d.S.array().square() + ridge);
  }
  return d.V * gain.asDiagonal() * (d.U.transpose() * y);
}

double default_ridge(const Eigen::MatrixXd& x) {
  return 1e-3 * x.squaredNorm() / static_cast<double>(x.cols());
}

Eigen::MatrixXd orthogonal_procrustes(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Require(a.rows() == b.rows() && a.cols() == b.cols(), errc::kInvalidArgument,
          "procrustes: anchor blocks differ in shape");
  const Svd d = svd(a.transpose() * b);
  return d.U * d.V.transpose();
}

double orthogonality_defect(const Eigen::MatrixXd& r) {
  return (r.transpose() * r - Eigen::MatrixXd::Identity(r.cols(), r.cols())).norm();
}

}  // namespace chronoshift
