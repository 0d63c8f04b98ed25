#pragma once

// Dense kernels behind alignment and projection.

#include <Eigen/Dense>

namespace chronoshift {

struct Svd {
  Eigen::MatrixXd U;  // m x r, orthonormal columns
  Eigen::VectorXd S;  // r singular values, descending, nonnegative
  Eigen::MatrixXd V;  // n x r, orthonormal columns
};

struct SvdOptions {
  double tolerance = 1e-12;  // stop when every column pair has |cos| below this
  int max_sweeps = 60;
};

// Thin SVD, r = min(m, n), by one-sided (Hestenes) Jacobi rotations. Tall
// inputs are first reduced with a Householder QR so the sweeps run on an
// n x n triangle. Throws Error(numerical) if the sweep cap is reached.
Svd svd(const Eigen::MatrixXd& a, const SvdOptions& options = {});

// Solves min_T ||X T - Y||_F^2 + ridge ||T||_F^2, i.e.
// T = (X^T X + ridge I)^{-1} X^T Y, through the SVD of X. With ridge == 0
// a rank-deficient X raises Error(numerical); retry with ridge > 0.
Eigen::MatrixXd lstsq_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double ridge);

// 1e-3 * trace(X^T X) / p.
double default_ridge(const Eigen::MatrixXd& x);

// Orthogonal R minimising ||A R - B||_F (R = U V^T from svd(A^T B)).
Eigen::MatrixXd orthogonal_procrustes(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// ||R^T R - I||_F
double orthogonality_defect(const Eigen::MatrixXd& r);

}  // namespace chronoshift
