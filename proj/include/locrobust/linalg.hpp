#pragma once

#include <Eigen/Dense>

namespace locrobust::linalg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Relative singular-value cutoff shared by every pseudo-inverse in the library.
inline constexpr double kPinvCutoff = 1e-10;

/// Moore-Penrose inverse via SVD; singular values below rel_cutoff * max are dropped.
MatrixXd pinv(const MatrixXd& a, double rel_cutoff = kPinvCutoff);

/// Pseudo-inverse of a symmetric matrix via its eigendecomposition.
MatrixXd pinv_symmetric(const MatrixXd& a, double rel_cutoff = kPinvCutoff);

/// Largest |a_ij - a_ji| divided by the largest |a_ij| (0 for the zero matrix).
double asymmetry(const MatrixXd& a);

MatrixXd symmetrize(const MatrixXd& a);

double lambda_max_symmetric(const MatrixXd& a);

/// Solves (a) x = b for symmetric PSD a: Cholesky when well conditioned,
/// the cutoff pseudo-inverse otherwise.
VectorXd solve_psd(const MatrixXd& a, const VectorXd& b, double rel_cutoff = kPinvCutoff);
MatrixXd solve_psd(const MatrixXd& a, const MatrixXd& b, double rel_cutoff = kPinvCutoff);

/// Reciprocal condition number (min/max eigenvalue) of a symmetric matrix; 0 if not PD.
double rcond_symmetric(const MatrixXd& a);

}  // namespace locrobust::linalg
