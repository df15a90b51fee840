#pragma once

#include <Eigen/Dense>

namespace idg::linalg {

inline constexpr double kDefaultRtol = 1e-8;

/// Rank-revealing SVD of one matrix; rank, pseudoinverse and null space are
/// all read off the same factorization so the three never disagree.
struct RankedFactorization {
  Eigen::VectorXd singular_values;  // descending, nonnegative
  int rank = 0;                     // count of sigma_k > rtol * sigma_max
  Eigen::MatrixXd range_basis;      // right singular vectors, first `rank` columns
  Eigen::MatrixXd null_basis;       // remaining right singular vectors, orthonormal
  Eigen::MatrixXd u;                // left singular vectors (thin)
  double rtol = kDefaultRtol;
};

RankedFactorization factorize(const Eigen::MatrixXd& m, double rtol = kDefaultRtol);

int numerical_rank(const Eigen::MatrixXd& m, double rtol = kDefaultRtol);

/// Moore-Penrose pseudoinverse with singular values below the relative
/// cutoff zeroed.
Eigen::MatrixXd pinv(const Eigen::MatrixXd& m, double rtol = kDefaultRtol);

/// Orthonormal basis of the numerical null space (empty matrix with zero
/// columns when m has full column rank). Columns are sign-canonicalized so
/// the entry of largest magnitude is positive.
Eigen::MatrixXd nullspace(const Eigen::MatrixXd& m, double rtol = kDefaultRtol);

/// Minimum-norm least-squares solution of m x = z.
Eigen::VectorXd lstsq_min_norm(const Eigen::MatrixXd& m, const Eigen::VectorXd& z,
                               double rtol = kDefaultRtol);

}  // namespace idg::linalg
