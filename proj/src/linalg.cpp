#include "idg/linalg.hpp"

#include <stdexcept>

namespace idg::linalg {

namespace {

void canonicalize_columns(Eigen::MatrixXd& m) {
  for (Eigen::Index c = 0; c < m.cols(); c++) {
    Eigen::Index imax = 0;
    m.col(c).cwiseAbs().maxCoeff(&imax);
    if (m(imax, c) < 0) m.col(c) = -m.col(c);
  }
}

}  // namespace

RankedFactorization factorize(const Eigen::MatrixXd& m, double rtol) {
  if (m.size() == 0) throw std::invalid_argument("factorize: empty matrix");
  if (rtol <= 0) throw std::invalid_argument("factorize: rtol must be positive");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeFullV);
  RankedFactorization f;
  f.rtol = rtol;
  f.singular_values = svd.singularValues();
  double smax = f.singular_values.size() > 0 ? f.singular_values[0] : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < f.singular_values.size(); i++)
    if (f.singular_values[i] > rtol * smax) rank++;
  if (smax == 0.0) rank = 0;
  f.rank = rank;
  const Eigen::MatrixXd& v = svd.matrixV();
  f.range_basis = v.leftCols(rank);
  f.null_basis = v.rightCols(v.cols() - rank);
  canonicalize_columns(f.null_basis);
  f.u = svd.matrixU();
  return f;
}

int numerical_rank(const Eigen::MatrixXd& m, double rtol) {
  return factorize(m, rtol).rank;
}

Eigen::MatrixXd pinv(const Eigen::MatrixXd& m, double rtol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  double smax = s.size() > 0 ? s[0] : 0.0;
  Eigen::VectorXd sinv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); i++)
    if (smax > 0 && s[i] > rtol * smax) sinv[i] = 1.0 / s[i];
  return svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::MatrixXd nullspace(const Eigen::MatrixXd& m, double rtol) {
  return factorize(m, rtol).null_basis;
}

Eigen::VectorXd lstsq_min_norm(const Eigen::MatrixXd& m, const Eigen::VectorXd& z,
                               double rtol) {
  if (m.rows() != z.size())
    throw std::invalid_argument("lstsq_min_norm: row count mismatch");
  return pinv(m, rtol) * z;
}

}  // namespace idg::linalg
