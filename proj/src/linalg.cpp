#include "tenrec/linalg.hpp"

#include <cmath>

namespace tenrec {

RealMatrix symmetrize(const RealMatrix& m) { return 0.5 * (m + m.transpose()); }

RealMatrix inv_sqrt_spd(const RealMatrix& m, const std::string& what, double rel_floor) {
  if (m.rows() != m.cols()) throw ShapeError(what + ": expected a square matrix");
  const RealMatrix s = symmetrize(m);
  const double trace = s.trace();
  if (!std::isfinite(trace) || trace <= 0.0)
    throw ConditioningError(what + ": matrix is not positive definite (trace " +
                            std::to_string(trace) + ")");
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(s);
  if (es.info() != Eigen::Success) throw NumericError(what + ": eigensolver failed");
  const double lo = es.eigenvalues().minCoeff();
  if (lo < -1e-10 * trace)
    throw ConditioningError(what + ": matrix is indefinite (eigenvalue " + std::to_string(lo) +
                            ")");
  const double floor = rel_floor * trace;
  Eigen::VectorXd d = es.eigenvalues().cwiseMax(floor).cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

RealMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> nd;
  RealMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  return m;
}

DenseTensor gaussian_tensor(const Dims& dims, Rng& rng) {
  std::normal_distribution<double> nd;
  DenseTensor x(dims);
  for (auto& v : x.values()) v = nd(rng);
  return x;
}

RealMatrix random_orthogonal(Eigen::Index n, Rng& rng) {
  Eigen::HouseholderQR<RealMatrix> qr(gaussian_matrix(n, n, rng));
  RealMatrix q = qr.householderQ();
  const RealMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i)
    if (r(i, i) < 0) q.col(i) *= -1.0;
  return q;
}

RealMatrix random_special_linear(Eigen::Index n, Rng& rng) {
  std::uniform_real_distribution<double> ud(-0.5, 0.5);
  Eigen::VectorXd logs(n);
  for (Eigen::Index i = 0; i < n; ++i) logs(i) = ud(rng);
  logs.array() -= logs.mean();
  const RealMatrix a = random_orthogonal(n, rng);
  const RealMatrix b = random_orthogonal(n, rng);
  RealMatrix m = a * logs.array().exp().matrix().asDiagonal() * b;
  if (m.determinant() < 0) m.col(0) *= -1.0;
  return m;
}

}  // namespace tenrec
