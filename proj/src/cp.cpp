#include "tenrec/cp.hpp"

#include <cmath>
#include <limits>

namespace tenrec {

namespace {

RealMatrix khatri_rao_except(const std::vector<RealMatrix>& f, std::size_t skip) {
  // columns ordered to match unfold(): mode 0 fastest among the remaining
  RealMatrix acc;
  bool first = true;
  for (std::size_t k = f.size(); k-- > 0;) {
    if (k == skip) continue;
    if (first) {
      acc = f[k];
      first = false;
      continue;
    }
    RealMatrix next(acc.rows() * f[k].rows(), acc.cols());
    for (Eigen::Index r = 0; r < acc.cols(); ++r)
      for (Eigen::Index i = 0; i < acc.rows(); ++i)
        next.col(r).segment(i * f[k].rows(), f[k].rows()) = acc(i, r) * f[k].col(r);
    acc = std::move(next);
  }
  return acc;
}

RealMatrix first_factor_estimate(const DenseTensor& x, std::size_t rank) {
  const Eigen::Index n0 = x.dim(0), n1 = x.dim(1);
  std::size_t rest = 1;
  for (std::size_t k = 2; k < x.order(); ++k) rest *= x.dim(k);
  // Two fixed generic combinations of the trailing slices.
  RealMatrix t1 = RealMatrix::Zero(n0, n1), t2 = RealMatrix::Zero(n0, n1);
  for (std::size_t s = 0; s < rest; ++s) {
    const double w1 = std::cos(1.0 + 0.7 * static_cast<double>(s));
    const double w2 = std::sin(2.0 + 1.3 * static_cast<double>(s));
    for (Eigen::Index i = 0; i < n0; ++i)
      for (Eigen::Index j = 0; j < n1; ++j) {
        const double v = x[(static_cast<std::size_t>(i) * n1 + j) * rest + s];
        t1(i, j) += w1 * v;
        t2(i, j) += w2 * v;
      }
  }
  // Restrict to the leading rank-dimensional subspaces so the pencil is square.
  Eigen::JacobiSVD<RealMatrix> svd(t1 + t2, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RealMatrix u = svd.matrixU().leftCols(rank);
  const RealMatrix w = svd.matrixV().leftCols(rank);
  const RealMatrix a = u.transpose() * t1 * w;
  const RealMatrix b = u.transpose() * t2 * w;
  Eigen::EigenSolver<RealMatrix> es(a * b.completeOrthogonalDecomposition().pseudoInverse());
  RealMatrix vecs = es.eigenvectors().real();
  return u * vecs;
}

}  // namespace

DenseTensor cp_reconstruct(const CpModel& model, const Dims& dims) {
  const std::size_t rank = model.weights.size();
  DenseTensor core(Dims(dims.size(), rank));
  for (std::size_t r = 0; r < rank; ++r) {
    std::size_t lin = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) lin = lin * rank + r;
    core[lin] = model.weights(r);
  }
  return multi_mode_product(core, model.factors);
}

CpModel cp_decompose(const DenseTensor& x, std::size_t rank, std::size_t max_iters, double tol) {
  const std::size_t order = x.order();
  if (order < 3) throw ShapeError("cp_decompose: order must be at least 3");
  if (rank < 1 || rank > x.dim(0) || rank > x.dim(1))
    throw ShapeError("cp_decompose: rank exceeds the first two dims");
  std::vector<RealMatrix> f(order);
  f[0] = first_factor_estimate(x, rank);
  for (std::size_t k = 1; k < order; ++k) f[k] = RealMatrix::Ones(x.dim(k), rank);
  std::vector<RealMatrix> unfolded;
  for (std::size_t k = 0; k < order; ++k) unfolded.push_back(unfold(x, k));
  const double xnorm = frobenius_norm(x);
  double prev = std::numeric_limits<double>::infinity();
  // the first pass only updates modes >= 1 so the estimate of mode 0 is used
  for (std::size_t it = 0; it < max_iters; ++it) {
    for (std::size_t k = (it == 0 ? 1 : 0); k < order; ++k) {
      RealMatrix gram = RealMatrix::Ones(rank, rank);
      for (std::size_t j = 0; j < order; ++j)
        if (j != k) gram.array() *= (f[j].transpose() * f[j]).array();
      const RealMatrix rhs = unfolded[k] * khatri_rao_except(f, k);
      f[k] = gram.completeOrthogonalDecomposition().solve(rhs.transpose()).transpose();
    }
    const RealMatrix model = f[0] * khatri_rao_except(f, 0).transpose();
    const double err = (unfolded[0] - model).norm() / std::max(xnorm, 1e-300);
    if (std::abs(prev - err) < tol || err < tol) break;
    prev = err;
  }
  CpModel out;
  out.weights = Eigen::VectorXd::Ones(rank);
  for (std::size_t k = 0; k < order; ++k) {
    for (std::size_t r = 0; r < rank; ++r) {
      const double n = f[k].col(r).norm();
      if (n > 0.0) {
        f[k].col(r) /= n;
        out.weights(r) *= n;
      }
    }
  }
  out.factors = std::move(f);
  return out;
}

std::vector<std::size_t> min_cost_assignment(const RealMatrix& cost) {
  // Hungarian method with potentials (rows <= cols).
  const std::size_t n = cost.rows(), m = cost.cols();
  if (n > m) throw ShapeError("min_cost_assignment: more rows than columns");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<std::size_t> assign(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j]) assign[p[j] - 1] = j - 1;
  return assign;
}

}  // namespace tenrec
