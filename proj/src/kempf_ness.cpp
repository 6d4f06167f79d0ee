#include "tenrec/kempf_ness.hpp"

#include <cmath>

#include "tenrec/linalg.hpp"

namespace tenrec {

namespace {

// det-1 minimizer of tr(U C U^T), refusing singular C.
RealMatrix strict_whitener(const RealMatrix& c, const std::string& what, bool normalize_det) {
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(symmetrize(c));
  if (es.info() != Eigen::Success) throw NumericError(what + ": eigensolver failed");
  const Eigen::VectorXd ev = es.eigenvalues();
  const double hi = ev.maxCoeff();
  if (!(hi > 0.0) || ev.minCoeff() <= 1e-12 * hi) {
    Eigen::Index arg;
    ev.minCoeff(&arg);
    throw RankDeficiencyError(what + ": second-moment matrix is singular (eigenvalue " +
                              std::to_string(arg) + " = " + std::to_string(ev(arg)) +
                              ", largest " + std::to_string(hi) + ")");
  }
  const double scale = normalize_det ? std::exp(ev.array().log().mean() / 2.0) : 1.0;
  const Eigen::VectorXd d = ev.cwiseSqrt().cwiseInverse() * scale;
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

double total_sq_norm(const std::vector<DenseTensor>& xs) {
  double s = 0.0;
  for (const auto& x : xs) s += squared_norm(x);
  return s;
}

RealMatrix mode_second_moment(const std::vector<DenseTensor>& xs, std::size_t mode) {
  const auto n = static_cast<Eigen::Index>(xs.front().dim(mode));
  RealMatrix c = RealMatrix::Zero(n, n);
  for (const auto& x : xs) c += contract_except(x, x, mode);
  return c;
}

void check_same_dims(const std::vector<DenseTensor>& xs) {
  if (xs.empty()) throw ShapeError("normalize_coordinates: empty tensor list");
  for (const auto& x : xs)
    if (x.dims() != xs.front().dims())
      throw ShapeError("normalize_coordinates: tensors must share dims");
}

double dml_objective(const RealMatrix& lx, const RealMatrix& m, const RealMatrix& ly,
                     const RealMatrix& sxx, const RealMatrix& syy, double lambda_x,
                     double lambda_y, double* data_term) {
  const double data = (lx * m * ly.transpose()).squaredNorm();
  if (data_term) *data_term = data;
  return 0.5 * data + 0.5 * lambda_x * (lx * sxx * lx.transpose()).trace() +
         0.5 * lambda_y * (ly * syy * ly.transpose()).trace();
}

// Minimizes ||Lx M Ly^T||^2 over the entries of M outside the mask. The
// objective has Hessian Px (.) Py on the free coordinates.
void complete_free_entries(RealMatrix& m, const std::vector<std::size_t>& free,
                           const RealMatrix& px, const RealMatrix& py) {
  const std::size_t nf = free.size();
  if (nf == 0) return;
  const Eigen::Index ny = m.cols();
  RealMatrix fixed = m;
  for (auto lin : free) fixed(lin / ny, lin % ny) = 0.0;
  const RealMatrix g = px * fixed * py;
  Eigen::VectorXd rhs(nf);
  for (std::size_t a = 0; a < nf; ++a) rhs(a) = -g(free[a] / ny, free[a] % ny);

  Eigen::VectorXd sol;
  if (nf <= 1500) {
    RealMatrix h(nf, nf);
    for (std::size_t a = 0; a < nf; ++a)
      for (std::size_t b = 0; b < nf; ++b)
        h(a, b) = px(free[a] / ny, free[b] / ny) * py(free[b] % ny, free[a] % ny);
    Eigen::LLT<RealMatrix> llt(h);
    if (llt.info() == Eigen::Success) {
      sol = llt.solve(rhs);
    } else {
      sol = h.ldlt().solve(rhs);
    }
  } else {
    auto apply = [&](const Eigen::VectorXd& v) {
      RealMatrix e = RealMatrix::Zero(m.rows(), ny);
      for (std::size_t a = 0; a < nf; ++a) e(free[a] / ny, free[a] % ny) = v(a);
      const RealMatrix he = px * e * py;
      Eigen::VectorXd out(nf);
      for (std::size_t a = 0; a < nf; ++a) out(a) = he(free[a] / ny, free[a] % ny);
      return out;
    };
    sol = Eigen::VectorXd::Zero(nf);
    Eigen::VectorXd r = rhs, p = r;
    double rr = r.squaredNorm();
    const double stop = 1e-20 * std::max(rr, 1e-300);
    for (std::size_t it = 0; it < 10 * nf && rr > stop; ++it) {
      const Eigen::VectorXd hp = apply(p);
      const double alpha = rr / p.dot(hp);
      sol += alpha * p;
      r -= alpha * hp;
      const double rr_new = r.squaredNorm();
      p = r + (rr_new / rr) * p;
      rr = rr_new;
    }
  }
  for (std::size_t a = 0; a < nf; ++a) m(free[a] / ny, free[a] % ny) = sol(a);
}

}  // namespace

RealMatrix covariance_whitener(const std::vector<Eigen::VectorXd>& points) {
  if (points.empty()) throw ShapeError("covariance_whitener: no points");
  const Eigen::Index d = points.front().size();
  RealMatrix m = RealMatrix::Zero(d, d);
  for (const auto& p : points) {
    if (p.size() != d) throw ShapeError("covariance_whitener: points differ in dimension");
    m.noalias() += p * p.transpose();
  }
  m /= static_cast<double>(points.size());
  return strict_whitener(m, "covariance_whitener", false);
}

RealMatrix det_normalized_inv_sqrt(const RealMatrix& c, const std::string& what) {
  if (c.rows() != c.cols()) throw ShapeError(what + ": expected a square matrix");
  const RealMatrix s = symmetrize(c);
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
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(1e-12 * trace);
  const double scale = std::exp(ev.array().log().mean() / 2.0);
  const Eigen::VectorXd d = ev.cwiseSqrt().cwiseInverse() * scale;
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

CoordinateChangeResult normalize_coordinates(const std::vector<DenseTensor>& tensors,
                                             double lambda, std::size_t max_iters) {
  check_same_dims(tensors);
  if (!(lambda > 0.0 && lambda < 1.0))
    throw ShapeError("normalize_coordinates: lambda must lie in (0,1)");
  CoordinateChangeResult res;
  res.normalized = tensors;
  const Dims& dims = tensors.front().dims();
  for (auto d : dims) res.transforms.push_back(RealMatrix::Identity(d, d));

  double prev = std::sqrt(total_sq_norm(res.normalized));
  res.objective_trace.push_back(prev);
  while (res.sweeps < max_iters) {
    for (std::size_t j = 0; j < dims.size(); ++j) {
      const RealMatrix u = strict_whitener(mode_second_moment(res.normalized, j),
                                           "normalize_coordinates mode " + std::to_string(j),
                                           true);
      for (auto& x : res.normalized) x = mode_product(x, u, j);
      res.transforms[j] = u * res.transforms[j];
    }
    ++res.sweeps;
    const double obj = std::sqrt(total_sq_norm(res.normalized));
    res.objective_trace.push_back(obj);
    if (obj >= (1.0 - lambda) * prev) break;
    prev = obj;
  }
  return res;
}

double kempf_ness_gradient(const std::vector<DenseTensor>& tensors) {
  check_same_dims(tensors);
  const double phi = total_sq_norm(tensors);
  if (phi == 0.0) return 0.0;
  double worst = 0.0;
  for (std::size_t j = 0; j < tensors.front().order(); ++j) {
    const RealMatrix c = mode_second_moment(tensors, j);
    const double mean = c.trace() / static_cast<double>(c.rows());
    const RealMatrix g = 2.0 * (c - mean * RealMatrix::Identity(c.rows(), c.cols()));
    worst = std::max(worst, g.norm() / phi);
  }
  return worst;
}

DmlResult dml_factors(const RealMatrix& m_xy, const RealMatrix& s_xx, const RealMatrix& s_yy,
                      const ObservationMask& mask, const std::vector<double>& values,
                      double lambda_x, double lambda_y, std::size_t iters) {
  const Eigen::Index nx = m_xy.rows(), ny = m_xy.cols();
  if (s_xx.rows() != nx || s_xx.cols() != nx || s_yy.rows() != ny || s_yy.cols() != ny)
    throw ShapeError("dml_factors: similarity shapes do not match M");
  if (mask.dims() != Dims{static_cast<std::size_t>(nx), static_cast<std::size_t>(ny)})
    throw ShapeError("dml_factors: mask dims do not match M");
  if (values.size() != mask.count()) throw ShapeError("dml_factors: one value per masked cell");
  if (!(lambda_x > 0.0 && lambda_y > 0.0)) throw ShapeError("dml_factors: lambdas must be > 0");

  DmlResult res;
  res.m = m_xy;
  for (std::size_t a = 0; a < values.size(); ++a)
    res.m(mask.linear()[a] / ny, mask.linear()[a] % ny) = values[a];
  res.lx = RealMatrix::Identity(nx, nx);
  res.ly = RealMatrix::Identity(ny, ny);
  const std::vector<std::size_t> free = mask.complement().linear();

  auto record = [&] {
    double data = 0.0;
    res.objective_trace.push_back(
        dml_objective(res.lx, res.m, res.ly, s_xx, s_yy, lambda_x, lambda_y, &data));
    res.data_term_trace.push_back(data);
  };
  record();
  for (std::size_t it = 0; it < iters; ++it) {
    complete_free_entries(res.m, free, res.lx.transpose() * res.lx, res.ly.transpose() * res.ly);
    const RealMatrix py = res.ly.transpose() * res.ly;
    res.lx = det_normalized_inv_sqrt(lambda_x * s_xx + res.m * py * res.m.transpose(),
                                     "dml_factors L_X update");
    const RealMatrix px = res.lx.transpose() * res.lx;
    res.ly = det_normalized_inv_sqrt(lambda_y * s_yy + res.m.transpose() * px * res.m,
                                     "dml_factors L_Y update");
    record();
  }
  return res;
}

MetricFamily dml_sweep_tensor(const DenseTensor& x, const SimilarityMatrices& s,
                              const std::vector<double>& lambda, const MetricFamily& start) {
  start.check(x.dims());
  if (s.size() != x.order() || lambda.size() != x.order())
    throw ShapeError("dml_sweep_tensor: need one similarity matrix and lambda per mode");
  MetricFamily out = start;
  out.pseudo = false;
  for (std::size_t l = 0; l < x.order(); ++l) {
    if (out.mats[l].rows() != out.mats[l].cols())
      throw ShapeError("dml_sweep_tensor: metric matrices must be square");
    const DenseTensor w = multi_mode_product(x, out.mats, l);
    const RealMatrix c = contract_except(w, w, l) + lambda[l] * s[l];
    out.mats[l] = det_normalized_inv_sqrt(c, "metric update mode " + std::to_string(l));
  }
  return out;
}

}  // namespace tenrec
