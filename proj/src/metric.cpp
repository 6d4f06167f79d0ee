#include "tenrec/metric.hpp"

#include <algorithm>
#include <cmath>

#include "tenrec/linalg.hpp"

namespace tenrec {

namespace {

constexpr std::size_t kMaxKronSide = 4096;

RealMatrix slice_sq_distances(const DenseTensor& x, std::size_t mode) {
  const RealMatrix u = unfold(x, mode);
  const Eigen::Index n = u.rows();
  RealMatrix d = RealMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (u.row(i) - u.row(j)).squaredNorm();
  return d;
}

}  // namespace

void MetricFamily::check(const Dims& dims) const {
  if (mats.size() != dims.size())
    throw ShapeError("metric has " + std::to_string(mats.size()) + " modes, tensor has " +
                     std::to_string(dims.size()));
  for (std::size_t k = 0; k < dims.size(); ++k)
    if (static_cast<std::size_t>(mats[k].cols()) != dims[k])
      throw ShapeError("metric mode " + std::to_string(k) + " expects size " +
                       std::to_string(mats[k].cols()) + ", tensor has " + std::to_string(dims[k]));
}

MetricFamily identity_metric(const Dims& dims) {
  MetricFamily m;
  for (auto d : dims) m.mats.push_back(RealMatrix::Identity(d, d));
  return m;
}

double mahalanobis_distance(const DenseTensor& xi, const DenseTensor& xj, const MetricFamily& m) {
  if (xi.dims() != xj.dims()) throw ShapeError("mahalanobis_distance: dims mismatch");
  m.check(xi.dims());
  return squared_norm(multi_mode_product(xi - xj, m.mats));
}

double mahalanobis_via_trace(const DenseTensor& xi, const DenseTensor& xj, const MetricFamily& m,
                             std::size_t mode) {
  if (xi.dims() != xj.dims()) throw ShapeError("mahalanobis_via_trace: dims mismatch");
  m.check(xi.dims());
  if (mode >= xi.order()) throw ShapeError("mahalanobis_via_trace: mode out of range");
  const DenseTensor d = xi - xj;
  std::vector<RealMatrix> gram;
  for (const auto& l : m.mats) gram.push_back(l.transpose() * l);
  const RealMatrix dl = unfold(d, mode);
  RealMatrix inner;
  if (static_cast<std::size_t>(dl.cols()) <= kMaxKronSide) {
    inner = dl * kron_descending(gram, mode) * dl.transpose();
  } else {
    inner = contract_except(multi_mode_product(d, gram, mode), d, mode);
  }
  return (gram[mode] * inner).trace();
}

MetricFamily metric_from_factors(const std::vector<RealMatrix>& factors) {
  MetricFamily m;
  for (const auto& v : factors) {
    m.mats.push_back(v * v.transpose());
    if (v.cols() < v.rows()) m.pseudo = true;
  }
  return m;
}

double median_squared_distance(const DenseTensor& x, std::size_t mode) {
  const RealMatrix d = slice_sq_distances(x, mode);
  std::vector<double> off;
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = i + 1; j < d.cols(); ++j) off.push_back(d(i, j));
  if (off.empty()) return 1.0;
  auto mid = off.begin() + off.size() / 2;
  std::nth_element(off.begin(), mid, off.end());
  double med = *mid;
  if (off.size() % 2 == 0) med = 0.5 * (med + *std::max_element(off.begin(), mid));
  return med > 0.0 ? med : 1.0;
}

RealMatrix build_similarity(const DenseTensor& x, std::size_t mode, double bandwidth) {
  if (!(bandwidth > 0.0)) throw ShapeError("build_similarity: bandwidth must be positive");
  if (mode >= x.order()) throw ShapeError("build_similarity: mode out of range");
  RealMatrix s = slice_sq_distances(x, mode);
  return (-s.array() / bandwidth).exp().matrix();
}

SimilarityMatrices build_similarities(const DenseTensor& x) {
  SimilarityMatrices out;
  for (std::size_t k = 0; k < x.order(); ++k)
    out.push_back(build_similarity(x, k, median_squared_distance(x, k)));
  return out;
}

RealMatrix psd_floor(const RealMatrix& m, double floor) {
  if (m.rows() != m.cols()) throw ShapeError("psd_floor: matrix must be square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw ShapeError("psd_floor: matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(symmetrize(m));
  if (es.info() != Eigen::Success) throw NumericError("psd_floor: eigensolver failed");
  const Eigen::VectorXd d = es.eigenvalues().cwiseMax(floor);
  return symmetrize(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

}  // namespace tenrec
