#pragma once

#include "tenrec/tensor.hpp"

namespace tenrec {

// Per-mode transforms L_l, each with N_l columns. `pseudo` marks families
// built from rank-deficient factors.
struct MetricFamily {
  std::vector<RealMatrix> mats;
  bool pseudo = false;

  void check(const Dims& dims) const;
};

using SimilarityMatrices = std::vector<RealMatrix>;

MetricFamily identity_metric(const Dims& dims);

// ||(xi - xj) x_1 L_1 ... x_K L_K||^2
double mahalanobis_distance(const DenseTensor& xi, const DenseTensor& xj, const MetricFamily& m);
// Tr(Lh_l D_(l) Lh_{!=l} D_(l)^T), Lh = L^T L, evaluated with an explicit
// Kronecker composite when it is small.
double mahalanobis_via_trace(const DenseTensor& xi, const DenseTensor& xj, const MetricFamily& m,
                             std::size_t mode);

// Factors are N_l x n_l; returns L_l = V_l V_l^T.
MetricFamily metric_from_factors(const std::vector<RealMatrix>& factors);

// S[i,j] = exp(-d_ij^2 / bandwidth), d_ij the distance between mode slices.
RealMatrix build_similarity(const DenseTensor& x, std::size_t mode, double bandwidth);
// Median of the off-diagonal squared slice distances; 1 when that is zero.
double median_squared_distance(const DenseTensor& x, std::size_t mode);
SimilarityMatrices build_similarities(const DenseTensor& x);

RealMatrix psd_floor(const RealMatrix& m, double floor);

}  // namespace tenrec
