#pragma once

#include "tenrec/metric.hpp"

namespace tenrec {

struct CoordinateChangeResult {
  std::vector<RealMatrix> transforms;   // det = 1 per mode
  std::vector<DenseTensor> normalized;  // inputs with every transform applied
  std::vector<double> objective_trace;  // sqrt(sum ||X||^2), initial value first
  std::size_t sweeps = 0;
};

// Whitening matrix M^{-1/2} for the second moment M = (1/m) sum p p^T.
RealMatrix covariance_whitener(const std::vector<Eigen::VectorXd>& points);

// Alternating per-mode minimization of sum ||X x_1 U_1 ... x_K U_K||^2 over
// det-1 transforms. The objective is evaluated once before the loop; sweeps
// stop when a sweep keeps more than (1 - lambda) of it, or at max_iters.
CoordinateChangeResult normalize_coordinates(const std::vector<DenseTensor>& tensors,
                                             double lambda, std::size_t max_iters);

// Largest relative derivative of sum ||X||^2 along unit traceless per-mode
// directions; zero at a normalized point.
double kempf_ness_gradient(const std::vector<DenseTensor>& tensors);

// c * C^{-1/2} with c chosen so the result has determinant one.
RealMatrix det_normalized_inv_sqrt(const RealMatrix& c, const std::string& what);

struct DmlResult {
  RealMatrix lx, ly;
  RealMatrix m;  // completed matrix after the last step (a)
  // 1/2||Lx M Ly^T||^2 + 1/2 lx tr(Lx Sxx Lx^T) + 1/2 ly tr(Ly Syy Ly^T),
  // initial value first, then one entry per iteration.
  std::vector<double> objective_trace;
  std::vector<double> data_term_trace;  // ||Lx M Ly^T||^2 alone
};

// Alternates the completion of the free entries of M with the two
// determinant-normalized factor updates. `values` follows mask.linear().
DmlResult dml_factors(const RealMatrix& m_xy, const RealMatrix& s_xx, const RealMatrix& s_yy,
                      const ObservationMask& mask, const std::vector<double>& values,
                      double lambda_x, double lambda_y, std::size_t iters);

// One pass of the factor update over every mode of a tensor:
// L_l <- normalized (W_(l) W_(l)^T + lambda_l S_l)^{-1/2}, W = X x_{k!=l} L_k.
MetricFamily dml_sweep_tensor(const DenseTensor& x, const SimilarityMatrices& s,
                              const std::vector<double>& lambda, const MetricFamily& start);

}  // namespace tenrec
