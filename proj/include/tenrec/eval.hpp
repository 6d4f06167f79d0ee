#pragma once

#include <cstdint>
#include <string>

#include "tenrec/solver.hpp"

namespace tenrec {

struct EvalReport {
  double fit = 0.0;
  double rse = 0.0;
  std::size_t n_observed = 0;
  std::size_t n_missing = 0;
  double wall_time = 0.0;
  std::size_t iters = 0;
};

// 1 - ||X - Xt|| / ||X|| over the support (all cells when omitted).
double fit(const DenseTensor& x, const DenseTensor& xt);
double fit(const DenseTensor& x, const DenseTensor& xt, const ObservationMask& support);
// Root mean squared difference over the support.
double rse(const DenseTensor& x, const DenseTensor& xt);
double rse(const DenseTensor& x, const DenseTensor& xt, const ObservationMask& support);

// ceil(rate * cells) cells drawn uniformly without replacement.
ObservationMask mask_random(const Dims& dims, double observe_rate, std::uint64_t seed);

EvalSupport parse_eval_support(const std::string& name);
ObservationMask support_cells(EvalSupport support, const ObservationMask& mask);

// Tucker tensor with orthonormal factors and a Gaussian core, scaled to unit
// root-mean-square entry.
DenseTensor random_lowrank(const Dims& dims, const std::vector<std::size_t>& ranks,
                           std::uint64_t seed);

// observed entries of x, model values elsewhere
DenseTensor pin_observed(const DenseTensor& model, const DenseTensor& x,
                         const std::vector<unsigned char>& observed);

}  // namespace tenrec
