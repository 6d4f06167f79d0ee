#pragma once

#include <string>

#include "tenrec/tensor.hpp"

namespace tenrec {

enum class PenaltyKind { none, l1, l2_squared, nuclear };

struct Penalty {
  PenaltyKind kind = PenaltyKind::none;
  double weight = 0.0;
};

PenaltyKind parse_penalty_kind(const std::string& name);
std::string to_string(PenaltyKind kind);

// J(v) for a matrix argument. Nuclear norm uses singular values.
double penalty_value(const Penalty& p, const RealMatrix& v);
// Entrywise penalties on a tensor; nuclear is taken on the mode-0 unfolding.
double penalty_value(const Penalty& p, const DenseTensor& v);

// argmin_v J(v) + (t/2)||v - u||^2
RealMatrix prox(const Penalty& p, const RealMatrix& u, double t);
DenseTensor prox(const Penalty& p, const DenseTensor& u, double t);
double prox_scalar(const Penalty& p, double u, double t);

}  // namespace tenrec
