#pragma once

#include <cstdint>
#include <string>

#include "tenrec/solver.hpp"

namespace tenrec {

struct GradientError {
  std::string name;  // e.g. "lagrangian/V1", "lower/Xhat"
  double rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradientError> errors;  // worst value per gradient name
  double max_error = 0.0;
  std::size_t instances = 0;
};

// Random small problem and state: dims in [2,5]^3, ranks <= 3, partial mask,
// scaled orthonormal factors, nonzero multipliers; every other instance carries a coupled matrix.
struct GradcheckInstance {
  SolverContext ctx;
  SolverState state;
};
GradcheckInstance random_instance(std::uint64_t seed);

// ||analytic - fd|| / max(||fd||, 1e-12), where fd extrapolates central
// differences at steps h and h/2, h = 1e-3 (1 + |x|).
double check_lagrangian_gradient(const SolverContext& ctx, const SolverState& state, Variable v);
double check_lower_gradient(const SolverContext& ctx, const SolverState& state, Variable v);

GradcheckReport run_solver_gradcheck(std::uint64_t seed, std::size_t instances);

struct KempfNessReport {
  double derivative_error = 0.0;  // analytic vs finite-difference directional derivative
  double stationarity = 0.0;      // relative gradient after normalization
  std::size_t sweeps = 0;
};
KempfNessReport run_kempf_ness_check(std::uint64_t seed);

}  // namespace tenrec
