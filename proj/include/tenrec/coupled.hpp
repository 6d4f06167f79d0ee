#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>

#include "tenrec/solver.hpp"

namespace tenrec {

// Generator description. `modes` uses 1-based size indices: modes[0] lists
// the tensor's sizes, each further entry is {shared size, matrix size}.
struct CoupledSpec {
  std::vector<std::size_t> sizes;
  std::vector<std::vector<std::size_t>> modes;
  std::size_t rank = 3;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

CoupledSpec parse_coupled_spec(std::istream& is);
CoupledSpec load_coupled_spec(const std::string& path);
// Accepts "{[1 2 3],[1,4]}" or "1 2 3; 1 4".
std::vector<std::vector<std::size_t>> parse_mode_lists(const std::string& text);

struct CoupledProblem {
  DenseTensor tensor;
  std::vector<Coupling> couplings;  // matrix rows index the shared tensor mode
  ObservationMask mask;
  // Simulation only: factor per size index, and the noiseless data.
  std::optional<std::vector<RealMatrix>> ground_truth;
  std::vector<std::size_t> tensor_sizes;  // size index of each tensor mode (0-based)
  std::vector<std::size_t> matrix_sizes;  // size index of each matrix's own dimension
  DenseTensor clean_tensor;
  std::vector<RealMatrix> clean_matrices;
};

CoupledProblem create_coupled(const CoupledSpec& spec);

struct CoupledSolution {
  TuckerModel tucker;
  std::vector<RealMatrix> extra_factors;  // U_c, J x n_mode
  ConvergenceTrace trace;
  std::vector<double> matrix_residuals;   // ||M - V U^T|| / ||M|| per coupling
  std::size_t iters = 0;
};

CoupledSolution coupled_solve(const CoupledProblem& p, const SolverConfig& config);

// Mean relative error of the tensor and every coupled matrix against the
// noiseless data.
double reconstruction_error(const CoupledSolution& sol, const CoupledProblem& p);

// Mean over truth columns of |cosine| under the best one-to-one matching.
double factor_congruence(const RealMatrix& est, const RealMatrix& truth);

// Congruence of all ground-truth factors against factors recovered from the
// Tucker model (CP of the core mapped through the factors).
double coupled_congruence(const CoupledSolution& sol, const CoupledProblem& p);

}  // namespace tenrec
