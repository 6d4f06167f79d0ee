#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "tenrec/metric.hpp"
#include "tenrec/prox.hpp"

namespace tenrec {

enum class LossSupport { observed, all };
enum class EvalSupport { all, observed, missing };

struct SolverConfig {
  std::vector<std::size_t> ranks;
  std::vector<double> lambda;          // empty: 0.1 per mode
  double rho = 1.0;
  double prox_core = 0.0;              // 0: estimated from the local Lipschitz constant
  std::vector<double> prox_factor;     // empty or 0 entries: estimated
  Penalty core_penalty;
  std::vector<Penalty> factor_penalties;  // empty: none
  std::size_t max_iters = 50;
  double tol_rel = 1e-5;
  std::uint64_t seed = 0;
  std::size_t refresh_similarity_every = 0;  // 0: off
  LossSupport loss_support = LossSupport::observed;
  std::size_t lipschitz_every = 10;
  // > 0: shrink the initial factors (growing the core to keep Z) until the
  // constraint terms are at most this fraction of the data energy.
  double init_balance = 1e-4;
  // Halve the prox parameters between Lipschitz refreshes; backtracking
  // doubles them back whenever a step would raise the Lagrangian.
  bool relax_prox = true;
  std::size_t factor_inner_steps = 1;  // prox-linear steps per factor block per iteration
  std::size_t core_inner_steps = 1;
  double lipschitz_factor = 2.0;
};

// A matrix sharing tensor mode `mode`: matrix is N_mode x J, modelled as V_mode U^T.
struct Coupling {
  RealMatrix matrix;
  std::size_t mode = 0;
  double weight = 1.0;
};

struct SolverState {
  std::vector<RealMatrix> factors;  // V_l, N_l x n_l
  DenseTensor core;
  DenseTensor z;
  DenseTensor xhat;
  DenseTensor y1;                   // multiplier of A
  std::vector<RealMatrix> y2;       // multipliers of B_l, N_l x n_l
  std::vector<RealMatrix> extra;    // coupled factors U_c, J x n_mode
  std::size_t iter = 0;
};

// Fixed data of one problem, with configuration defaults resolved.
struct SolverContext {
  DenseTensor x;                       // input values as given
  DenseTensor x_filled;                // observed values, zeros elsewhere
  ObservationMask mask;
  std::vector<unsigned char> observed;
  SimilarityMatrices s;
  SolverConfig config;
  std::vector<Coupling> couplings;
};

SolverContext make_context(const DenseTensor& x, const ObservationMask& mask,
                           std::optional<SimilarityMatrices> s, SolverConfig config,
                           std::vector<Coupling> couplings = {});

// Initial block of the iteration: HOSVD factors of the zero-filled data,
// projected core, zero multipliers, observed entries pinned in xhat.
SolverState initial_state(const SolverContext& ctx);

MetricFamily state_metric(const SolverState& state);

DenseTensor compute_M(const DenseTensor& xhat, const MetricFamily& m);
DenseTensor residual_A(const SolverState& state);
// Evaluated from unfoldings and an explicit Kronecker composite.
RealMatrix residual_B(const SolverContext& ctx, const SolverState& state, std::size_t mode);

struct Residuals {
  DenseTensor a;
  std::vector<RealMatrix> b;
};
// All residuals through mode products only.
Residuals residuals(const SolverContext& ctx, const SolverState& state);

// Lower-level objective 1/2||xhat x L||^2 + 1/2 sum lambda_l Tr(L_l S_l L_l^T).
double lower_objective(const DenseTensor& xhat, const MetricFamily& m,
                       const SimilarityMatrices& s, const std::vector<double>& lambda);
DenseTensor lower_gradient_xhat(const DenseTensor& xhat, const MetricFamily& m);
double lower_objective(const SolverContext& ctx, const SolverState& state);

struct LowerGradients {
  DenseTensor xhat;
  std::vector<RealMatrix> factors;
};
// Gradients of the lower objective at L_l = V_l V_l^T.
LowerGradients lower_gradients(const SolverContext& ctx, const SolverState& state);

double loss_value(const SolverContext& ctx, const DenseTensor& z);

struct LagrangianValue {
  double loss = 0.0;
  double penalties = 0.0;
  double coupling = 0.0;
  double value = 0.0;             // scaled augmented Lagrangian with linear multiplier terms
  double completed_square = 0.0;  // same up to (||Y1||^2 + sum ||Y2_l||^2) / (2 rho)
  double constant = 0.0;          // that offset
};
// The loss is evaluated at the Tucker model of (core, factors).
LagrangianValue augmented_lagrangian(const SolverContext& ctx, const SolverState& state);
// Completed-square form without penalties: the part the block steps linearize.
double smooth_lagrangian(const SolverContext& ctx, const SolverState& state);

struct Variable {
  enum Kind { factor, core, xhat, z, extra } kind = factor;
  std::size_t index = 0;
  std::string name() const;
};

// Flattened views used by finite-difference checks. Matrices flatten
// column-major, tensors in storage order.
std::vector<double> get_variable(const SolverState& state, Variable v);
void set_variable(SolverState& state, Variable v, const std::vector<double>& values);
std::vector<Variable> all_variables(const SolverContext& ctx);

// Gradient of smooth_lagrangian; for `z` it is the gradient of the loss at state.z.
std::vector<double> grad_lagrangian_wrt(const SolverContext& ctx, const SolverState& state,
                                        Variable v);
RealMatrix grad_factor(const SolverContext& ctx, const SolverState& state, std::size_t mode);
DenseTensor grad_core(const SolverContext& ctx, const SolverState& state);
DenseTensor grad_xhat(const SolverContext& ctx, const SolverState& state);
DenseTensor grad_z(const SolverContext& ctx, const DenseTensor& z);
RealMatrix grad_extra(const SolverContext& ctx, const SolverState& state, std::size_t c);

// Prox-linear block steps with parameter rho_block (step 1/rho_block).
RealMatrix update_factor(const SolverContext& ctx, const SolverState& state, std::size_t mode,
                         double rho_block);
DenseTensor update_core(const SolverContext& ctx, const SolverState& state, double rho_block);
// Exact least-squares refit of a coupled factor.
RealMatrix update_extra(const SolverContext& ctx, const SolverState& state, std::size_t c);

struct MetricStep {
  DenseTensor xhat;
  MetricFamily metric;
  double objective_before = 0.0;
  double objective_after = 0.0;
};
// Refreshes the learned metric by one determinant-normalized sweep, then
// takes a 1/Lipschitz gradient step on the unobserved entries of xhat.
MetricStep update_metric_step(const SolverContext& ctx, const SolverState& state,
                              const MetricFamily& learned);

void update_duals(const SolverContext& ctx, SolverState& state);

// Largest curvature of the smooth Lagrangian along block `v`, by power
// iteration on finite-difference Hessian-vector products.
double estimate_lipschitz(const SolverContext& ctx, const SolverState& state, Variable v,
                          std::uint64_t seed, int iters = 15);

struct TraceRecord {
  std::size_t iter = 0;
  double lagrangian = 0.0;
  double loss = 0.0;
  double fit = 0.0;
  double rse = 0.0;
  double res_a = 0.0;
  double res_b_max = 0.0;
  double step_norm = 0.0;           // relative change of Z
  std::vector<double> steps;        // per block: V_0..V_{K-1}, U_c..., G, Z, xhat
  double max_block_increase = 0.0;  // largest relative Lagrangian rise over primal blocks
  double lower_decrease = 0.0;      // lower objective drop in the metric step
};

struct ConvergenceTrace {
  std::vector<TraceRecord> records;
};

void write_trace_csv(std::ostream& os, const ConvergenceTrace& trace);

struct SolveOptions {
  std::optional<DenseTensor> reference;  // for fit/rse columns; defaults to the input
  EvalSupport eval_support = EvalSupport::missing;
};

struct SolveResult {
  TuckerModel model;
  DenseTensor xhat;
  DenseTensor completed;  // observed entries from the input, the model elsewhere
  MetricFamily metric;    // learned lower-level metric
  ConvergenceTrace trace;
  SolverState state;
  bool converged = false;
};

SolveResult solve(const SolverContext& ctx, const SolveOptions& options = {});
SolveResult solve(const DenseTensor& x, const ObservationMask& mask,
                  std::optional<SimilarityMatrices> s, const SolverConfig& config,
                  const SolveOptions& options = {});

}  // namespace tenrec
