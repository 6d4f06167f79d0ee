#include <cmath>

#include "tenrec/solver.hpp"

namespace tenrec {

namespace {

// u w^T, applied along one mode as two thin products.
struct LowRankOp {
  RealMatrix u, w;
};

// x multiplied along every mode k with ops[k] set: all shrinking products
// first, then the expanding ones.
DenseTensor apply_ops(const DenseTensor& x, const std::vector<const LowRankOp*>& ops) {
  DenseTensor y = x;
  for (std::size_t k = 0; k < ops.size(); ++k)
    if (ops[k]) y = mode_product_t(y, ops[k]->w, k);
  for (std::size_t k = 0; k < ops.size(); ++k)
    if (ops[k]) y = mode_product(y, ops[k]->u, k);
  return y;
}

std::vector<const LowRankOp*> all_but(const std::vector<LowRankOp>& ops, std::size_t skip) {
  std::vector<const LowRankOp*> out;
  for (std::size_t k = 0; k < ops.size(); ++k) out.push_back(k == skip ? nullptr : &ops[k]);
  return out;
}

// Quantities shared by the residuals and their derivatives, with
// L_l = V_l V_l^T and P_l = L_l^2 = (V_l G_l) V_l^T, G_l = V_l^T V_l.
struct Terms {
  std::vector<RealMatrix> gram;
  std::vector<LowRankOp> l, p;
  DenseTensor a;                    // xhat x_k P_k
  std::vector<DenseTensor> xs;      // xhat x_{i != l} V_i^T
  std::vector<RealMatrix> d, c, b;  // D_l = (xhat x_{i!=l} P_i)_(l) xhat_(l)^T + lambda_l S_l,
                                    // C_l = L_l D_l, B_l = C_l V_l
};

Terms compute_terms(const SolverContext& ctx, const SolverState& st) {
  Terms t;
  const std::size_t order = st.factors.size();
  for (const auto& v : st.factors) {
    t.gram.push_back(v.transpose() * v);
    t.l.push_back({v, v});
    t.p.push_back({v * t.gram.back(), v});
  }
  t.a = apply_ops(st.xhat, all_but(t.p, order));
  for (std::size_t l = 0; l < order; ++l) {
    DenseTensor xs = st.xhat;
    for (std::size_t i = 0; i < order; ++i)
      if (i != l) xs = mode_product_t(xs, st.factors[i], i);
    DenseTensor weighted = xs;
    for (std::size_t i = 0; i < order; ++i)
      if (i != l) weighted = mode_product(weighted, t.gram[i], i);
    t.d.push_back(contract_except(xs, weighted, l) + ctx.config.lambda[l] * ctx.s[l]);
    const RealMatrix& v = st.factors[l];
    t.c.push_back(v * (v.transpose() * t.d[l]));
    t.b.push_back(t.c[l] * v);
    t.xs.push_back(std::move(xs));
  }
  return t;
}

DenseTensor model_of(const SolverState& st) {
  return tucker_reconstruct(TuckerModel{st.core, st.factors});
}

// Derivative of the loss with respect to the model tensor.
DenseTensor loss_residual(const SolverContext& ctx, const DenseTensor& z) {
  DenseTensor e = z - ctx.x;
  if (ctx.config.loss_support == LossSupport::observed)
    for (std::size_t i = 0; i < e.size(); ++i)
      if (!ctx.observed[i]) e[i] = 0.0;
  return e;
}

double coupling_value(const SolverContext& ctx, const SolverState& st) {
  double s = 0.0;
  for (std::size_t c = 0; c < ctx.couplings.size(); ++c) {
    const auto& cp = ctx.couplings[c];
    if (cp.weight == 0.0) continue;
    s += 0.5 * cp.weight *
         (cp.matrix - st.factors[cp.mode] * st.extra[c].transpose()).squaredNorm();
  }
  return s;
}

double multiplier_sq_norm(const SolverState& st) {
  double s = squared_norm(st.y1);
  for (const auto& y : st.y2) s += y.squaredNorm();
  return s;
}

std::vector<double> flatten(const RealMatrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

std::vector<double> flatten(const DenseTensor& x) {
  return std::vector<double>(x.values().begin(), x.values().end());
}

void assign(RealMatrix& m, const std::vector<double>& v) {
  if (v.size() != static_cast<std::size_t>(m.size())) throw ShapeError("set_variable: size mismatch");
  std::copy(v.begin(), v.end(), m.data());
}

void assign(DenseTensor& x, const std::vector<double>& v) {
  if (v.size() != x.size()) throw ShapeError("set_variable: size mismatch");
  std::copy(v.begin(), v.end(), x.data());
}

}  // namespace

MetricFamily state_metric(const SolverState& state) { return metric_from_factors(state.factors); }

DenseTensor compute_M(const DenseTensor& xhat, const MetricFamily& m) {
  m.check(xhat.dims());
  return multi_mode_product(xhat, m.mats);
}

DenseTensor residual_A(const SolverState& state) {
  const MetricFamily m = state_metric(state);
  return multi_mode_product(compute_M(state.xhat, m), m.mats);
}

RealMatrix residual_B(const SolverContext& ctx, const SolverState& state, std::size_t mode) {
  if (mode >= state.factors.size()) throw ShapeError("residual_B: mode out of range");
  const MetricFamily m = state_metric(state);
  const DenseTensor big_m = compute_M(state.xhat, m);
  const RealMatrix ml = unfold(big_m, mode);
  std::vector<RealMatrix> others;
  for (std::size_t i = 0; i < m.mats.size(); ++i) others.push_back(m.mats[i]);
  const RealMatrix lhs = ml * kron_descending(others, mode) * unfold(state.xhat, mode).transpose() +
                         ctx.config.lambda[mode] * m.mats[mode] * ctx.s[mode];
  return lhs * state.factors[mode];
}

Residuals residuals(const SolverContext& ctx, const SolverState& state) {
  Terms t = compute_terms(ctx, state);
  return Residuals{std::move(t.a), std::move(t.b)};
}

double lower_objective(const DenseTensor& xhat, const MetricFamily& m, const SimilarityMatrices& s,
                       const std::vector<double>& lambda) {
  double f = 0.5 * squared_norm(compute_M(xhat, m));
  for (std::size_t l = 0; l < m.mats.size(); ++l)
    f += 0.5 * lambda[l] * (m.mats[l] * s[l] * m.mats[l].transpose()).trace();
  return f;
}

DenseTensor lower_gradient_xhat(const DenseTensor& xhat, const MetricFamily& m) {
  m.check(xhat.dims());
  std::vector<RealMatrix> gram;
  for (const auto& l : m.mats) gram.push_back(l.transpose() * l);
  return multi_mode_product(xhat, gram);
}

double lower_objective(const SolverContext& ctx, const SolverState& state) {
  return lower_objective(state.xhat, state_metric(state), ctx.s, ctx.config.lambda);
}

LowerGradients lower_gradients(const SolverContext& ctx, const SolverState& state) {
  const Terms t = compute_terms(ctx, state);
  LowerGradients g{t.a, {}};
  for (std::size_t l = 0; l < state.factors.size(); ++l)
    g.factors.push_back((t.c[l] + t.c[l].transpose()) * state.factors[l]);
  return g;
}

double loss_value(const SolverContext& ctx, const DenseTensor& z) {
  return 0.5 * squared_norm(loss_residual(ctx, z));
}

LagrangianValue augmented_lagrangian(const SolverContext& ctx, const SolverState& state) {
  const Terms t = compute_terms(ctx, state);
  const double rho = ctx.config.rho;
  LagrangianValue v;
  v.loss = loss_value(ctx, model_of(state));
  v.penalties = penalty_value(ctx.config.core_penalty, state.core);
  for (std::size_t l = 0; l < state.factors.size(); ++l)
    v.penalties += penalty_value(ctx.config.factor_penalties[l], state.factors[l]);
  v.coupling = coupling_value(ctx, state);

  double linear = inner(state.y1, t.a);
  double quad = squared_norm(t.a);
  double square = squared_norm(t.a - (1.0 / rho) * state.y1);
  for (std::size_t l = 0; l < t.b.size(); ++l) {
    linear += (state.y2[l].array() * t.b[l].array()).sum();
    quad += t.b[l].squaredNorm();
    square += (t.b[l] - state.y2[l] / rho).squaredNorm();
  }
  const double base = v.loss + v.penalties + v.coupling;
  v.value = base - linear + 0.5 * rho * quad;
  v.completed_square = base + 0.5 * rho * square;
  v.constant = multiplier_sq_norm(state) / (2.0 * rho);
  return v;
}

double smooth_lagrangian(const SolverContext& ctx, const SolverState& state) {
  const Terms t = compute_terms(ctx, state);
  const double rho = ctx.config.rho;
  double square = squared_norm(t.a - (1.0 / rho) * state.y1);
  for (std::size_t l = 0; l < t.b.size(); ++l) square += (t.b[l] - state.y2[l] / rho).squaredNorm();
  return loss_value(ctx, model_of(state)) + coupling_value(ctx, state) + 0.5 * rho * square;
}

std::string Variable::name() const {
  switch (kind) {
    case factor: return "V" + std::to_string(index);
    case core: return "G";
    case xhat: return "Xhat";
    case z: return "Z";
    case extra: return "U" + std::to_string(index);
  }
  return "?";
}

std::vector<double> get_variable(const SolverState& state, Variable v) {
  switch (v.kind) {
    case Variable::factor: return flatten(state.factors.at(v.index));
    case Variable::core: return flatten(state.core);
    case Variable::xhat: return flatten(state.xhat);
    case Variable::z: return flatten(state.z);
    case Variable::extra: return flatten(state.extra.at(v.index));
  }
  throw ShapeError("unknown variable");
}

void set_variable(SolverState& state, Variable v, const std::vector<double>& values) {
  switch (v.kind) {
    case Variable::factor: return assign(state.factors.at(v.index), values);
    case Variable::core: return assign(state.core, values);
    case Variable::xhat: return assign(state.xhat, values);
    case Variable::z: return assign(state.z, values);
    case Variable::extra: return assign(state.extra.at(v.index), values);
  }
  throw ShapeError("unknown variable");
}

std::vector<Variable> all_variables(const SolverContext& ctx) {
  std::vector<Variable> vars;
  for (std::size_t l = 0; l < ctx.x.order(); ++l) vars.push_back({Variable::factor, l});
  for (std::size_t c = 0; c < ctx.couplings.size(); ++c) vars.push_back({Variable::extra, c});
  vars.push_back({Variable::core, 0});
  vars.push_back({Variable::xhat, 0});
  vars.push_back({Variable::z, 0});
  return vars;
}

std::vector<double> grad_lagrangian_wrt(const SolverContext& ctx, const SolverState& state,
                                        Variable v) {
  switch (v.kind) {
    case Variable::factor: return flatten(grad_factor(ctx, state, v.index));
    case Variable::core: return flatten(grad_core(ctx, state));
    case Variable::xhat: return flatten(grad_xhat(ctx, state));
    case Variable::z: return flatten(grad_z(ctx, state.z));
    case Variable::extra: return flatten(grad_extra(ctx, state, v.index));
  }
  throw ShapeError("unknown variable");
}

DenseTensor grad_xhat(const SolverContext& ctx, const SolverState& state) {
  const Terms t = compute_terms(ctx, state);
  const double rho = ctx.config.rho;
  const std::size_t order = state.factors.size();
  DenseTensor g = apply_ops(rho * t.a - state.y1, all_but(t.p, order));
  for (std::size_t l = 0; l < order; ++l) {
    // B_l enters through both xhat factors of C_l; the two mode-l operators
    // L Q and Q^T L (Q = R2 V^T) share the other modes and are summed.
    const RealMatrix& v = state.factors[l];
    const RealMatrix r2 = rho * t.b[l] - state.y2[l];
    const RealMatrix vr = v.transpose() * r2;
    std::vector<const LowRankOp*> ops = all_but(t.p, l);
    const LowRankOp mode_op{v * (vr + vr.transpose()), v};
    ops[l] = &mode_op;
    g += apply_ops(state.xhat, ops);
  }
  return g;
}

RealMatrix grad_factor(const SolverContext& ctx, const SolverState& state, std::size_t mode) {
  const std::size_t order = state.factors.size();
  if (mode >= order) throw ShapeError("grad_factor: mode out of range");
  const Terms t = compute_terms(ctx, state);
  const double rho = ctx.config.rho;
  const RealMatrix& v = state.factors[mode];
  const RealMatrix lm = v * v.transpose();
  std::vector<RealMatrix> r2;
  for (std::size_t i = 0; i < order; ++i) r2.push_back(rho * t.b[i] - state.y2[i]);

  // Gradient with respect to L_mode, then mapped through L = V V^T.
  DenseTensor r1 = rho * t.a - state.y1;
  for (std::size_t i = 0; i < order; ++i)
    if (i != mode) r1 = mode_product_t(r1, t.p[i].u, i);
  const RealMatrix f = contract_except(r1, t.xs[mode], mode);
  RealMatrix gl = f * lm + lm * f;
  gl += r2[mode] * (v.transpose() * t.d[mode].transpose());
  for (std::size_t m = 0; m < order; ++m) {
    if (m == mode) continue;
    DenseTensor other = mode_product(t.xs[mode], state.factors[m].transpose() * r2[m], m);
    for (std::size_t i = 0; i < order; ++i)
      if (i != m && i != mode) other = mode_product(other, t.gram[i], i);
    const RealMatrix f2 = contract_except(t.xs[mode], other, mode);
    gl += f2 * lm + lm * f2;
  }
  RealMatrix g = (gl + gl.transpose()) * v + t.c[mode].transpose() * r2[mode];

  DenseTensor e = loss_residual(ctx, model_of(state));
  for (std::size_t i = 0; i < order; ++i)
    if (i != mode) e = mode_product_t(e, state.factors[i], i);
  g += contract_except(e, state.core, mode);

  for (std::size_t c = 0; c < ctx.couplings.size(); ++c) {
    const auto& cp = ctx.couplings[c];
    if (cp.mode != mode || cp.weight == 0.0) continue;
    g -= cp.weight * (cp.matrix - v * state.extra[c].transpose()) * state.extra[c];
  }
  return g;
}

DenseTensor grad_core(const SolverContext& ctx, const SolverState& state) {
  return multi_mode_product_t(loss_residual(ctx, model_of(state)), state.factors);
}

DenseTensor grad_z(const SolverContext& ctx, const DenseTensor& z) { return loss_residual(ctx, z); }

RealMatrix grad_extra(const SolverContext& ctx, const SolverState& state, std::size_t c) {
  const auto& cp = ctx.couplings.at(c);
  const RealMatrix& v = state.factors[cp.mode];
  return -cp.weight * (cp.matrix - v * state.extra[c].transpose()).transpose() * v;
}

}  // namespace tenrec
