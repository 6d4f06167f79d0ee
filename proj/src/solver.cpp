#include "tenrec/solver.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "tenrec/eval.hpp"
#include "tenrec/kempf_ness.hpp"
#include "tenrec/linalg.hpp"

namespace tenrec {

namespace {

constexpr int kMaxBacktracks = 60;
constexpr double kAcceptSlack = 1e-12;

double penalty_total(const SolverContext& ctx, const SolverState& st) {
  double v = penalty_value(ctx.config.core_penalty, st.core);
  for (std::size_t l = 0; l < st.factors.size(); ++l)
    v += penalty_value(ctx.config.factor_penalties[l], st.factors[l]);
  return v;
}

double full_lagrangian(const SolverContext& ctx, const SolverState& st) {
  return smooth_lagrangian(ctx, st) + penalty_total(ctx, st);
}

double relative_rise(double before, double after) {
  return (after - before) / std::max(1.0, std::abs(before));
}

std::string state_summary(const SolverState& st) {
  std::string s = "|G|=" + std::to_string(frobenius_norm(st.core));
  for (std::size_t l = 0; l < st.factors.size(); ++l)
    s += " |V" + std::to_string(l) + "|=" + std::to_string(st.factors[l].norm());
  s += " |Z|=" + std::to_string(frobenius_norm(st.z));
  s += " |Xhat|=" + std::to_string(frobenius_norm(st.xhat));
  s += " |Y1|=" + std::to_string(frobenius_norm(st.y1));
  return s;
}

bool finite(const RealMatrix& m) { return m.allFinite(); }
bool finite(const DenseTensor& x) { return x.all_finite(); }

template <class T>
void require_finite(const T& value, const SolverState& st, const std::string& block) {
  if (!finite(value))
    throw NumericError("non-finite value in block " + block + " at iteration " +
                       std::to_string(st.iter) + " (" + state_summary(st) + ")");
}

double spectral_norm_sq(const RealMatrix& m) {
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(m.transpose() * m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

SolverContext make_context(const DenseTensor& x, const ObservationMask& mask,
                           std::optional<SimilarityMatrices> s, SolverConfig config,
                           std::vector<Coupling> couplings) {
  const std::size_t order = x.order();
  if (mask.dims() != x.dims()) throw ShapeError("mask dims do not match the tensor");
  if (mask.empty()) throw ShapeError("observation mask is empty");
  if (config.ranks.size() != order) throw ShapeError("need one rank per mode");
  for (std::size_t k = 0; k < order; ++k)
    if (config.ranks[k] < 1 || config.ranks[k] > x.dim(k))
      throw ShapeError("rank " + std::to_string(config.ranks[k]) + " out of range for mode " +
                       std::to_string(k) + " of size " + std::to_string(x.dim(k)));
  if (config.lambda.empty()) config.lambda.assign(order, 0.1);
  if (config.lambda.size() != order) throw ShapeError("need one lambda per mode");
  for (double l : config.lambda)
    if (!(l >= 0.0)) throw ShapeError("lambda must be nonnegative");
  if (!(config.rho > 0.0)) throw ShapeError("rho must be positive");
  if (!(config.prox_core >= 0.0)) throw ShapeError("core prox parameter must be nonnegative");
  if (config.prox_factor.empty()) config.prox_factor.assign(order, 0.0);
  if (config.prox_factor.size() != order) throw ShapeError("need one factor prox parameter per mode");
  for (double p : config.prox_factor)
    if (!(p >= 0.0)) throw ShapeError("factor prox parameters must be nonnegative");
  if (config.factor_penalties.empty()) config.factor_penalties.assign(order, Penalty{});
  if (config.factor_penalties.size() != order) throw ShapeError("need one factor penalty per mode");
  if (!(config.tol_rel >= 0.0)) throw ShapeError("tol_rel must be nonnegative");
  if (config.lipschitz_every == 0) config.lipschitz_every = 1;

  SolverContext ctx;
  ctx.x = x;
  ctx.mask = mask;
  ctx.observed = mask.bitmap();
  ctx.x_filled = x;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!ctx.observed[i]) ctx.x_filled[i] = 0.0;
  if (s) {
    if (s->size() != order) throw ShapeError("need one similarity matrix per mode");
    for (std::size_t k = 0; k < order; ++k) {
      if (static_cast<std::size_t>((*s)[k].rows()) != x.dim(k) ||
          static_cast<std::size_t>((*s)[k].cols()) != x.dim(k))
        throw ShapeError("similarity matrix " + std::to_string(k) + " has the wrong shape");
      ctx.s.push_back(psd_floor(symmetrize((*s)[k]), 0.0));
    }
  } else {
    ctx.s = build_similarities(ctx.x_filled);
  }
  for (std::size_t c = 0; c < couplings.size(); ++c) {
    const auto& cp = couplings[c];
    if (cp.mode >= order) throw ShapeError("coupling mode out of range");
    if (static_cast<std::size_t>(cp.matrix.rows()) != x.dim(cp.mode))
      throw ShapeError("coupled matrix rows must equal the shared mode size");
    if (!(cp.weight >= 0.0)) throw ShapeError("coupling weight must be nonnegative");
    if (!cp.matrix.allFinite()) throw NumericError("coupled matrix has non-finite entries");
    for (std::size_t d = 0; d < c; ++d)
      if (couplings[d].mode == cp.mode) throw ShapeError("coupled modes must be distinct");
  }
  ctx.couplings = std::move(couplings);
  ctx.config = std::move(config);
  return ctx;
}

SolverState initial_state(const SolverContext& ctx) {
  SolverState st;
  TuckerModel init = hosvd(ctx.x_filled, ctx.config.ranks);
  st.factors = std::move(init.factors);
  st.core = std::move(init.core);
  if (ctx.config.init_balance > 0.0) {
    // Rescale V -> cV, G -> G / c^K (Z unchanged) until the constraint terms
    // fall below init_balance times the data energy.
    const double budget = ctx.config.init_balance * 0.5 * squared_norm(ctx.x_filled);
    const double order = static_cast<double>(st.factors.size());
    st.xhat = pin_observed(tucker_reconstruct(TuckerModel{st.core, st.factors}), ctx.x,
                           ctx.observed);
    for (int halvings = 0; halvings < 60; ++halvings) {
      st.y1 = DenseTensor(ctx.x.dims());
      st.y2.clear();
      for (const auto& v : st.factors) st.y2.push_back(RealMatrix::Zero(v.rows(), v.cols()));
      const Residuals rs = residuals(ctx, st);
      double c = squared_norm(rs.a);
      for (const auto& b : rs.b) c += b.squaredNorm();
      if (0.5 * ctx.config.rho * c <= budget) break;
      for (auto& v : st.factors) v *= 0.5;
      st.core *= std::pow(2.0, order);
    }
  }
  st.z = ctx.x_filled;
  st.xhat = pin_observed(tucker_reconstruct(TuckerModel{st.core, st.factors}), ctx.x,
                         ctx.observed);
  st.y1 = DenseTensor(ctx.x.dims());
  st.y2.clear();
  for (const auto& v : st.factors) st.y2.push_back(RealMatrix::Zero(v.rows(), v.cols()));
  for (std::size_t c = 0; c < ctx.couplings.size(); ++c) {
    st.extra.push_back(RealMatrix::Zero(ctx.couplings[c].matrix.cols(),
                                        st.factors[ctx.couplings[c].mode].cols()));
    st.extra[c] = update_extra(ctx, st, c);
  }
  return st;
}

RealMatrix update_factor(const SolverContext& ctx, const SolverState& state, std::size_t mode,
                         double rho_block) {
  const RealMatrix g = grad_factor(ctx, state, mode);
  return prox(ctx.config.factor_penalties[mode], state.factors[mode] - g / rho_block, rho_block);
}

DenseTensor update_core(const SolverContext& ctx, const SolverState& state, double rho_block) {
  DenseTensor u = state.core;
  u -= (1.0 / rho_block) * grad_core(ctx, state);
  return prox(ctx.config.core_penalty, u, rho_block);
}

RealMatrix update_extra(const SolverContext& ctx, const SolverState& state, std::size_t c) {
  const auto& cp = ctx.couplings.at(c);
  const RealMatrix& v = state.factors[cp.mode];
  return v.completeOrthogonalDecomposition().solve(cp.matrix).transpose();
}

MetricStep update_metric_step(const SolverContext& ctx, const SolverState& state,
                              const MetricFamily& learned) {
  MetricStep out;
  out.metric = dml_sweep_tensor(state.xhat, ctx.s, ctx.config.lambda, learned);
  out.objective_before = lower_objective(state.xhat, out.metric, ctx.s, ctx.config.lambda);
  const DenseTensor g = lower_gradient_xhat(state.xhat, out.metric);
  double lip = 1.0;
  for (const auto& l : out.metric.mats) lip *= spectral_norm_sq(l);
  out.xhat = state.xhat;
  if (lip > 0.0)
    for (std::size_t i = 0; i < out.xhat.size(); ++i)
      if (!ctx.observed[i]) out.xhat[i] -= g[i] / lip;
  out.objective_after = lower_objective(out.xhat, out.metric, ctx.s, ctx.config.lambda);
  return out;
}

void update_duals(const SolverContext& ctx, SolverState& state) {
  const Residuals r = residuals(ctx, state);
  const double rho = ctx.config.rho;
  state.y1 -= rho * r.a;
  for (std::size_t l = 0; l < state.y2.size(); ++l) state.y2[l] -= rho * r.b[l];
}

double estimate_lipschitz(const SolverContext& ctx, const SolverState& state, Variable v,
                          std::uint64_t seed, int iters) {
  const std::vector<double> x0 = get_variable(state, v);
  const std::size_t n = x0.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::VectorXd dir(n);
  for (std::size_t i = 0; i < n; ++i) dir(i) = nd(rng);
  dir.normalize();
  double scale = 0.0;
  for (double a : x0) scale = std::max(scale, std::abs(a));
  const double h = 1e-5 * (1.0 + scale);

  SolverState probe = state;
  auto grad_at = [&](double t) {
    std::vector<double> x = x0;
    for (std::size_t i = 0; i < n; ++i) x[i] += t * dir(i);
    set_variable(probe, v, x);
    const std::vector<double> g = grad_lagrangian_wrt(ctx, probe, v);
    return Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(n)).eval();
  };
  double estimate = 0.0;
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd hv = (grad_at(h) - grad_at(-h)) / (2.0 * h);
    estimate = hv.norm();
    if (!std::isfinite(estimate)) throw NumericError("Lipschitz estimate for " + v.name() + " is not finite");
    if (estimate == 0.0) break;
    dir = hv / estimate;
  }
  return estimate;
}

void write_trace_csv(std::ostream& os, const ConvergenceTrace& trace) {
  os << "iter,lagrangian,loss,fit,rse,resA,resB_max,step_norm\n";
  char buf[512];
  for (const auto& r : trace.records) {
    std::snprintf(buf, sizeof buf, "%zu,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e\n", r.iter,
                  r.lagrangian, r.loss, r.fit, r.rse, r.res_a, r.res_b_max, r.step_norm);
    os << buf;
  }
}

SolveResult solve(const SolverContext& ctx_in, const SolveOptions& options) {
  SolverContext ctx = ctx_in;
  const std::size_t order = ctx.x.order();
  const auto& cfg = ctx.config;

  const bool have_reference = options.reference.has_value();
  const DenseTensor& reference = have_reference ? *options.reference : ctx.x;
  if (reference.dims() != ctx.x.dims()) throw ShapeError("reference tensor dims differ from input");
  ObservationMask eval_cells =
      have_reference ? support_cells(options.eval_support, ctx.mask) : ctx.mask;
  if (eval_cells.empty()) eval_cells = ObservationMask::full(ctx.x.dims());

  SolveResult res;
  SolverState st = initial_state(ctx);
  MetricFamily learned = identity_metric(ctx.x.dims());

  auto make_record = [&](std::size_t iter, double step_norm) {
    TraceRecord r;
    r.iter = iter;
    r.lagrangian = augmented_lagrangian(ctx, st).value;
    r.loss = loss_value(ctx, st.z);
    const DenseTensor completed = pin_observed(st.z, ctx.x, ctx.observed);
    r.fit = fit(reference, completed, eval_cells);
    r.rse = rse(reference, completed, eval_cells);
    const Residuals rs = residuals(ctx, st);
    r.res_a = frobenius_norm(rs.a);
    for (const auto& b : rs.b) r.res_b_max = std::max(r.res_b_max, b.norm());
    r.step_norm = step_norm;
    return r;
  };
  res.trace.records.push_back(make_record(0, 0.0));

  // blocks: factors, then coupled factors (exact), then the core
  std::vector<double> block_rho(order + 1, 0.0);
  auto refresh_rho = [&]() {
    for (std::size_t l = 0; l < order; ++l) {
      if (cfg.prox_factor[l] > 0.0) {
        block_rho[l] = cfg.prox_factor[l];
      } else {
        const double lip = estimate_lipschitz(ctx, st, {Variable::factor, l}, cfg.seed + 17 * l + 1);
        block_rho[l] = std::max(cfg.lipschitz_factor * lip, 1e-8);
      }
    }
    if (cfg.prox_core > 0.0) {
      block_rho[order] = cfg.prox_core;
    } else {
      const double lip = estimate_lipschitz(ctx, st, {Variable::core, 0}, cfg.seed + 17 * order + 1);
      block_rho[order] = std::max(cfg.lipschitz_factor * lip, 1e-8);
    }
  };

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    st.iter = it;
    TraceRecord rec;
    rec.steps.assign(order + ctx.couplings.size() + 3, 0.0);

    if (cfg.refresh_similarity_every > 0 && it % cfg.refresh_similarity_every == 0)
      ctx.s = build_similarities(pin_observed(st.z, ctx.x, ctx.observed));

    MetricStep ms = update_metric_step(ctx, st, learned);
    require_finite(ms.xhat, st, "Xhat");
    rec.steps[order + ctx.couplings.size() + 2] = frobenius_norm(ms.xhat - st.xhat);
    rec.lower_decrease = ms.objective_before - ms.objective_after;
    st.xhat = std::move(ms.xhat);
    learned = std::move(ms.metric);

    if ((it - 1) % cfg.lipschitz_every == 0) {
      refresh_rho();
    } else if (cfg.relax_prox) {
      for (auto& r : block_rho) r = std::max(0.5 * r, 1e-8);
    }

    double phi = full_lagrangian(ctx, st);
    auto accept = [&](double trial) {
      rec.max_block_increase = std::max(rec.max_block_increase, relative_rise(phi, trial));
      phi = trial;
    };

    for (std::size_t l = 0; l < order; ++l) {
      const RealMatrix old = st.factors[l];
      for (std::size_t k = 0; k < cfg.factor_inner_steps; ++k) {
        const RealMatrix prev = st.factors[l];
        const RealMatrix g = grad_factor(ctx, st, l);
        const double f0 = smooth_lagrangian(ctx, st);
        bool moved = false;
        for (int bt = 0; bt < kMaxBacktracks && !moved; ++bt) {
          const double r = block_rho[l];
          RealMatrix cand = prox(cfg.factor_penalties[l], prev - g / r, r);
          require_finite(cand, st, "V" + std::to_string(l));
          const RealMatrix d = cand - prev;
          st.factors[l] = std::move(cand);
          const double fs = smooth_lagrangian(ctx, st);
          const double model = f0 + (g.array() * d.array()).sum() + 0.5 * r * d.squaredNorm();
          const double trial = fs + penalty_total(ctx, st);
          if (fs - model <= kAcceptSlack * std::max(1.0, std::abs(f0)) &&
              relative_rise(phi, trial) <= kAcceptSlack) {
            accept(trial);
            moved = true;
          } else {
            st.factors[l] = prev;
            block_rho[l] *= 2.0;
          }
        }
        if (!moved) break;
      }
      rec.steps[l] = (st.factors[l] - old).norm();
    }
    for (std::size_t c = 0; c < ctx.couplings.size(); ++c) {
      RealMatrix old = st.extra[c];
      st.extra[c] = update_extra(ctx, st, c);
      require_finite(st.extra[c], st, "U" + std::to_string(c));
      const double trial = full_lagrangian(ctx, st);
      if (relative_rise(phi, trial) <= kAcceptSlack) {
        accept(trial);
        rec.steps[order + c] = (st.extra[c] - old).norm();
      } else {
        st.extra[c] = old;
      }
    }
    {
      const DenseTensor old = st.core;
      for (std::size_t k = 0; k < cfg.core_inner_steps; ++k) {
        const DenseTensor prev = st.core;
        const DenseTensor g = grad_core(ctx, st);
        const double f0 = smooth_lagrangian(ctx, st);
        bool moved = false;
        for (int bt = 0; bt < kMaxBacktracks && !moved; ++bt) {
          const double r = block_rho[order];
          DenseTensor u = prev;
          u -= (1.0 / r) * g;
          DenseTensor cand = prox(cfg.core_penalty, u, r);
          require_finite(cand, st, "G");
          const DenseTensor d = cand - prev;
          st.core = std::move(cand);
          const double fs = smooth_lagrangian(ctx, st);
          const double model = f0 + inner(g, d) + 0.5 * r * squared_norm(d);
          const double trial = fs + penalty_total(ctx, st);
          if (fs - model <= kAcceptSlack * std::max(1.0, std::abs(f0)) &&
              relative_rise(phi, trial) <= kAcceptSlack) {
            accept(trial);
            moved = true;
          } else {
            st.core = prev;
            block_rho[order] *= 2.0;
          }
        }
        if (!moved) break;
      }
      rec.steps[order + ctx.couplings.size()] = frobenius_norm(st.core - old);
    }

    const DenseTensor z_old = st.z;
    st.z = tucker_reconstruct(TuckerModel{st.core, st.factors});
    require_finite(st.z, st, "Z");
    const double dz = frobenius_norm(st.z - z_old);
    rec.steps[order + ctx.couplings.size() + 1] = dz;

    update_duals(ctx, st);
    require_finite(st.y1, st, "Y1");

    const double zn = frobenius_norm(st.z);
    const double rel = zn > 0.0 ? dz / zn : dz;
    TraceRecord full = make_record(it, rel);
    full.steps = std::move(rec.steps);
    full.max_block_increase = rec.max_block_increase;
    full.lower_decrease = rec.lower_decrease;
    res.trace.records.push_back(std::move(full));
    if (rel < cfg.tol_rel) {
      res.converged = true;
      break;
    }
  }

  res.model = TuckerModel{st.core, st.factors};
  res.xhat = st.xhat;
  res.completed = pin_observed(st.z, ctx.x, ctx.observed);
  res.metric = learned;
  res.state = std::move(st);
  return res;
}

SolveResult solve(const DenseTensor& x, const ObservationMask& mask,
                  std::optional<SimilarityMatrices> s, const SolverConfig& config,
                  const SolveOptions& options) {
  return solve(make_context(x, mask, std::move(s), config), options);
}

}  // namespace tenrec
