#include "tenrec/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <map>

#include "tenrec/eval.hpp"
#include "tenrec/kempf_ness.hpp"
#include "tenrec/linalg.hpp"

namespace tenrec {

namespace {

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Central differences at steps h and h/2 combined by Richardson extrapolation.
double compare_fd(SolverState state, Variable v, const std::vector<double>& analytic,
                  const std::function<double(const SolverState&)>& objective) {
  const std::vector<double> x0 = get_variable(state, v);
  std::vector<double> fd(x0.size()), x = x0;
  auto central = [&](std::size_t i, double h) {
    x[i] = x0[i] + h;
    set_variable(state, v, x);
    const double up = objective(state);
    x[i] = x0[i] - h;
    set_variable(state, v, x);
    const double down = objective(state);
    x[i] = x0[i];
    return (up - down) / (2.0 * h);
  };
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double h = 1e-3 * (1.0 + std::abs(x0[i]));
    fd[i] = (4.0 * central(i, h / 2.0) - central(i, h)) / 3.0;
  }
  set_variable(state, v, x0);
  std::vector<double> diff(fd.size());
  for (std::size_t i = 0; i < fd.size(); ++i) diff[i] = analytic[i] - fd[i];
  return norm2(diff) / std::max(norm2(fd), 1e-12);
}

std::vector<double> flat(const RealMatrix& m) { return {m.data(), m.data() + m.size()}; }
std::vector<double> flat(const DenseTensor& x) { return {x.values().begin(), x.values().end()}; }

RealMatrix random_psd(Eigen::Index n, Rng& rng) {
  const RealMatrix b = gaussian_matrix(n, n, rng);
  return b * b.transpose() / static_cast<double>(n);
}

// det-1 curve through the identity with tangent e (trace-free).
RealMatrix special_linear_path(const RealMatrix& e, double t) {
  const RealMatrix m = RealMatrix::Identity(e.rows(), e.cols()) + t * e;
  return m / std::pow(m.determinant(), 1.0 / static_cast<double>(e.rows()));
}

double total_sq(const std::vector<DenseTensor>& xs) {
  double s = 0.0;
  for (const auto& x : xs) s += squared_norm(x);
  return s;
}

}  // namespace

GradcheckInstance random_instance(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> dim(2, 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Dims dims{dim(rng), dim(rng), dim(rng)};
  SolverConfig cfg;
  for (auto d : dims) {
    std::uniform_int_distribution<std::size_t> r(1, std::min<std::size_t>(3, d));
    cfg.ranks.push_back(r(rng));
    cfg.lambda.push_back(0.05 + 0.45 * unit(rng));
  }
  cfg.rho = 0.5 + 1.5 * unit(rng);
  cfg.loss_support = (seed % 3 == 2) ? LossSupport::all : LossSupport::observed;

  const DenseTensor x = gaussian_tensor(dims, rng);
  const ObservationMask mask = mask_random(dims, 0.6, seed ^ 0x5eedULL);
  SimilarityMatrices s;
  for (auto d : dims) s.push_back(random_psd(static_cast<Eigen::Index>(d), rng));
  std::vector<Coupling> couplings;
  if (seed % 2 == 1) {
    const std::size_t mode = seed % 3;
    couplings.push_back(Coupling{gaussian_matrix(dims[mode], 3, rng), mode, 0.5 + unit(rng)});
  }
  GradcheckInstance inst{make_context(x, mask, s, cfg, couplings), {}};

  SolverState& st = inst.state;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const auto n = static_cast<Eigen::Index>(dims[k]);
    st.factors.push_back((0.8 + 0.4 * unit(rng)) *
                         random_orthogonal(n, rng).leftCols(static_cast<Eigen::Index>(cfg.ranks[k])));
    st.y2.push_back(0.3 * gaussian_matrix(dims[k], cfg.ranks[k], rng));
  }
  st.core = gaussian_tensor(Dims(cfg.ranks.begin(), cfg.ranks.end()), rng);
  st.z = gaussian_tensor(dims, rng);
  st.xhat = pin_observed(gaussian_tensor(dims, rng), x, inst.ctx.observed);
  st.y1 = 0.3 * gaussian_tensor(dims, rng);
  for (const auto& cp : inst.ctx.couplings)
    st.extra.push_back(gaussian_matrix(cp.matrix.cols(), cfg.ranks[cp.mode], rng));
  return inst;
}

double check_lagrangian_gradient(const SolverContext& ctx, const SolverState& state, Variable v) {
  const std::vector<double> analytic = grad_lagrangian_wrt(ctx, state, v);
  if (v.kind == Variable::z)
    return compare_fd(state, v, analytic,
                      [&](const SolverState& s) { return loss_value(ctx, s.z); });
  return compare_fd(state, v, analytic,
                    [&](const SolverState& s) { return smooth_lagrangian(ctx, s); });
}

double check_lower_gradient(const SolverContext& ctx, const SolverState& state, Variable v) {
  const LowerGradients g = lower_gradients(ctx, state);
  std::vector<double> analytic;
  if (v.kind == Variable::xhat) {
    analytic = flat(g.xhat);
  } else if (v.kind == Variable::factor) {
    analytic = flat(g.factors.at(v.index));
  } else {
    throw ShapeError("lower gradients exist for Xhat and factors only");
  }
  return compare_fd(state, v, analytic,
                    [&](const SolverState& s) { return lower_objective(ctx, s); });
}

GradcheckReport run_solver_gradcheck(std::uint64_t seed, std::size_t instances) {
  std::map<std::string, double> worst;
  for (std::size_t i = 0; i < instances; ++i) {
    const GradcheckInstance inst = random_instance(seed * 1000 + i);
    for (const Variable& v : all_variables(inst.ctx)) {
      const std::string key = "lagrangian/" + v.name();
      worst[key] = std::max(worst[key], check_lagrangian_gradient(inst.ctx, inst.state, v));
      if (v.kind == Variable::xhat || v.kind == Variable::factor) {
        const std::string lkey = "lower/" + v.name();
        worst[lkey] = std::max(worst[lkey], check_lower_gradient(inst.ctx, inst.state, v));
      }
    }
  }
  GradcheckReport report;
  report.instances = instances;
  for (const auto& [name, err] : worst) {
    report.errors.push_back({name, err});
    report.max_error = std::max(report.max_error, err);
  }
  return report;
}

KempfNessReport run_kempf_ness_check(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DenseTensor> xs{gaussian_tensor({4, 4, 4}, rng), gaussian_tensor({4, 4, 4}, rng)};
  KempfNessReport report;

  // Directional derivative 2 tr(E C_j) against a central difference.
  for (std::size_t j = 0; j < 3; ++j) {
    RealMatrix e = gaussian_matrix(4, 4, rng);
    e.diagonal().array() -= e.trace() / 4.0;
    RealMatrix c = RealMatrix::Zero(4, 4);
    for (const auto& x : xs) c += contract_except(x, x, j);
    const double analytic = 2.0 * (e * c).trace();
    const double h = 1e-5;
    auto phi = [&](double t) {
      std::vector<DenseTensor> moved;
      for (const auto& x : xs) moved.push_back(mode_product(x, special_linear_path(e, t), j));
      return total_sq(moved);
    };
    const double fd = (phi(h) - phi(-h)) / (2.0 * h);
    report.derivative_error =
        std::max(report.derivative_error, std::abs(fd - analytic) / std::max(std::abs(fd), 1e-12));
  }

  const CoordinateChangeResult r = normalize_coordinates(xs, 1e-15, 5000);
  report.sweeps = r.sweeps;
  report.stationarity = kempf_ness_gradient(r.normalized);
  return report;
}

}  // namespace tenrec
