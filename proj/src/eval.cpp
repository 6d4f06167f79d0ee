#include "tenrec/eval.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "tenrec/linalg.hpp"

namespace tenrec {

namespace {

void check_pair(const DenseTensor& x, const DenseTensor& xt) {
  if (x.dims() != xt.dims()) throw ShapeError("evaluation tensors differ in dims");
}

void sums_over(const DenseTensor& x, const DenseTensor& xt, const ObservationMask* support,
               double& diff, double& ref, std::size_t& count) {
  check_pair(x, xt);
  diff = ref = 0.0;
  auto add = [&](std::size_t i) {
    const double d = x[i] - xt[i];
    diff += d * d;
    ref += x[i] * x[i];
  };
  if (support) {
    if (support->dims() != x.dims()) throw ShapeError("support dims differ from tensor dims");
    for (auto i : support->linear()) add(i);
    count = support->count();
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) add(i);
    count = x.size();
  }
}

double fit_impl(const DenseTensor& x, const DenseTensor& xt, const ObservationMask* support) {
  double diff, ref;
  std::size_t count;
  sums_over(x, xt, support, diff, ref, count);
  if (ref == 0.0) throw NumericError("fit: reference tensor has zero norm on the support");
  return 1.0 - std::sqrt(diff) / std::sqrt(ref);
}

double rse_impl(const DenseTensor& x, const DenseTensor& xt, const ObservationMask* support) {
  double diff, ref;
  std::size_t count;
  sums_over(x, xt, support, diff, ref, count);
  if (count == 0) throw ShapeError("rse: empty support");
  return std::sqrt(diff / static_cast<double>(count));
}

}  // namespace

double fit(const DenseTensor& x, const DenseTensor& xt) { return fit_impl(x, xt, nullptr); }
double fit(const DenseTensor& x, const DenseTensor& xt, const ObservationMask& support) {
  return fit_impl(x, xt, &support);
}
double rse(const DenseTensor& x, const DenseTensor& xt) { return rse_impl(x, xt, nullptr); }
double rse(const DenseTensor& x, const DenseTensor& xt, const ObservationMask& support) {
  return rse_impl(x, xt, &support);
}

ObservationMask mask_random(const Dims& dims, double observe_rate, std::uint64_t seed) {
  if (!(observe_rate > 0.0 && observe_rate <= 1.0))
    throw ShapeError("observe rate must lie in (0,1]");
  const std::size_t total = product(dims);
  const auto count = static_cast<std::size_t>(std::ceil(observe_rate * static_cast<double>(total)));
  std::vector<std::size_t> cells(total);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  const std::size_t take = std::min(count, total);
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(cells[i], cells[pick(rng)]);
  }
  cells.resize(take);
  return ObservationMask::from_linear(dims, std::move(cells));
}

EvalSupport parse_eval_support(const std::string& name) {
  if (name == "all") return EvalSupport::all;
  if (name == "observed") return EvalSupport::observed;
  if (name == "missing") return EvalSupport::missing;
  throw ShapeError("unknown evaluation support '" + name + "'");
}

ObservationMask support_cells(EvalSupport support, const ObservationMask& mask) {
  switch (support) {
    case EvalSupport::all: return ObservationMask::full(mask.dims());
    case EvalSupport::observed: return mask;
    case EvalSupport::missing: return mask.complement();
  }
  return mask;
}

DenseTensor random_lowrank(const Dims& dims, const std::vector<std::size_t>& ranks,
                           std::uint64_t seed) {
  if (ranks.size() != dims.size()) throw ShapeError("random_lowrank: need one rank per mode");
  Rng rng(seed);
  TuckerModel m;
  m.core = gaussian_tensor(Dims(ranks.begin(), ranks.end()), rng);
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (ranks[k] < 1 || ranks[k] > dims[k]) throw ShapeError("random_lowrank: rank out of range");
    m.factors.push_back(random_orthogonal(static_cast<Eigen::Index>(dims[k]), rng).leftCols(ranks[k]));
  }
  DenseTensor x = tucker_reconstruct(m);
  x *= std::sqrt(static_cast<double>(x.size())) / frobenius_norm(x);
  return x;
}

DenseTensor pin_observed(const DenseTensor& model, const DenseTensor& x,
                         const std::vector<unsigned char>& observed) {
  DenseTensor out = model;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (observed[i]) out[i] = x[i];
  return out;
}

}  // namespace tenrec
