#include "tenrec/coupled.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <regex>
#include <sstream>

#include "tenrec/cp.hpp"
#include "tenrec/io.hpp"
#include "tenrec/linalg.hpp"

namespace tenrec {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::size_t> parse_numbers(const std::string& text) {
  std::vector<std::size_t> out;
  std::string cleaned = text;
  for (auto& ch : cleaned)
    if (ch == ',' || ch == '[' || ch == ']' || ch == '{' || ch == '}') ch = ' ';
  std::istringstream is(cleaned);
  long long v;
  while (is >> v) {
    if (v < 0) throw ShapeError("negative value in '" + text + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (!is.eof()) throw ShapeError("cannot parse numbers in '" + text + "'");
  return out;
}

void validate(const CoupledSpec& spec) {
  if (spec.sizes.empty()) throw ShapeError("coupled spec: no sizes");
  for (auto s : spec.sizes)
    if (s == 0) throw ShapeError("coupled spec: sizes must be positive");
  if (spec.modes.empty() || spec.modes[0].empty())
    throw ShapeError("coupled spec: the first mode list must name the tensor's sizes");
  std::vector<int> used(spec.sizes.size(), 0);
  for (auto m : spec.modes[0]) {
    if (m < 1 || m > spec.sizes.size()) throw ShapeError("coupled spec: size index out of range");
    if (used[m - 1]++) throw ShapeError("coupled spec: tensor modes must be distinct");
  }
  std::vector<int> shared(spec.sizes.size(), 0);
  for (std::size_t c = 1; c < spec.modes.size(); ++c) {
    const auto& l = spec.modes[c];
    if (l.size() != 2) throw ShapeError("coupled spec: matrix lists need exactly two entries");
    if (l[0] < 1 || l[0] > spec.sizes.size() || l[1] < 1 || l[1] > spec.sizes.size())
      throw ShapeError("coupled spec: size index out of range");
    if (!used[l[0] - 1]) throw ShapeError("coupled spec: shared size is not a tensor mode");
    if (used[l[1] - 1]) throw ShapeError("coupled spec: matrix size must not be a tensor mode");
    if (shared[l[0] - 1]++) throw ShapeError("coupled spec: each tensor mode couples at most once");
  }
  if (spec.rank < 1) throw ShapeError("coupled spec: rank must be positive");
  if (!(spec.noise >= 0.0)) throw ShapeError("coupled spec: noise must be nonnegative");
}

template <class T>
void add_noise(T& data, double level, Rng& rng, double norm) {
  if (level == 0.0 || norm == 0.0) return;
  std::normal_distribution<double> nd;
  double nn = 0.0;
  std::vector<double> draws;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(data.size()); ++i) {
    draws.push_back(nd(rng));
    nn += draws.back() * draws.back();
  }
  const double scale = level * norm / std::sqrt(nn);
  auto* ptr = data.data();
  for (std::size_t i = 0; i < draws.size(); ++i) ptr[i] += scale * draws[i];
}

RealMatrix normalized_columns(RealMatrix m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double n = m.col(c).norm();
    if (n > 0.0) m.col(c) /= n;
  }
  return m;
}

}  // namespace

std::vector<std::vector<std::size_t>> parse_mode_lists(const std::string& text) {
  std::vector<std::vector<std::size_t>> out;
  const std::string t = trim(text);
  if (t.find('[') != std::string::npos) {
    const std::regex group(R"(\[([^\]]*)\])");
    for (auto it = std::sregex_iterator(t.begin(), t.end(), group); it != std::sregex_iterator();
         ++it)
      out.push_back(parse_numbers((*it)[1].str()));
  } else {
    std::istringstream is(t);
    std::string part;
    while (std::getline(is, part, ';'))
      if (!trim(part).empty()) out.push_back(parse_numbers(part));
  }
  if (out.empty()) throw ShapeError("no mode lists in '" + text + "'");
  return out;
}

CoupledSpec parse_coupled_spec(std::istream& is) {
  CoupledSpec spec;
  bool have_sizes = false, have_modes = false;
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw ShapeError("coupled spec: expected 'key: value' in '" + line + "'");
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    if (key == "sizes") {
      spec.sizes = parse_numbers(value);
      have_sizes = true;
    } else if (key == "modes") {
      spec.modes = parse_mode_lists(value);
      have_modes = true;
    } else if (key == "rank") {
      spec.rank = std::stoul(value);
    } else if (key == "noise") {
      spec.noise = std::stod(value);
    } else if (key == "seed") {
      spec.seed = std::stoull(value);
    } else {
      throw ShapeError("coupled spec: unknown key '" + key + "'");
    }
  }
  if (!have_sizes || !have_modes) throw ShapeError("coupled spec: sizes and modes are required");
  validate(spec);
  return spec;
}

CoupledSpec load_coupled_spec(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return parse_coupled_spec(is);
}

CoupledProblem create_coupled(const CoupledSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  std::vector<RealMatrix> truth;
  for (auto n : spec.sizes)
    truth.push_back(normalized_columns(gaussian_matrix(n, spec.rank, rng)));

  CoupledProblem p;
  Dims dims;
  std::vector<RealMatrix> tensor_factors;
  for (auto m : spec.modes[0]) {
    p.tensor_sizes.push_back(m - 1);
    dims.push_back(spec.sizes[m - 1]);
    tensor_factors.push_back(truth[m - 1]);
  }
  CpModel cp{tensor_factors, Eigen::VectorXd::Ones(spec.rank)};
  p.clean_tensor = cp_reconstruct(cp, dims);
  p.tensor = p.clean_tensor;
  add_noise(p.tensor, spec.noise, rng, frobenius_norm(p.clean_tensor));

  for (std::size_t c = 1; c < spec.modes.size(); ++c) {
    const std::size_t shared = spec.modes[c][0] - 1, own = spec.modes[c][1] - 1;
    std::size_t mode = 0;
    while (p.tensor_sizes[mode] != shared) ++mode;
    const RealMatrix clean = truth[shared] * truth[own].transpose();
    RealMatrix noisy = clean;
    add_noise(noisy, spec.noise, rng, clean.norm());
    p.clean_matrices.push_back(clean);
    p.couplings.push_back(Coupling{noisy, mode, 1.0});
    p.matrix_sizes.push_back(own);
  }
  p.mask = ObservationMask::full(dims);
  p.ground_truth = std::move(truth);
  return p;
}

CoupledSolution coupled_solve(const CoupledProblem& p, const SolverConfig& config) {
  const SolverContext ctx = make_context(p.tensor, p.mask, std::nullopt, config, p.couplings);
  SolveResult r = solve(ctx);
  CoupledSolution sol;
  sol.tucker = std::move(r.model);
  sol.extra_factors = r.state.extra;
  sol.trace = std::move(r.trace);
  sol.iters = sol.trace.records.empty() ? 0 : sol.trace.records.back().iter;
  for (std::size_t c = 0; c < p.couplings.size(); ++c) {
    const auto& cp = p.couplings[c];
    const RealMatrix fit = sol.tucker.factors[cp.mode] * sol.extra_factors[c].transpose();
    const double n = cp.matrix.norm();
    sol.matrix_residuals.push_back(n > 0.0 ? (cp.matrix - fit).norm() / n : (cp.matrix - fit).norm());
  }
  return sol;
}

double reconstruction_error(const CoupledSolution& sol, const CoupledProblem& p) {
  if (!p.ground_truth) throw ShapeError("reconstruction_error: problem has no ground truth");
  auto rel = [](double err, double ref) { return ref > 0.0 ? err / ref : err; };
  const DenseTensor est = tucker_reconstruct(sol.tucker);
  double total = rel(frobenius_norm(est - p.clean_tensor), frobenius_norm(p.clean_tensor));
  for (std::size_t c = 0; c < p.couplings.size(); ++c) {
    const RealMatrix m = sol.tucker.factors[p.couplings[c].mode] * sol.extra_factors[c].transpose();
    total += rel((m - p.clean_matrices[c]).norm(), p.clean_matrices[c].norm());
  }
  return total / static_cast<double>(1 + p.couplings.size());
}

double factor_congruence(const RealMatrix& est, const RealMatrix& truth) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols())
    throw ShapeError("factor_congruence: shapes differ");
  if (truth.cols() == 0) return 1.0;
  const RealMatrix cosines = (normalized_columns(truth).transpose() * normalized_columns(est)).cwiseAbs();
  const RealMatrix cost = RealMatrix::Ones(cosines.rows(), cosines.cols()) - cosines;
  const auto assign = min_cost_assignment(cost);
  double s = 0.0;
  for (std::size_t i = 0; i < assign.size(); ++i) s += cosines(i, assign[i]);
  return s / static_cast<double>(truth.cols());
}

double coupled_congruence(const CoupledSolution& sol, const CoupledProblem& p) {
  if (!p.ground_truth) throw ShapeError("coupled_congruence: problem has no ground truth");
  const auto& truth = *p.ground_truth;
  const std::size_t rank = truth.front().cols();
  const auto& core = sol.tucker.core;
  for (std::size_t k = 0; k < core.order(); ++k)
    if (core.dim(k) < rank) throw ShapeError("coupled_congruence: core smaller than the true rank");
  const CpModel cp = cp_decompose(core, rank);
  std::vector<RealMatrix> est;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < core.order(); ++k) {
    est.push_back(sol.tucker.factors[k] * cp.factors[k]);
    total += factor_congruence(est[k], truth[p.tensor_sizes[k]]);
    ++count;
  }
  for (std::size_t c = 0; c < p.couplings.size(); ++c) {
    // M ~ V U^T = (V A)(A^+ U^T) for the recovered shared factor V A.
    const RealMatrix& shared = est[p.couplings[c].mode];
    const RealMatrix model = sol.tucker.factors[p.couplings[c].mode] * sol.extra_factors[c].transpose();
    const RealMatrix own = shared.completeOrthogonalDecomposition().solve(model).transpose();
    total += factor_congruence(own, truth[p.matrix_sizes[c]]);
    ++count;
  }
  return total / static_cast<double>(count);
}

}  // namespace tenrec
