#include "tenrec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include <omp.h>

namespace tenrec {

namespace {

constexpr std::size_t kNoMode = static_cast<std::size_t>(-1);
// Below this many multiply-adds a kernel stays on the calling thread.
constexpr std::size_t kParallelWork = 1 << 15;

void check_mode(const Dims& dims, std::size_t mode, const char* where) {
  if (mode >= dims.size()) {
    throw ShapeError(std::string(where) + ": mode " + std::to_string(mode) +
                     " out of range for order " + std::to_string(dims.size()));
  }
}

void check_dims(const Dims& dims) {
  if (dims.empty()) throw ShapeError("tensor order must be at least 1");
  for (auto d : dims)
    if (d == 0) throw ShapeError("tensor dims must be positive, got " + dims_string(dims));
}

struct Split {
  std::size_t outer = 1, n = 1, inner = 1;
};

Split split_at(const Dims& dims, std::size_t mode) {
  Split s;
  for (std::size_t k = 0; k < mode; ++k) s.outer *= dims[k];
  s.n = dims[mode];
  for (std::size_t k = mode + 1; k < dims.size(); ++k) s.inner *= dims[k];
  return s;
}

// Column offsets contributed by the outer block (modes < l) and inner block
// (modes > l) under the unfolding convention.
void column_offsets(const Dims& dims, std::size_t mode, std::vector<std::size_t>& outer,
                    std::vector<std::size_t>& inner) {
  const Split s = split_at(dims, mode);
  std::vector<std::size_t> stride(dims.size(), 0);
  std::size_t acc = 1;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (k == mode) continue;
    stride[k] = acc;
    acc *= dims[k];
  }
  outer.assign(s.outer, 0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::size_t rem = o, off = 0;
    for (std::size_t k = mode; k-- > 0;) {
      off += (rem % dims[k]) * stride[k];
      rem /= dims[k];
    }
    outer[o] = off;
  }
  inner.assign(s.inner, 0);
  for (std::size_t in = 0; in < s.inner; ++in) {
    std::size_t rem = in, off = 0;
    for (std::size_t k = dims.size(); k-- > mode + 1;) {
      off += (rem % dims[k]) * stride[k];
      rem /= dims[k];
    }
    inner[in] = off;
  }
}

template <bool Transposed>
DenseTensor mode_product_impl(const DenseTensor& x, const RealMatrix& m, std::size_t mode) {
  check_mode(x.dims(), mode, "mode_product");
  const std::size_t cols = Transposed ? m.rows() : m.cols();
  const std::size_t rows = Transposed ? m.cols() : m.rows();
  if (cols != x.dim(mode)) {
    throw ShapeError("mode_product: matrix has " + std::to_string(cols) + " columns, mode " +
                     std::to_string(mode) + " has size " + std::to_string(x.dim(mode)));
  }
  if (rows == 0) throw ShapeError("mode_product: matrix with zero rows");
  Dims out_dims = x.dims();
  out_dims[mode] = rows;
  DenseTensor y(out_dims);
  const Split s = split_at(x.dims(), mode);
  const std::size_t work = s.outer * rows * s.n * s.inner;
  const long long tasks = static_cast<long long>(s.outer * rows);
  const double* xs = x.data();
  double* ys = y.data();
#pragma omp parallel for schedule(static) if (work > kParallelWork) num_threads(worker_threads())
  for (long long t = 0; t < tasks; ++t) {
    const std::size_t o = static_cast<std::size_t>(t) / rows;
    const std::size_t r = static_cast<std::size_t>(t) % rows;
    double* yrow = ys + (o * rows + r) * s.inner;
    for (std::size_t j = 0; j < s.n; ++j) {
      const double c = Transposed ? m(j, r) : m(r, j);
      const double* xrow = xs + (o * s.n + j) * s.inner;
      for (std::size_t in = 0; in < s.inner; ++in) yrow[in] += c * xrow[in];
    }
  }
  return y;
}

}  // namespace

std::size_t product(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string dims_string(const Dims& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t k = 0; k < dims.size(); ++k) os << (k ? "," : "") << dims[k];
  os << ']';
  return os.str();
}

int worker_threads() {
  static const int n = [] {
    int cap = omp_get_max_threads();
    if (const char* env = std::getenv("TENREC_THREADS")) {
      int v = std::atoi(env);
      if (v > 0) cap = std::min(cap, v);
    }
    return std::max(cap, 1);
  }();
  return n;
}

DenseTensor::DenseTensor(Dims dims) : dims_(std::move(dims)) {
  check_dims(dims_);
  values_.assign(product(dims_), 0.0);
}

DenseTensor::DenseTensor(Dims dims, std::vector<double> values)
    : dims_(std::move(dims)), values_(std::move(values)) {
  check_dims(dims_);
  if (values_.size() != product(dims_)) {
    throw ShapeError("tensor with dims " + dims_string(dims_) + " needs " +
                     std::to_string(product(dims_)) + " values, got " +
                     std::to_string(values_.size()));
  }
  if (!all_finite()) throw NumericError("tensor values must be finite");
}

std::size_t DenseTensor::linear_index(std::span<const std::size_t> idx) const {
  if (idx.size() != dims_.size()) throw ShapeError("index arity does not match tensor order");
  std::size_t lin = 0;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    if (idx[k] >= dims_[k]) throw ShapeError("index out of bounds");
    lin = lin * dims_[k] + idx[k];
  }
  return lin;
}

std::vector<std::size_t> DenseTensor::multi_index(std::size_t linear) const {
  std::vector<std::size_t> idx(dims_.size());
  for (std::size_t k = dims_.size(); k-- > 0;) {
    idx[k] = linear % dims_[k];
    linear /= dims_[k];
  }
  return idx;
}

bool DenseTensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& o) {
  if (o.dims_ != dims_) throw ShapeError("tensor sum with mismatched dims");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

DenseTensor& DenseTensor::operator-=(const DenseTensor& o) {
  if (o.dims_ != dims_) throw ShapeError("tensor difference with mismatched dims");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}

DenseTensor& DenseTensor::operator*=(double s) {
  for (auto& v : values_) v *= s;
  return *this;
}

DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
DenseTensor operator*(double s, DenseTensor a) { return a *= s; }

ObservationMask::ObservationMask(Dims dims, const std::vector<std::vector<std::size_t>>& tuples)
    : dims_(std::move(dims)) {
  check_dims(dims_);
  linear_.reserve(tuples.size());
  for (const auto& t : tuples) {
    if (t.size() != dims_.size()) throw ShapeError("mask tuple arity does not match tensor order");
    std::size_t lin = 0;
    for (std::size_t k = 0; k < dims_.size(); ++k) {
      if (t[k] >= dims_[k]) throw ShapeError("mask tuple out of bounds");
      lin = lin * dims_[k] + t[k];
    }
    linear_.push_back(lin);
  }
  std::sort(linear_.begin(), linear_.end());
  if (std::adjacent_find(linear_.begin(), linear_.end()) != linear_.end())
    throw ShapeError("mask contains duplicate tuples");
}

ObservationMask ObservationMask::from_linear(Dims dims, std::vector<std::size_t> linear) {
  check_dims(dims);
  const std::size_t total = product(dims);
  std::sort(linear.begin(), linear.end());
  if (std::adjacent_find(linear.begin(), linear.end()) != linear.end())
    throw ShapeError("mask contains duplicate cells");
  if (!linear.empty() && linear.back() >= total) throw ShapeError("mask cell out of bounds");
  ObservationMask m;
  m.dims_ = std::move(dims);
  m.linear_ = std::move(linear);
  return m;
}

ObservationMask ObservationMask::full(Dims dims) {
  std::vector<std::size_t> all(product(dims));
  std::iota(all.begin(), all.end(), std::size_t{0});
  return from_linear(std::move(dims), std::move(all));
}

std::vector<std::vector<std::size_t>> ObservationMask::tuples() const {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(linear_.size());
  for (auto lin : linear_) {
    std::vector<std::size_t> idx(dims_.size());
    for (std::size_t k = dims_.size(); k-- > 0;) {
      idx[k] = lin % dims_[k];
      lin /= dims_[k];
    }
    out.push_back(std::move(idx));
  }
  return out;
}

bool ObservationMask::contains(std::size_t linear) const {
  return std::binary_search(linear_.begin(), linear_.end(), linear);
}

ObservationMask ObservationMask::complement() const {
  const auto bits = bitmap();
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (!bits[i]) rest.push_back(i);
  return from_linear(dims_, std::move(rest));
}

std::vector<unsigned char> ObservationMask::bitmap() const {
  std::vector<unsigned char> bits(product(dims_), 0);
  for (auto lin : linear_) bits[lin] = 1;
  return bits;
}

RealMatrix unfold(const DenseTensor& x, std::size_t mode) {
  check_mode(x.dims(), mode, "unfold");
  const Split s = split_at(x.dims(), mode);
  std::vector<std::size_t> outer, inner;
  column_offsets(x.dims(), mode, outer, inner);
  RealMatrix m(s.n, s.outer * s.inner);
  const double* xs = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.n; ++i) {
      const double* row = xs + (o * s.n + i) * s.inner;
      for (std::size_t in = 0; in < s.inner; ++in) m(i, outer[o] + inner[in]) = row[in];
    }
  return m;
}

DenseTensor fold(const RealMatrix& m, std::size_t mode, const Dims& dims) {
  check_dims(dims);
  check_mode(dims, mode, "fold");
  const Split s = split_at(dims, mode);
  if (static_cast<std::size_t>(m.rows()) != s.n ||
      static_cast<std::size_t>(m.cols()) != s.outer * s.inner) {
    throw ShapeError("fold: matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " does not match dims " + dims_string(dims) + " at mode " +
                     std::to_string(mode));
  }
  std::vector<std::size_t> outer, inner;
  column_offsets(dims, mode, outer, inner);
  DenseTensor x(dims);
  double* xs = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.n; ++i) {
      double* row = xs + (o * s.n + i) * s.inner;
      for (std::size_t in = 0; in < s.inner; ++in) row[in] = m(i, outer[o] + inner[in]);
    }
  return x;
}

DenseTensor mode_product(const DenseTensor& x, const RealMatrix& m, std::size_t mode) {
  return mode_product_impl<false>(x, m, mode);
}

DenseTensor mode_product_t(const DenseTensor& x, const RealMatrix& m, std::size_t mode) {
  return mode_product_impl<true>(x, m, mode);
}

DenseTensor multi_mode_product(const DenseTensor& x, const std::vector<RealMatrix>& mats,
                               std::size_t skip) {
  if (mats.size() != x.order()) throw ShapeError("multi_mode_product: need one matrix per mode");
  DenseTensor y = x;
  for (std::size_t k = 0; k < mats.size(); ++k)
    if (k != skip) y = mode_product(y, mats[k], k);
  return y;
}

DenseTensor multi_mode_product_t(const DenseTensor& x, const std::vector<RealMatrix>& mats,
                                 std::size_t skip) {
  if (mats.size() != x.order()) throw ShapeError("multi_mode_product: need one matrix per mode");
  DenseTensor y = x;
  for (std::size_t k = 0; k < mats.size(); ++k)
    if (k != skip) y = mode_product_t(y, mats[k], k);
  return y;
}

RealMatrix contract_except(const DenseTensor& a, const DenseTensor& b, std::size_t mode) {
  check_mode(a.dims(), mode, "contract_except");
  if (a.order() != b.order()) throw ShapeError("contract_except: order mismatch");
  for (std::size_t k = 0; k < a.order(); ++k)
    if (k != mode && a.dim(k) != b.dim(k))
      throw ShapeError("contract_except: dims differ outside the contracted mode");
  const Split sa = split_at(a.dims(), mode);
  const std::size_t nb = b.dim(mode);
  RealMatrix c = RealMatrix::Zero(sa.n, nb);
  const double* as = a.data();
  const double* bs = b.data();
  const std::size_t work = sa.outer * sa.n * nb * sa.inner;
  const long long tasks = static_cast<long long>(sa.n * nb);
#pragma omp parallel for schedule(static) if (work > kParallelWork) num_threads(worker_threads())
  for (long long t = 0; t < tasks; ++t) {
    const std::size_t i = static_cast<std::size_t>(t) / nb;
    const std::size_t j = static_cast<std::size_t>(t) % nb;
    double acc = 0.0;
    for (std::size_t o = 0; o < sa.outer; ++o) {
      const double* ar = as + (o * sa.n + i) * sa.inner;
      const double* br = bs + (o * nb + j) * sa.inner;
      for (std::size_t in = 0; in < sa.inner; ++in) acc += ar[in] * br[in];
    }
    c(i, j) = acc;
  }
  return c;
}

RealMatrix kron(const RealMatrix& a, const RealMatrix& b) {
  RealMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

RealMatrix kron_descending(const std::vector<RealMatrix>& mats, std::size_t skip) {
  RealMatrix acc = RealMatrix::Ones(1, 1);
  for (std::size_t k = mats.size(); k-- > 0;)
    if (k != skip) acc = kron(acc, mats[k]);
  return acc;
}

double squared_norm(const DenseTensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v * v;
  return s;
}

double frobenius_norm(const DenseTensor& x) { return std::sqrt(squared_norm(x)); }

double inner(const DenseTensor& a, const DenseTensor& b) {
  if (a.dims() != b.dims()) throw ShapeError("inner: dims mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

DenseTensor tucker_reconstruct(const TuckerModel& model) {
  const auto& g = model.core;
  if (model.factors.size() != g.order())
    throw ShapeError("tucker_reconstruct: need one factor per core mode");
  for (std::size_t k = 0; k < g.order(); ++k)
    if (static_cast<std::size_t>(model.factors[k].cols()) != g.dim(k))
      throw ShapeError("tucker_reconstruct: factor " + std::to_string(k) +
                       " columns do not match core dim");
  return multi_mode_product(g, model.factors);
}

TuckerModel hosvd(const DenseTensor& x, const std::vector<std::size_t>& ranks) {
  if (ranks.size() != x.order()) throw ShapeError("hosvd: need one rank per mode");
  TuckerModel model;
  for (std::size_t k = 0; k < x.order(); ++k) {
    const std::size_t n = x.dim(k);
    if (ranks[k] < 1 || ranks[k] > n)
      throw ShapeError("hosvd: rank " + std::to_string(ranks[k]) + " out of range for mode " +
                       std::to_string(k) + " of size " + std::to_string(n));
    const std::size_t cols = x.size() / n;
    RealMatrix basis;
    if (cols >= n) {
      const RealMatrix gram = contract_except(x, x, k);
      Eigen::SelfAdjointEigenSolver<RealMatrix> es(gram);
      if (es.info() != Eigen::Success) throw NumericError("hosvd: eigensolver failed");
      basis = es.eigenvectors().rowwise().reverse().leftCols(ranks[k]);
    } else {
      Eigen::BDCSVD<RealMatrix> svd(unfold(x, k), Eigen::ComputeThinU);
      if (svd.info() != Eigen::Success) throw NumericError("hosvd: SVD failed");
      basis = svd.matrixU().leftCols(ranks[k]);
    }
    for (Eigen::Index c = 0; c < basis.cols(); ++c) {
      Eigen::Index arg;
      basis.col(c).cwiseAbs().maxCoeff(&arg);
      if (basis(arg, c) < 0) basis.col(c) *= -1.0;
    }
    model.factors.push_back(std::move(basis));
  }
  model.core = multi_mode_product_t(x, model.factors);
  return model;
}

}  // namespace tenrec
