#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tenrec {

using RealMatrix = Eigen::MatrixXd;
using Dims = std::vector<std::size_t>;

// Invalid shapes, modes or arguments supplied by the caller.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical breakdown: non-finite values, failed factorizations.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankDeficiencyError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ConditioningError : public NumericError {
 public:
  using NumericError::NumericError;
};

std::size_t product(const Dims& dims);
std::string dims_string(const Dims& dims);

// K-way dense array, row-major (last index fastest).
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Dims dims);
  DenseTensor(Dims dims, std::vector<double> values);

  const Dims& dims() const { return dims_; }
  std::size_t order() const { return dims_.size(); }
  std::size_t dim(std::size_t mode) const { return dims_.at(mode); }
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const double* data() const { return values_.data(); }
  double* data() { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::size_t linear_index(std::span<const std::size_t> idx) const;
  std::vector<std::size_t> multi_index(std::size_t linear) const;
  double at(std::span<const std::size_t> idx) const { return values_[linear_index(idx)]; }
  double& at(std::span<const std::size_t> idx) { return values_[linear_index(idx)]; }

  bool all_finite() const;

  DenseTensor& operator+=(const DenseTensor& o);
  DenseTensor& operator-=(const DenseTensor& o);
  DenseTensor& operator*=(double s);

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  Dims dims_;
  std::vector<double> values_;
};

DenseTensor operator+(DenseTensor a, const DenseTensor& b);
DenseTensor operator-(DenseTensor a, const DenseTensor& b);
DenseTensor operator*(double s, DenseTensor a);

// Set of observed cells, stored as sorted unique linear indices.
class ObservationMask {
 public:
  ObservationMask() = default;
  ObservationMask(Dims dims, const std::vector<std::vector<std::size_t>>& tuples);
  static ObservationMask from_linear(Dims dims, std::vector<std::size_t> linear);
  static ObservationMask full(Dims dims);

  const Dims& dims() const { return dims_; }
  std::size_t count() const { return linear_.size(); }
  bool empty() const { return linear_.empty(); }
  const std::vector<std::size_t>& linear() const { return linear_; }
  std::vector<std::vector<std::size_t>> tuples() const;
  bool contains(std::size_t linear) const;
  ObservationMask complement() const;
  // One byte per cell, 1 when observed.
  std::vector<unsigned char> bitmap() const;

  friend bool operator==(const ObservationMask&, const ObservationMask&) = default;

 private:
  Dims dims_;
  std::vector<std::size_t> linear_;
};

struct TuckerModel {
  DenseTensor core;
  std::vector<RealMatrix> factors;  // factor l is N_l x n_l
};

// Mode-l matricization: rows index i_l, remaining modes ordered with
// mode 0 fastest, i.e. Z_(l) = V_l G_(l) (V_{K-1} x ... x V_0, skipping l)^T.
RealMatrix unfold(const DenseTensor& x, std::size_t mode);
DenseTensor fold(const RealMatrix& m, std::size_t mode, const Dims& dims);

DenseTensor mode_product(const DenseTensor& x, const RealMatrix& m, std::size_t mode);
// Same as mode_product with m^T, without forming the transpose.
DenseTensor mode_product_t(const DenseTensor& x, const RealMatrix& m, std::size_t mode);

// x times mats[k] along every mode k, skipping `skip` when it is a valid mode.
DenseTensor multi_mode_product(const DenseTensor& x, const std::vector<RealMatrix>& mats,
                               std::size_t skip = static_cast<std::size_t>(-1));
DenseTensor multi_mode_product_t(const DenseTensor& x, const std::vector<RealMatrix>& mats,
                                 std::size_t skip = static_cast<std::size_t>(-1));

// a_(l) b_(l)^T for tensors that agree in every mode except l.
RealMatrix contract_except(const DenseTensor& a, const DenseTensor& b, std::size_t mode);

RealMatrix kron(const RealMatrix& a, const RealMatrix& b);
// mats[K-1] x ... x mats[0] with mode `skip` left out.
RealMatrix kron_descending(const std::vector<RealMatrix>& mats,
                           std::size_t skip = static_cast<std::size_t>(-1));

double frobenius_norm(const DenseTensor& x);
double squared_norm(const DenseTensor& x);
double inner(const DenseTensor& a, const DenseTensor& b);

DenseTensor tucker_reconstruct(const TuckerModel& model);
TuckerModel hosvd(const DenseTensor& x, const std::vector<std::size_t>& ranks);

// Number of OpenMP threads honoring TENREC_THREADS.
int worker_threads();

}  // namespace tenrec
