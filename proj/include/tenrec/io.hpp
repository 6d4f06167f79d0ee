#pragma once

#include <iosfwd>
#include <string>

#include "tenrec/tensor.hpp"

namespace tenrec {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// DTNS v1: "dtns 1", K, dims, then row-major values.
void write_tensor(std::ostream& os, const DenseTensor& x);
DenseTensor read_tensor(std::istream& is);
void save_tensor(const std::string& path, const DenseTensor& x);
DenseTensor load_tensor(const std::string& path);

// DMSK v1: "dmsk 1", count, then one 0-based tuple per line. Dims come from
// the tensor the mask belongs to.
void write_mask(std::ostream& os, const ObservationMask& m);
ObservationMask read_mask(std::istream& is, const Dims& dims);
void save_mask(const std::string& path, const ObservationMask& m);
ObservationMask load_mask(const std::string& path, const Dims& dims);

// Matrices travel as order-2 DTNS files.
DenseTensor matrix_to_tensor(const RealMatrix& m);
RealMatrix tensor_to_matrix(const DenseTensor& x);
void save_matrix(const std::string& path, const RealMatrix& m);
RealMatrix load_matrix(const std::string& path);

}  // namespace tenrec
