#include "tenrec/io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace tenrec {

namespace {

void expect_header(std::istream& is, const std::string& magic) {
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != magic || version != 1)
    throw IoError("expected header '" + magic + " 1'");
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_tensor(std::ostream& os, const DenseTensor& x) {
  os << "dtns 1\n" << x.order() << '\n';
  for (std::size_t k = 0; k < x.order(); ++k) os << (k ? " " : "") << x.dim(k);
  os << '\n';
  const std::size_t row = x.dim(x.order() - 1);
  for (std::size_t i = 0; i < x.size(); ++i)
    os << format_value(x[i]) << ((i + 1) % row == 0 ? '\n' : ' ');
}

DenseTensor read_tensor(std::istream& is) {
  expect_header(is, "dtns");
  std::size_t order = 0;
  if (!(is >> order) || order == 0) throw IoError("bad tensor order");
  Dims dims(order);
  for (auto& d : dims)
    if (!(is >> d)) throw IoError("truncated dims line");
  std::vector<double> values(product(dims));
  for (auto& v : values)
    if (!(is >> v)) throw IoError("truncated tensor values");
  return DenseTensor(std::move(dims), std::move(values));
}

void save_tensor(const std::string& path, const DenseTensor& x) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_tensor(os, x);
  if (!os) throw IoError("write failed: " + path);
}

DenseTensor load_tensor(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return read_tensor(is);
}

void write_mask(std::ostream& os, const ObservationMask& m) {
  os << "dmsk 1\n" << m.count() << '\n';
  for (const auto& t : m.tuples()) {
    for (std::size_t k = 0; k < t.size(); ++k) os << (k ? " " : "") << t[k];
    os << '\n';
  }
}

ObservationMask read_mask(std::istream& is, const Dims& dims) {
  expect_header(is, "dmsk");
  std::size_t count = 0;
  if (!(is >> count)) throw IoError("bad mask count");
  std::vector<std::vector<std::size_t>> tuples(count, std::vector<std::size_t>(dims.size()));
  for (auto& t : tuples)
    for (auto& i : t)
      if (!(is >> i)) throw IoError("truncated mask tuples");
  return ObservationMask(dims, tuples);
}

void save_mask(const std::string& path, const ObservationMask& m) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_mask(os, m);
}

ObservationMask load_mask(const std::string& path, const Dims& dims) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return read_mask(is, dims);
}

DenseTensor matrix_to_tensor(const RealMatrix& m) {
  std::vector<double> v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
  return DenseTensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                     std::move(v));
}

RealMatrix tensor_to_matrix(const DenseTensor& x) {
  if (x.order() != 2) throw ShapeError("expected an order-2 tensor for a matrix");
  RealMatrix m(x.dim(0), x.dim(1));
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t j = 0; j < x.dim(1); ++j) m(i, j) = x[i * x.dim(1) + j];
  return m;
}

void save_matrix(const std::string& path, const RealMatrix& m) {
  save_tensor(path, matrix_to_tensor(m));
}

RealMatrix load_matrix(const std::string& path) { return tensor_to_matrix(load_tensor(path)); }

}  // namespace tenrec
