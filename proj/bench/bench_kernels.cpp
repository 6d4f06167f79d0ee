#include <benchmark/benchmark.h>

#include <random>

#include "tenrec/reference.hpp"
#include "tenrec/tensor.hpp"

namespace {

tenrec::DenseTensor make_tensor(std::size_t n) {
  std::mt19937_64 g(1);
  std::normal_distribution<double> d;
  tenrec::DenseTensor x({n, n, n});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = d(g);
  return x;
}

tenrec::RealMatrix make_matrix(std::size_t r, std::size_t c) {
  std::mt19937_64 g(2);
  std::normal_distribution<double> d;
  tenrec::RealMatrix m(r, c);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = d(g);
  return m;
}

void BM_ModeProductParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = make_tensor(n);
  const auto m = make_matrix(n, n);
  for (auto _ : state) benchmark::DoNotOptimize(tenrec::mode_product(x, m, 1));
}

void BM_ModeProductSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = make_tensor(n);
  const auto m = make_matrix(n, n);
  for (auto _ : state) benchmark::DoNotOptimize(tenrec::reference::mode_product(x, m, 1));
}

void BM_ContractParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = make_tensor(n);
  for (auto _ : state) benchmark::DoNotOptimize(tenrec::contract_except(x, x, 1));
}

void BM_ContractSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = make_tensor(n);
  for (auto _ : state) benchmark::DoNotOptimize(tenrec::reference::contract_except(x, x, 1));
}

}  // namespace

BENCHMARK(BM_ModeProductParallel)->Arg(30)->Arg(60);
BENCHMARK(BM_ModeProductSerial)->Arg(30)->Arg(60);
BENCHMARK(BM_ContractParallel)->Arg(30)->Arg(60);
BENCHMARK(BM_ContractSerial)->Arg(30)->Arg(60);

BENCHMARK_MAIN();
