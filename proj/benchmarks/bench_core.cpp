// Timings for the hot paths: the spectral correction against its dense
// equivalent, the decomposition itself, and the composite workflows.
#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <random>

#include "deridge/inference.hpp"
#include "deridge/screening.hpp"
#include "deridge/spectral.hpp"
#include "deridge/tradeoff.hpp"

using namespace deridge;

namespace {

struct Instance {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

Instance make_instance(int n, int p) {
  std::mt19937_64 gen(1000003ull * n + p);
  std::normal_distribution<double> dist(0.0, 1.0);
  Instance inst;
  inst.x.resize(n, p);
  inst.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) inst.x(i, j) = dist(gen);
    inst.y(i) = dist(gen);
  }
  return inst;
}

// Literal accumulation sum_j lambda^j (X'X + lambda I)^{-(j+1)} X'y, the
// textbook form the spectral path replaces.
Eigen::VectorXd debias_dense(const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& y, double lambda, int k) {
  const Eigen::Index p = x.cols();
  const Eigen::MatrixXd gram =
      x.transpose() * x + lambda * Eigen::MatrixXd::Identity(p, p);
  const Eigen::LDLT<Eigen::MatrixXd> solver(gram);
  Eigen::VectorXd term = solver.solve(x.transpose() * y);
  Eigen::VectorXd acc = term;
  for (int j = 1; j <= k; ++j) {
    term = lambda * solver.solve(term);
    acc += term;
  }
  return acc;
}

void bm_decompose(benchmark::State& state) {
  const Instance inst =
      make_instance(int(state.range(0)), int(state.range(1)));
  for (auto _ : state)
    benchmark::DoNotOptimize(decompose(inst.x, inst.y));
}

void bm_debias_spectral(benchmark::State& state) {
  const Instance inst =
      make_instance(int(state.range(0)), int(state.range(1)));
  const SpectralCache cache = decompose(inst.x, inst.y);
  const double lambda = 0.3 * state.range(0);
  const int k = int(state.range(2));
  for (auto _ : state)
    benchmark::DoNotOptimize(debias(cache, {lambda, IterSpec::fixed(k)}));
}

void bm_debias_dense(benchmark::State& state) {
  const Instance inst =
      make_instance(int(state.range(0)), int(state.range(1)));
  const double lambda = 0.3 * state.range(0);
  const int k = int(state.range(2));
  for (auto _ : state)
    benchmark::DoNotOptimize(debias_dense(inst.x, inst.y, lambda, k));
}

void bm_covariance(benchmark::State& state) {
  const Instance inst =
      make_instance(int(state.range(0)), int(state.range(1)));
  const SpectralCache cache = decompose(inst.x, inst.y);
  const double lambda = 0.3 * state.range(0);
  for (auto _ : state)
    benchmark::DoNotOptimize(covariance_debiased(
        cache, lambda, 100, CovarianceModel::homoskedastic(1.0)));
}

void bm_screen_two_stage(benchmark::State& state) {
  const Instance inst =
      make_instance(int(state.range(0)), int(state.range(1)));
  const SpectralCache cache = decompose(inst.x, inst.y);
  const double lambda = 0.1 * state.range(0);
  for (auto _ : state) {
    const ScreeningSelection sel = screen(inst.x, inst.y, cache, lambda,
                                          IterSpec::fixed(100), 40);
    benchmark::DoNotOptimize(two_stage_fit(sel, IterSpec::fixed(1), lambda));
  }
}

void bm_mse_curve(benchmark::State& state) {
  const Instance inst =
      make_instance(int(state.range(0)), int(state.range(1)));
  const SpectralCache cache = decompose(inst.x, inst.y);
  Eigen::VectorXd beta(inst.x.cols());
  std::mt19937_64 gen(9);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (Eigen::Index j = 0; j < beta.size(); ++j) beta(j) = dist(gen);
  const double lambda = 0.3 * state.range(0);
  for (auto _ : state)
    benchmark::DoNotOptimize(mse_curve(cache, beta, lambda, 1.0, 200));
}

}  // namespace

BENCHMARK(bm_decompose)
    ->Args({100, 20})
    ->Args({400, 80})
    ->Args({200, 300})
    ->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_debias_spectral)
    ->Args({100, 20, 100})
    ->Args({400, 80, 100})
    ->Args({400, 80, 1000})
    ->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_debias_dense)
    ->Args({100, 20, 100})
    ->Args({400, 80, 100})
    ->Args({400, 80, 1000})
    ->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_covariance)
    ->Args({400, 80})
    ->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_screen_two_stage)
    ->Args({120, 300})
    ->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_mse_curve)
    ->Args({200, 50})
    ->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
