#include <benchmark/benchmark.h>

#include <advplace/control.hpp>
#include <advplace/gramian.hpp>
#include <advplace/transfer.hpp>

using namespace advplace;

namespace {

const Domain kSquare{-1, 1, -1, 1};

TransferOperator rotation_operator(std::size_t n) {
  const auto f = analytic_field("rotation", kSquare, 33, 33);
  BuildOptions o;
  o.samples_per_cell = 25;
  o.seed = 1;
  return build_operator(f, build_partition(kSquare, n, n), 0.05, o);
}

void BM_BuildOperator(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto f = analytic_field("saddle", kSquare, 33, 33, BoundaryPolicy::absorb);
  const auto p = build_partition(kSquare, n, n);
  BuildOptions o;
  o.samples_per_cell = 25;
  o.threads = static_cast<unsigned>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(build_operator(f, p, 0.05, o));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(p.size() * 25));
}
BENCHMARK(BM_BuildOperator)->Args({32, 1})->Args({64, 1})->Args({64, 4})->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_ApplyPF(benchmark::State& state) {
  const auto op = rotation_operator(static_cast<std::size_t>(state.range(0)));
  Eigen::VectorXd rho = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(op.size()));
  for (auto _ : state) {
    rho = pf_step(op, rho);
    benchmark::DoNotOptimize(rho.data());
  }
}
BENCHMARK(BM_ApplyPF)->Arg(64)->Arg(128)->Arg(256);

void BM_FiniteGramian(benchmark::State& state) {
  const auto op = rotation_operator(64);
  const auto B = rect_to_cellset(op.partition(), Domain{0.2, 0.6, -0.2, 0.2});
  const auto K = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(controllability_gramian(op, B, K));
}
BENCHMARK(BM_FiniteGramian)->Arg(50)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_ExactControl(benchmark::State& state) {
  const auto op = rotation_operator(24);
  const auto& p = op.partition();
  const auto B = rect_to_cellset(p, Domain{0.2, 0.6, -0.2, 0.2});
  const auto T = rect_to_cellset(p, Domain{0.0, 0.2, 0.3, 0.5});
  const std::size_t K = 20;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        min_energy_control(op, ScalarField(p), indicator(T), B, K,
                           {.method = ControlMethod::exact, .min_rcond = 0.0}));
  }
}
BENCHMARK(BM_ExactControl)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
