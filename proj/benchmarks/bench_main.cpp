#include <benchmark/benchmark.h>

#include "affect_sdt/harness.hpp"
#include "affect_sdt/rng.hpp"
#include "affect_sdt/stats.hpp"
#include "affect_sdt/transport.hpp"

using namespace affect_sdt;

namespace {

Eigen::VectorXd masses(Rng& rng, int n) {
  Eigen::VectorXd v(n);
  for (auto& x : v) x = rng.uniform() + 1e-3;
  return v / v.sum();
}

void BM_Transport(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  TransportProblem p;
  p.source = masses(rng, n);
  p.target = masses(rng, n);
  p.cost = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return rng.uniform(); });
  for (auto _ : state) benchmark::DoNotOptimize(solve_transport(p).cost);
}
BENCHMARK(BM_Transport)->Arg(4)->Arg(16)->Arg(64);

void BM_PermTestRho(benchmark::State& state) {
  Rng rng(2);
  std::vector<double> x(200), y(200);
  for (auto& v : x) v = rng.normal();
  for (auto& v : y) v = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(perm_test_rho(x, y, state.range(0), Tail::OneGreater, 3).p);
  }
}
BENCHMARK(BM_PermTestRho)->Arg(1000)->Arg(10000);

void BM_Wilcoxon(benchmark::State& state) {
  Rng rng(4);
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (auto& v : x) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(wilcoxon_signed_rank(x, 0.0, Tail::Two).p);
}
BENCHMARK(BM_Wilcoxon)->Arg(20)->Arg(200);

void BM_NestedLoocv(benchmark::State& state) {
  const auto ds = load_trials_file(std::string(AFFECT_SDT_FIXTURE_DIR) + "/toy_trials.csv");
  const auto grid = expand_grid(default_original_grid());
  const EmbeddingRegistry reg(builtin_template("zh"));
  HarnessOptions o;
  o.n_perm = 100;
  o.cache = false;
  o.jobs = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(nested_loocv(ds, grid, reg, o).rho);
}
BENCHMARK(BM_NestedLoocv)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
