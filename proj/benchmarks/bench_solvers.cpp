#include <benchmark/benchmark.h>

#include "kktsolve/hykkt.hpp"
#include "kktsolve/lu.hpp"
#include "kktsolve/refine.hpp"
#include "kktsolve/seqgen.hpp"

namespace {

using namespace kktsolve;

// Standard trace, generated once per process.
const BarrierTrace& trace() {
  static const BarrierTrace t = [] {
    const QpModel qp = make_qp(200, 50, 0.02, 42);
    return barrier_sequence(qp, 1.0, 0.1, 9);
  }();
  return t;
}

const TraceSystem& last_system() { return trace().systems.back(); }

void BM_LuFactorize(benchmark::State& state) {
  const CsMatrix& k = last_system().system.K;
  for (auto _ : state) {
    auto f = lu_factorize(k);
    benchmark::DoNotOptimize(f.first.upper_diagonal().data());
  }
}
BENCHMARK(BM_LuFactorize);

void BM_LuRefactorize(benchmark::State& state) {
  auto [factors, diag] = lu_factorize(trace().systems.front().system.K);
  const CsMatrix& k = last_system().system.K;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lu_refactorize(factors, k));
  }
}
BENCHMARK(BM_LuRefactorize);

void BM_LuSolve(benchmark::State& state) {
  const auto& sys = last_system();
  auto [factors, diag] = lu_factorize(sys.system.K);
  const Vector b = sys.rhs.stacked();
  Vector x(b.size());
  for (auto _ : state) {
    lu_solve(factors, b, x);
    benchmark::DoNotOptimize(x.data());
  }
}
BENCHMARK(BM_LuSolve);

void BM_RefineFgmres(benchmark::State& state) {
  auto [factors, diag] = lu_factorize(trace().systems.front().system.K);
  const auto& sys = last_system();
  lu_refactorize(factors, sys.system.K);
  const Vector b = sys.rhs.stacked();
  const Vector x0 = lu_solve(factors, b);
  RefinementConfig cfg;
  cfg.delta_tol = 1e-14;
  cfg.krylov.restart = static_cast<Index>(state.range(0));
  for (auto _ : state) {
    auto r = refine_fgmres(sys.system.K, factors, x0, b, cfg);
    benchmark::DoNotOptimize(r.x.data());
  }
}
BENCHMARK(BM_RefineFgmres)->Arg(10)->Arg(20);

void BM_RefineRichardson(benchmark::State& state) {
  auto [factors, diag] = lu_factorize(trace().systems.front().system.K);
  const auto& sys = last_system();
  lu_refactorize(factors, sys.system.K);
  const Vector b = sys.rhs.stacked();
  const Vector x0 = lu_solve(factors, b);
  RefinementConfig cfg;
  cfg.delta_tol = 1e-14;
  for (auto _ : state) {
    auto r = refine_richardson(sys.system.K, factors, x0, b, cfg);
    benchmark::DoNotOptimize(r.x.data());
  }
}
BENCHMARK(BM_RefineRichardson);

void BM_HykktSetup(benchmark::State& state) {
  const auto& blocks = trace().systems.front().system;
  for (auto _ : state) {
    auto s = HykktSolver::setup(blocks.blocks.H, blocks.blocks.J, blocks.dx_diag);
    benchmark::DoNotOptimize(s.gamma());
  }
}
BENCHMARK(BM_HykktSetup);

void BM_HykktFactorizeSolve(benchmark::State& state) {
  const auto& first = trace().systems.front().system;
  HykktSolver solver = HykktSolver::setup(first.blocks.H, first.blocks.J, first.dx_diag);
  const auto& sys = last_system();
  for (auto _ : state) {
    solver.factorize(sys.system.blocks.H, sys.system.blocks.J, sys.system.dx_diag);
    auto sol = solver.solve(sys.rhs.r_x, sys.rhs.r_lambda);
    benchmark::DoNotOptimize(sol.dx.data());
  }
}
BENCHMARK(BM_HykktFactorizeSolve);

}  // namespace
BENCHMARK_MAIN();
