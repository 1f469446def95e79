// Serial vs OpenMP kernels on the 80-sensor, 18-anchor ESDP problem.
#include <benchmark/benchmark.h>

#include <memory>

#include "nlos/block_kernels.hpp"
#include "nlos/conic_model.hpp"
#include "nlos/presolve.hpp"
#include "nlos/sim.hpp"

namespace {

using namespace nlos;

struct Fixture {
  ReducedProblem reduced;
  std::unique_ptr<KernelPlan> plan;
  Eigen::VectorXd w;
  BlockMatrices x;
  BlockMatrices s_inv;
  std::vector<double> schur;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    const Scenario scenario = paper_scenario(derive_seed(7, 0));
    const auto measurements = measure(scenario, NoiseModel{}, derive_seed(7, 1));
    const auto bounds =
        derive_bounds(measurements, scenario.anchor_map(), NoiseBoundPolicy::sigma_multiple(3.0), 0.01);
    out.reduced = presolve(build_esdp(bounds, scenario.anchor_map(), scenario.n_sensors()));
    out.plan = std::make_unique<KernelPlan>(out.reduced.blocks, out.reduced.num_vars);
    out.w = Eigen::VectorXd::LinSpaced(out.reduced.num_vars, -1.0, 1.0);
    for (const auto& block : out.reduced.blocks) {
      const int d = block.dim();
      Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) * 2.0;
      m += Eigen::MatrixXd::Constant(d, d, 0.1);
      out.x.push_back(m);
      out.s_inv.push_back(m.inverse());
    }
    out.schur.resize(out.plan->schur_size());
    return out;
  }();
  return f;
}

Execution exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::kSerial : Execution::kParallel;
}

void BM_Apply(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::apply(*f.plan, f.w, true, exec_of(state)));
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}

void BM_Adjoint(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::adjoint(*f.plan, f.x, exec_of(state)));
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}

void BM_AssembleSchur(benchmark::State& state) {
  auto& f = const_cast<Fixture&>(fixture());
  for (auto _ : state) {
    kernels::assemble_schur(*f.plan, f.x, f.s_inv, f.schur, exec_of(state));
    benchmark::ClobberMemory();
  }
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}

void BM_MaxStep(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::max_step(f.x, f.s_inv, exec_of(state)));
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}

BENCHMARK(BM_Apply)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Adjoint)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_AssembleSchur)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MaxStep)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
