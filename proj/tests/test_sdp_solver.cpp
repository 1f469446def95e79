#include <gtest/gtest.h>

#include <chrono>
#include <cstring>
#include <random>
#include <sstream>

#include "nlos/conic_model.hpp"
#include "nlos/error.hpp"
#include "nlos/sdp_solver.hpp"
#include "oracles.hpp"

namespace nlos {
namespace {

// minimize t  s.t. [[t, 1], [1, t]] >= 0
ConicProblem t_star_problem() {
  ConicProblem p;
  const VarIndex t = p.add_variable("t");
  p.objective().add(t, 1.0);
  PsdBlock b;
  b.name = "T";
  b.dim = 2;
  b.set(0, 0, AffineExpr::variable(t));
  b.set(0, 1, AffineExpr(1.0));
  b.set(1, 1, AffineExpr::variable(t));
  p.add_block(std::move(b));
  return p;
}

// minimize trace(M) over 2x2 PSD M with M01 fixed to 1
ConicProblem trace_problem() {
  ConicProblem p;
  const VarIndex a = p.add_variable("m00");
  const VarIndex b = p.add_variable("m01");
  const VarIndex c = p.add_variable("m11");
  p.objective().add(a, 1.0).add(c, 1.0);
  p.add_equality(AffineExpr::variable(b), 1.0);
  PsdBlock m;
  m.name = "M";
  m.dim = 2;
  m.set(0, 0, AffineExpr::variable(a));
  m.set(0, 1, AffineExpr::variable(b));
  m.set(1, 1, AffineExpr::variable(c));
  p.add_block(std::move(m));
  return p;
}

TEST(SdpSolver, TStarProblem) {
  const auto p = t_star_problem();
  const auto sol = solve(p);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal);
  EXPECT_NEAR(sol.objective_value, 1.0, 1e-6);
  EXPECT_NEAR(sol.primal_values[0], 1.0, 1e-6);
  const auto kkt = check_kkt(p, sol);
  EXPECT_TRUE(kkt.has_dual);
  EXPECT_TRUE(kkt.within(1e-7, 1e-7));
  EXPECT_LE(kkt.stationarity_residual_inf_norm, 1e-7);
}

TEST(SdpSolver, TraceMinimization) {
  const auto p = trace_problem();
  const auto sol = solve(p);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal);
  EXPECT_NEAR(sol.objective_value, 2.0, 1e-6);
  EXPECT_NEAR(sol.primal_values[0], 1.0, 1e-5);
  EXPECT_NEAR(sol.primal_values[2], 1.0, 1e-5);
  const auto kkt = check_kkt(p, sol);
  EXPECT_TRUE(kkt.within(1e-7, 1e-7));
  EXPECT_LE(kkt.stationarity_residual_inf_norm, 1e-7);
}

TEST(SdpSolver, SingleSensorZeroWidthRecovery) {
  AnchorMap anchors{{2, {0, 0}}, {3, {10, 0}}, {4, {0, 10}}};
  const Point2 truth{3, 4};
  std::vector<DistanceBounds> bounds;
  for (const auto& [id, a] : anchors) {
    const double r = distance(truth, a);
    bounds.push_back({1, id, r, r, true});
  }
  const auto p = build_fullsdp(bounds, anchors, 1);
  std::ostringstream log;
  SolverSettings settings;
  settings.verbosity = 1;
  settings.log = &log;
  const auto sol = solve(p, settings);
  EXPECT_EQ(log.str().rfind("iter   0 pobj", 0), 0u);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal);
  EXPECT_NEAR(sol.primal_values[p.at(z_label(0, 2))], 3.0, 1e-3);
  EXPECT_NEAR(sol.primal_values[p.at(z_label(1, 2))], 4.0, 1e-3);
}

TEST(CheckKkt, HandBuiltPointAndPerturbation) {
  const auto p = t_star_problem();
  Solution sol;
  sol.primal_values = {1.0};
  auto kkt = check_kkt(p, sol);
  EXPECT_EQ(kkt.equality_residual_inf_norm, 0.0);
  EXPECT_NEAR(kkt.min_block_eigenvalue, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(kkt.primal_objective, 1.0);
  EXPECT_FALSE(kkt.has_dual);
  sol.primal_values = {1.0 - 1e-3};
  kkt = check_kkt(p, sol);
  EXPECT_NEAR(kkt.min_block_eigenvalue, -1e-3, 1e-15);

  const auto q = trace_problem();
  Solution at_opt;
  at_opt.primal_values = {1.0, 1.0 + 1e-3, 1.0};
  kkt = check_kkt(q, at_opt);
  EXPECT_NEAR(kkt.equality_residual_inf_norm, 1e-3, 1e-15);
}

TEST(CheckKkt, RejectsWrongSize) {
  Solution sol;
  sol.primal_values = {1.0, 2.0};
  EXPECT_THROW(check_kkt(t_star_problem(), sol), InvalidInput);
}

TEST(SdpSolver, StatusPaths) {
  SolverSettings few;
  few.max_iters = 2;
  const auto capped = solve(trace_problem(), few);
  EXPECT_EQ(capped.status, SolveStatus::kMaxIters);
  EXPECT_EQ(capped.primal_values.size(), 3u);

  auto contradictory = trace_problem();
  contradictory.add_equality(AffineExpr::variable(1), 2.0);
  EXPECT_EQ(solve(contradictory).status, SolveStatus::kInfeasibleDetected);

  SolverSettings bad;
  bad.gap_tol = 0.0;
  EXPECT_THROW(solve(trace_problem(), bad), InvalidInput);
  bad = {};
  bad.max_iters = 0;
  EXPECT_THROW(solve(trace_problem(), bad), InvalidInput);
}

struct Instance {
  int n = 0;
  AnchorMap anchors;
  std::map<NodeId, Point2> truth;
  std::vector<DistanceBounds> bounds;
};

// Noisy §IV-style ranges with geometric bounds; sensor pairs optional.
Instance noisy_instance(std::uint64_t seed, int n, int m, bool sensor_pairs = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> c(-20, 20), bias(0, 0.5);
  std::normal_distribution<double> noise(0, 0.01);
  Instance inst;
  inst.n = n;
  for (int k = 1; k <= n + m; ++k) inst.truth[k] = {c(rng), c(rng)};
  for (int a = n + 1; a <= n + m; ++a) inst.anchors[a] = inst.truth[a];
  std::vector<RangeMeasurement> ms;
  for (int i = 1; i <= n; ++i) {
    for (int j = i + 1; j <= n + m; ++j) {
      if (!sensor_pairs && j <= n) continue;
      const double d = distance(inst.truth[i], inst.truth[j]) + noise(rng) + bias(rng);
      ms.push_back({i, j, std::max(d, 1e-6), EdgeKind::kUnknown});
    }
  }
  inst.bounds = derive_bounds(ms, inst.anchors, NoiseBoundPolicy::sigma_multiple(3), 0.01);
  return inst;
}

TEST(SdpSolver, OneSensorValueBelowGridOracle) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Instance inst = noisy_instance(seed, 1, 3);
    const auto p = build_fullsdp(inst.bounds, inst.anchors, 1);
    const auto sol = solve(p);
    ASSERT_EQ(sol.status, SolveStatus::kOptimal);
    auto positions = inst.truth;
    const auto grid = oracle::grid_search_one_sensor(
        [&](Point2 q) {
          positions[1] = q;
          return oracle::placement_objective(inst.bounds, positions, false);
        },
        -20, 20, -20, 20, 0.01);
    EXPECT_LE(sol.objective_value, grid.value + 1e-6 * (1 + std::abs(grid.value)));
  }
}

TEST(SdpSolver, ThreeSensorValueBelowLocalSearchOracle) {
  for (std::uint64_t seed : {4, 5}) {
    const Instance inst = noisy_instance(seed, 3, 3);
    const auto sol = solve(build_fullsdp(inst.bounds, inst.anchors, 3));
    ASSERT_EQ(sol.status, SolveStatus::kOptimal);
    const auto f = [&](const std::map<NodeId, Point2>& x) { return oracle::placement_objective(inst.bounds, x, false); };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> c(-20, 20);
    double best = f(inst.truth);
    for (int start = 0; start < 8; ++start) {
      auto x = inst.truth;
      for (NodeId i = 1; i <= 3; ++i) x[i] = {c(rng), c(rng)};
      best = std::min(best, f(oracle::compass_search(f, x, {1, 2, 3}, 4.0, 1e-4)));
    }
    EXPECT_LE(sol.objective_value, best + 1e-6 * (1 + std::abs(best)));
  }
}

TEST(SdpSolver, ObjectiveScalingLeavesArgminUnchanged) {
  const Instance inst = noisy_instance(6, 3, 4);
  const auto p = build_esdp(inst.bounds, inst.anchors, 3);
  ConicProblem scaled = p;
  for (auto& t : scaled.objective().terms) t.coeff *= 10.0;
  const auto a = solve(p), b = solve(scaled);
  ASSERT_EQ(a.status, SolveStatus::kOptimal);
  ASSERT_EQ(b.status, SolveStatus::kOptimal);
  EXPECT_NEAR(b.objective_value, 10.0 * a.objective_value, 1e-6 * std::abs(b.objective_value));
  for (NodeId i = 1; i <= 3; ++i) {
    for (int r : {0, 1}) {
      const VarIndex v = p.at(z_label(r, z_index(i)));
      EXPECT_NEAR(a.primal_values[v], b.primal_values[v], 1e-4);
    }
  }
}

TEST(SdpSolver, DeterministicAcrossRunsAndExecutionPolicies) {
  const Instance inst = noisy_instance(7, 6, 4);
  const auto p = build_esdp(inst.bounds, inst.anchors, 6);
  SolverSettings serial;
  serial.execution = Execution::kSerial;
  const auto a = solve(p), b = solve(p), c = solve(p, serial);
  for (const auto* other : {&b, &c}) {
    EXPECT_EQ(a.iterations, other->iterations);
    EXPECT_EQ(std::memcmp(a.primal_values.data(), other->primal_values.data(), sizeof(double) * a.primal_values.size()), 0);
    EXPECT_EQ(a.objective_value, other->objective_value);
    EXPECT_EQ(a.duality_gap, other->duality_gap);
  }
}

TEST(SdpSolver, OptimalSolutionsPassIndependentCheck) {
  for (std::uint64_t seed : {8, 9}) {
    const Instance inst = noisy_instance(seed, 4, 4);
    for (const auto& p : {build_fullsdp(inst.bounds, inst.anchors, 4), build_esdp(inst.bounds, inst.anchors, 4)}) {
      const auto sol = solve(p);
      ASSERT_EQ(sol.status, SolveStatus::kOptimal);
      const auto kkt = check_kkt(p, sol);
      EXPECT_LE(kkt.equality_residual_inf_norm, 1e-7);
      EXPECT_GE(kkt.min_block_eigenvalue, -1e-7);
      EXPECT_NEAR(kkt.primal_objective, sol.objective_value, 1e-9 * (1 + std::abs(sol.objective_value)));
    }
  }
}

TEST(SdpSolver, PaperScaleEsdpPassesIndependentCheck) {
  const Instance inst = noisy_instance(10, 80, 18);
  ASSERT_EQ(inst.bounds.size(), 4600u);
  const auto p = build_esdp(inst.bounds, inst.anchors, 80);
  const auto sol = solve(p);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal);
  const auto kkt = check_kkt(p, sol);
  EXPECT_LE(kkt.equality_residual_inf_norm, 1e-7);
  EXPECT_GE(kkt.min_block_eigenvalue, -1e-7);
  EXPECT_LE(kkt.duality_gap, 1e-7);
}

double seconds_per_iteration(const ConicProblem& p) {
  double best = 1e300;
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sol = solve(p);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_EQ(sol.status, SolveStatus::kOptimal);
    best = std::min(best, s / std::max(1, sol.iterations));
  }
  return best;
}

TEST(SdpSolver, EsdpIterationCostScalesLinearlyInBlocks) {
  // Sensor-anchor edges only, so doubling the sensors doubles the blocks.
  const Instance small = noisy_instance(11, 150, 8, false);
  const Instance large = noisy_instance(11, 300, 8, false);
  const auto ps = build_esdp(small.bounds, small.anchors, 150);
  const auto pl = build_esdp(large.bounds, large.anchors, 300);
  const double ts = seconds_per_iteration(ps), tl = seconds_per_iteration(pl);
  RecordProperty("per_iteration_ratio", std::to_string(tl / ts));
  EXPECT_LT(tl / ts, 3.0);
}

}  // namespace
}  // namespace nlos
