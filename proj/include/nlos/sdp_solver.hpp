#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nlos/block_kernels.hpp"
#include "nlos/conic_problem.hpp"

namespace nlos {

struct SolverSettings {
  double gap_tol = 1e-7;   // relative: |p - d| / (1 + |p| + |d|)
  double feas_tol = 1e-7;
  int max_iters = 200;
  int verbosity = 0;
  // Receives one line per iteration when verbosity > 0.
  std::ostream* log = nullptr;
  Execution execution = Execution::kParallel;

  void validate() const;
};

enum class SolveStatus { kOptimal, kMaxIters, kInfeasibleDetected, kNumericalFailure };
const char* to_string(SolveStatus status);

// Lagrange multipliers for the original equalities and blocks.
struct DualValues {
  std::vector<double> equality_multipliers;
  std::vector<Eigen::MatrixXd> block_duals;
};

struct Solution {
  SolveStatus status = SolveStatus::kNumericalFailure;
  std::vector<double> primal_values;
  double objective_value = 0.0;
  double dual_objective = 0.0;
  double duality_gap = 0.0;  // relative, see SolverSettings::gap_tol
  double equality_residual_inf_norm = 0.0;
  double min_block_eigenvalue = 0.0;
  int iterations = 0;
  // Present unless presolve restricted a block to a face of its cone.
  std::optional<DualValues> dual;
  std::vector<std::string> messages;
};

// Primal-dual path-following (HKM direction, Mehrotra predictor-corrector) on the
// presolved block-diagonal problem. Deterministic for fixed inputs and settings,
// independent of the execution policy.
Solution solve(const ConicProblem& problem, const SolverSettings& settings = {});

struct KktReport {
  double equality_residual_inf_norm = 0.0;
  double min_block_eigenvalue = 0.0;
  double primal_objective = 0.0;
  bool has_dual = false;
  double dual_objective = 0.0;
  // Recomputed from the dual values when present, otherwise the solver's figure.
  double duality_gap = 0.0;
  double stationarity_residual_inf_norm = 0.0;
  double min_dual_block_eigenvalue = 0.0;
  double objective_scale = 0.0;  // largest objective coefficient magnitude

  // Stationarity is compared against feas_tol * (1 + objective_scale).

  bool within(double gap_tol, double feas_tol) const;
};

// Recomputes residuals directly from the problem data and the reported values.
KktReport check_kkt(const ConicProblem& problem, const Solution& solution);

}  // namespace nlos
