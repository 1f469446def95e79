#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nlos/conic_model.hpp"
#include "nlos/geometry.hpp"
#include "nlos/sdp_solver.hpp"

namespace nlos {

enum class Formulation { kFullSdp, kEsdp };
enum class AnchorVariant { kKnown, kUncertain };

const char* to_string(Formulation f);
const char* to_string(AnchorVariant v);
Formulation formulation_from_string(const std::string& text);
AnchorVariant anchor_variant_from_string(const std::string& text);

struct EstimatorConfig {
  Formulation formulation = Formulation::kEsdp;
  AnchorVariant variant = AnchorVariant::kKnown;
  CoefficientMode mode = CoefficientMode::kMidpointConsistent;
  NoiseBoundPolicy noise_policy = NoiseBoundPolicy::sigma_multiple(3.0);
  double sigma = 0.01;  // LOS noise std used by sigma-multiple policies
  SolverSettings solver;
  bool refine = false;
  int refine_iterations = 500;
};

// Sensors are ids 1..n_sensors; anchors carry ids n_sensors+1.. in `anchors`.
struct LocalizationInput {
  int n_sensors = 0;
  AnchorMap anchors;  // known positions, or prior estimates for uncertain anchors
  std::vector<AnchorPrior> priors;
  std::vector<RangeMeasurement> measurements;
  // Bypasses bound derivation when set (one entry per measurement, same order).
  std::optional<std::vector<DistanceBounds>> bounds;
  std::map<NodeId, Point2> truth;  // optional sensor ground truth
};

struct SolverSummary {
  SolveStatus status = SolveStatus::kOptimal;
  double objective_value = 0.0;
  double duality_gap = 0.0;
  double equality_residual_inf_norm = 0.0;
  double min_block_eigenvalue = 0.0;
  int iterations = 0;
  double seconds = 0.0;
  std::vector<std::string> messages;
};

struct EstimationReport {
  std::map<NodeId, Point2> positions;         // sensors
  std::map<NodeId, Point2> anchor_estimates;  // uncertain-anchors variant only
  std::map<NodeId, double> per_sensor_sq_error;
  std::optional<double> mse;
  // Y_ii - ||x_i||^2 per sensor; zero when the lift is exact.
  std::map<NodeId, double> lift_gap;
  SolverSummary solver;
  std::vector<DistanceBounds> bounds;
  std::vector<DistanceBounds> inconsistent_edges;
  std::optional<double> refine_objective_before;
  std::optional<double> refine_objective_after;
  EstimatorConfig config;
};

// X-block read-out: node k is (Z[0, k+1], Z[1, k+1]) for every node with a Z column.
std::map<NodeId, Point2> extract_positions(const Solution& solution, const ConicProblem& problem);

// Sum of w * ((r - l)^2 + (r - u)^2) over edges; positions indexed by node id.
double refine_objective(const std::map<NodeId, Point2>& positions, const std::vector<DistanceBounds>& bounds,
                        const std::vector<double>& weights);
// Gradient w.r.t. every node in `positions`. Coincident endpoints use the unit
// vector (1, 0) as the direction of increasing distance.
std::map<NodeId, Point2> refine_gradient(const std::map<NodeId, Point2>& positions,
                                         const std::vector<DistanceBounds>& bounds,
                                         const std::vector<double>& weights);

// Gradient descent with Armijo backtracking; nodes in `fixed` do not move.
std::map<NodeId, Point2> refine(const std::map<NodeId, Point2>& initial, const std::vector<DistanceBounds>& bounds,
                                const std::vector<double>& weights, int iterations,
                                const std::vector<NodeId>& fixed = {});

EstimationReport localize(const LocalizationInput& input, const EstimatorConfig& config);

}  // namespace nlos
