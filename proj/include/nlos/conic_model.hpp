#pragma once

#include <span>
#include <string>
#include <vector>

#include "nlos/conic_problem.hpp"
#include "nlos/geometry.hpp"

namespace nlos {

// paper-literal keeps the printed factor -2(l+u) on g; midpoint-consistent uses -(l+u),
// whose scalar minimizer over gamma = g^2 is the interval midpoint.
enum class CoefficientMode { kPaperLiteral, kMidpointConsistent };

const char* to_string(CoefficientMode mode);
CoefficientMode coefficient_mode_from_string(const std::string& text);

struct EdgeCoefficients {
  double gamma = 0.0;
  double g = 0.0;
};

EdgeCoefficients edge_objective_term(const DistanceBounds& bounds, double weight, CoefficientMode mode);

// [[1, g], [g, gamma]] >= 0, i.e. gamma >= g^2.
PsdBlock epigraph_block(VarIndex gamma, VarIndex g);

struct AnchorPrior {
  NodeId id = 0;
  Point2 estimate;
  double radius = 0.0;
  bool enforce_ball = false;
};

struct ModelOptions {
  CoefficientMode mode = CoefficientMode::kMidpointConsistent;
  // One weight per bounds entry; empty means unit weights.
  std::vector<double> weights;
};

// Sensors are ids 1..n, anchors n+1..n+m. Z is indexed so that rows 0,1 hold the
// identity corner and node k sits at row k+1.
inline int z_index(NodeId node) { return node + 1; }
std::string z_label(int row, int col);
std::string gamma_label(NodeId i, NodeId j);
std::string g_label(NodeId i, NodeId j);

ConicProblem build_fullsdp(const std::vector<DistanceBounds>& bounds, const AnchorMap& anchors, int n_sensors,
                           const ModelOptions& options = {});
ConicProblem build_esdp(const std::vector<DistanceBounds>& bounds, const AnchorMap& anchors, int n_sensors,
                        const ModelOptions& options = {});
ConicProblem build_fullsdp_anchor_uncertain(const std::vector<DistanceBounds>& bounds,
                                            const std::vector<AnchorPrior>& priors, int n_sensors,
                                            const ModelOptions& options = {});
ConicProblem build_esdp_anchor_uncertain(const std::vector<DistanceBounds>& bounds,
                                         const std::vector<AnchorPrior>& priors, int n_sensors,
                                         const ModelOptions& options = {});

// Sum over edges of w * (gamma + coeff_g * g) at exact squared distances and distances.
// `positions` is indexed by node id (entry 0 unused).
double nonconvex_objective(const std::vector<DistanceBounds>& bounds, std::span<const Point2> positions,
                           const ModelOptions& options = {});

// Variable assignment of the lifted problem at a realizable configuration:
// Z = [I X; X' X'X], gamma = squared distances, g = distances.
std::vector<double> lift_configuration(const ConicProblem& problem, std::span<const Point2> positions);

}  // namespace nlos
