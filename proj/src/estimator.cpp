#include "nlos/estimator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>

#include "nlos/error.hpp"

namespace nlos {

const char* to_string(Formulation f) { return f == Formulation::kFullSdp ? "fullsdp" : "esdp"; }
const char* to_string(AnchorVariant v) { return v == AnchorVariant::kKnown ? "known" : "uncertain"; }

Formulation formulation_from_string(const std::string& text) {
  if (text == "fullsdp") return Formulation::kFullSdp;
  if (text == "esdp") return Formulation::kEsdp;
  throw InvalidInput("unknown formulation '" + text + "'");
}

AnchorVariant anchor_variant_from_string(const std::string& text) {
  if (text == "known") return AnchorVariant::kKnown;
  if (text == "uncertain") return AnchorVariant::kUncertain;
  throw InvalidInput("unknown anchor variant '" + text + "'");
}

std::map<NodeId, Point2> extract_positions(const Solution& solution, const ConicProblem& problem) {
  if (static_cast<int>(solution.primal_values.size()) != problem.num_vars()) {
    throw InvalidInput("solution does not belong to this problem");
  }
  if (!problem.find(z_label(0, 0))) throw InvalidInput("problem has no lifted Z matrix");
  std::map<NodeId, Point2> out;
  for (int row = 2;; ++row) {
    const auto vx = problem.find(z_label(0, row));
    const auto vy = problem.find(z_label(1, row));
    if (!vx || !vy) break;
    out[row - 1] = {solution.primal_values[*vx], solution.primal_values[*vy]};
  }
  return out;
}

namespace {

double edge_weight(const std::vector<double>& weights, std::size_t e) { return weights.empty() ? 1.0 : weights[e]; }

}  // namespace

double refine_objective(const std::map<NodeId, Point2>& positions, const std::vector<DistanceBounds>& bounds,
                        const std::vector<double>& weights) {
  double total = 0.0;
  for (std::size_t e = 0; e < bounds.size(); ++e) {
    const auto& b = bounds[e];
    const double r = distance(positions.at(b.i), positions.at(b.j));
    total += edge_weight(weights, e) * ((r - b.lower) * (r - b.lower) + (r - b.upper) * (r - b.upper));
  }
  return total;
}

std::map<NodeId, Point2> refine_gradient(const std::map<NodeId, Point2>& positions,
                                         const std::vector<DistanceBounds>& bounds,
                                         const std::vector<double>& weights) {
  std::map<NodeId, Point2> grad;
  for (const auto& [id, p] : positions) grad[id] = {0.0, 0.0};
  for (std::size_t e = 0; e < bounds.size(); ++e) {
    const auto& b = bounds[e];
    const Point2 delta = positions.at(b.i) - positions.at(b.j);
    const double r = norm(delta);
    const Point2 unit = r > 0.0 ? Point2{delta.x / r, delta.y / r} : Point2{1.0, 0.0};
    const double scale = edge_weight(weights, e) * 2.0 * ((r - b.lower) + (r - b.upper));
    grad[b.i] = grad[b.i] + Point2{scale * unit.x, scale * unit.y};
    grad[b.j] = grad[b.j] - Point2{scale * unit.x, scale * unit.y};
  }
  return grad;
}

std::map<NodeId, Point2> refine(const std::map<NodeId, Point2>& initial, const std::vector<DistanceBounds>& bounds,
                                const std::vector<double>& weights, int iterations,
                                const std::vector<NodeId>& fixed) {
  for (const auto& [id, p] : initial) {
    if (!p.finite()) throw InvalidInput("refine needs finite initial positions");
  }
  const std::set<NodeId> pinned(fixed.begin(), fixed.end());
  std::map<NodeId, Point2> x = initial;
  double f = refine_objective(x, bounds, weights);
  double step = 1.0;
  for (int it = 0; it < iterations; ++it) {
    auto grad = refine_gradient(x, bounds, weights);
    double grad_sq = 0.0;
    for (auto& [id, g] : grad) {
      if (pinned.count(id)) g = {0.0, 0.0};
      grad_sq += squared_norm(g);
    }
    if (std::sqrt(grad_sq) <= 1e-10 * (1.0 + std::abs(f))) break;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      std::map<NodeId, Point2> trial = x;
      for (auto& [id, p] : trial) {
        const Point2 g = grad.at(id);
        p = {p.x - step * g.x, p.y - step * g.y};
      }
      const double ft = refine_objective(trial, bounds, weights);
      if (ft <= f - 1e-4 * step * grad_sq) {
        x = std::move(trial);
        f = ft;
        accepted = true;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return x;
}

EstimationReport localize(const LocalizationInput& input, const EstimatorConfig& config) {
  EstimationReport report;
  report.config = config;
  if (input.n_sensors < 0) throw InvalidInput("negative sensor count");
  if (input.n_sensors == 0) return report;
  if (config.variant == AnchorVariant::kUncertain && input.priors.empty()) {
    throw InvalidInput("uncertain-anchors variant requires anchor priors");
  }

  validate_measurements(input.measurements);
  std::vector<DistanceBounds> bounds;
  if (input.bounds) {
    if (input.bounds->size() != input.measurements.size()) {
      throw InvalidInput("explicit bounds must match the measurements one-to-one");
    }
    bounds = *input.bounds;
  } else {
    bounds = derive_bounds(input.measurements, input.anchors, config.noise_policy, config.sigma);
  }
  std::vector<double> weights;
  weights.reserve(input.measurements.size());
  for (const auto& m : input.measurements) weights.push_back(m.weight);
  for (const auto& b : bounds) {
    if (!b.consistent) report.inconsistent_edges.push_back(b);
  }
  report.bounds = bounds;

  ModelOptions options;
  options.mode = config.mode;
  options.weights = weights;
  ConicProblem problem;
  if (config.variant == AnchorVariant::kKnown) {
    problem = config.formulation == Formulation::kFullSdp ? build_fullsdp(bounds, input.anchors, input.n_sensors, options)
                                                          : build_esdp(bounds, input.anchors, input.n_sensors, options);
  } else {
    problem = config.formulation == Formulation::kFullSdp
                  ? build_fullsdp_anchor_uncertain(bounds, input.priors, input.n_sensors, options)
                  : build_esdp_anchor_uncertain(bounds, input.priors, input.n_sensors, options);
  }

  const auto start = std::chrono::steady_clock::now();
  const Solution solution = solve(problem, config.solver);
  report.solver.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.solver.status = solution.status;
  report.solver.objective_value = solution.objective_value;
  report.solver.duality_gap = solution.duality_gap;
  report.solver.equality_residual_inf_norm = solution.equality_residual_inf_norm;
  report.solver.min_block_eigenvalue = solution.min_block_eigenvalue;
  report.solver.iterations = solution.iterations;
  report.solver.messages = solution.messages;

  std::map<NodeId, Point2> nodes = extract_positions(solution, problem);
  for (NodeId i = 1; i <= input.n_sensors; ++i) {
    const VarIndex y = problem.at(z_label(z_index(i), z_index(i)));
    report.lift_gap[i] = solution.primal_values[y] - squared_norm(nodes.at(i));
  }

  if (config.refine) {
    std::vector<NodeId> fixed;
    for (const auto& [id, p] : nodes) {
      if (id > input.n_sensors) fixed.push_back(id);
    }
    report.refine_objective_before = refine_objective(nodes, bounds, weights);
    nodes = refine(nodes, bounds, weights, config.refine_iterations, fixed);
    report.refine_objective_after = refine_objective(nodes, bounds, weights);
  }

  for (const auto& [id, p] : nodes) {
    if (id <= input.n_sensors) {
      report.positions[id] = p;
    } else if (config.variant == AnchorVariant::kUncertain) {
      report.anchor_estimates[id] = p;
    }
  }

  if (!input.truth.empty()) {
    double sum = 0.0;
    for (const auto& [id, p] : report.positions) {
      const auto it = input.truth.find(id);
      if (it == input.truth.end()) throw InvalidInput("truth is missing sensor " + std::to_string(id));
      const double err = squared_norm(p - it->second);
      report.per_sensor_sq_error[id] = err;
      sum += err;
    }
    report.mse = sum / static_cast<double>(report.per_sensor_sq_error.size());
  }
  return report;
}

}  // namespace nlos
