#include "nlos/conic_model.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <utility>

#include "nlos/error.hpp"

namespace nlos {

const char* to_string(CoefficientMode mode) {
  return mode == CoefficientMode::kPaperLiteral ? "paper-literal" : "midpoint-consistent";
}

CoefficientMode coefficient_mode_from_string(const std::string& text) {
  if (text == "paper" || text == "paper-literal") return CoefficientMode::kPaperLiteral;
  if (text == "midpoint" || text == "midpoint-consistent") return CoefficientMode::kMidpointConsistent;
  throw InvalidInput("unknown coefficient mode '" + text + "'");
}

EdgeCoefficients edge_objective_term(const DistanceBounds& bounds, double weight, CoefficientMode mode) {
  const double width_sum = bounds.lower + bounds.upper;
  const double factor = mode == CoefficientMode::kPaperLiteral ? 2.0 : 1.0;
  return {weight, -weight * factor * width_sum};
}

PsdBlock epigraph_block(VarIndex gamma, VarIndex g) {
  PsdBlock b;
  b.name = "epi";
  b.dim = 2;
  b.set(0, 0, AffineExpr(1.0));
  b.set(0, 1, AffineExpr::variable(g));
  b.set(1, 1, AffineExpr::variable(gamma));
  return b;
}

std::string z_label(int row, int col) {
  if (row > col) std::swap(row, col);
  return "Z[" + std::to_string(row) + "," + std::to_string(col) + "]";
}

std::string gamma_label(NodeId i, NodeId j) {
  return "gamma[" + std::to_string(std::min(i, j)) + "," + std::to_string(std::max(i, j)) + "]";
}

std::string g_label(NodeId i, NodeId j) {
  return "g[" + std::to_string(std::min(i, j)) + "," + std::to_string(std::max(i, j)) + "]";
}

namespace {

enum class Relaxation { kFull, kEdge };

class ModelBuilder {
 public:
  ModelBuilder(int n_sensors, int n_anchors, const ModelOptions& options)
      : n_(n_sensors), m_(n_anchors), dim_(2 + n_sensors + n_anchors), options_(options) {
    if (n_sensors < 0 || n_anchors < 0) throw InvalidInput("negative node count");
    zvars_.assign(static_cast<std::size_t>(dim_) * dim_, -1);
    for (int r = 0; r < dim_; ++r) {
      for (int c = r; c < dim_; ++c) {
        const VarIndex v = problem_.add_variable(z_label(r, c));
        zvars_[r * dim_ + c] = v;
        zvars_[c * dim_ + r] = v;
      }
    }
    problem_.add_equality(AffineExpr::variable(z(0, 0)), 1.0);
    problem_.add_equality(AffineExpr::variable(z(0, 1)), 0.0);
    problem_.add_equality(AffineExpr::variable(z(1, 1)), 1.0);
  }

  VarIndex z(int r, int c) const { return zvars_[r * dim_ + c]; }
  bool is_anchor(NodeId id) const { return id > n_; }
  ConicProblem& problem() { return problem_; }

  void pin_anchor_column(NodeId a, Point2 p) {
    problem_.add_equality(AffineExpr::variable(z(0, z_index(a))), p.x);
    problem_.add_equality(AffineExpr::variable(z(1, z_index(a))), p.y);
  }

  // Known anchors: X columns and anchor-anchor Y entries are fixed to the products of coordinates.
  void pin_anchors(const AnchorMap& anchors) {
    check_anchor_ids(anchors);
    for (const auto& [a, p] : anchors) pin_anchor_column(a, p);
    for (auto it = anchors.begin(); it != anchors.end(); ++it) {
      for (auto jt = it; jt != anchors.end(); ++jt) {
        const double product = it->second.x * jt->second.x + it->second.y * jt->second.y;
        problem_.add_equality(AffineExpr::variable(z(z_index(it->first), z_index(jt->first))), product);
      }
    }
    known_anchors_ = &anchors;
  }

  void add_edges(const std::vector<DistanceBounds>& bounds, Relaxation relaxation) {
    if (bounds.empty()) throw InvalidInput("relaxation needs at least one edge");
    if (!options_.weights.empty() && options_.weights.size() != bounds.size()) {
      throw InvalidInput("weights must match the number of edges");
    }
    if (relaxation == Relaxation::kFull) add_z_block({}, "Z");
    std::set<std::pair<NodeId, NodeId>> seen;
    for (std::size_t e = 0; e < bounds.size(); ++e) {
      const auto& b = bounds[e];
      const NodeId i = std::min(b.i, b.j);
      const NodeId j = std::max(b.i, b.j);
      if (i < 1 || j > n_ + m_ || i == j) {
        throw InvalidInput("edge " + std::to_string(b.i) + "-" + std::to_string(b.j) + " has an unknown node id");
      }
      if (is_anchor(i)) throw InvalidInput("edge " + std::to_string(i) + "-" + std::to_string(j) + " joins two anchors");
      if (!(b.lower >= 0.0) || !(b.upper >= b.lower)) {
        throw InvalidInput("edge " + std::to_string(i) + "-" + std::to_string(j) + " has invalid bounds");
      }
      if (!seen.emplace(i, j).second) {
        throw InvalidInput("duplicate edge " + std::to_string(i) + "-" + std::to_string(j));
      }
      const double w = options_.weights.empty() ? 1.0 : options_.weights[e];
      if (!(w >= 0.0)) throw InvalidInput("negative edge weight");
      touched_.insert(i);
      touched_.insert(j);

      const VarIndex gamma = problem_.add_variable(gamma_label(i, j));
      const VarIndex g = problem_.add_variable(g_label(i, j));
      const auto coeffs = edge_objective_term(b, w, options_.mode);
      problem_.objective().add(gamma, coeffs.gamma).add(g, coeffs.g);

      // gamma = Y_ii + Y_jj - 2 Y_ij
      const int zi = z_index(i);
      const int zj = z_index(j);
      AffineExpr row = AffineExpr::variable(gamma);
      row.add(z(zi, zi), -1.0).add(z(zi, zj), 2.0);
      double rhs = 0.0;
      if (known_anchors_ != nullptr && is_anchor(j)) {
        rhs = squared_norm(known_anchors_->at(j));
      } else {
        row.add(z(zj, zj), -1.0);
      }
      problem_.add_equality(std::move(row), rhs);

      if (relaxation == Relaxation::kEdge) {
        add_z_block({zi, zj}, "Z(0,1," + std::to_string(zi) + "," + std::to_string(zj) + ")");
      }
      auto epi = epigraph_block(gamma, g);
      epi.name = "epi[" + std::to_string(i) + "," + std::to_string(j) + "]";
      problem_.add_block(std::move(epi));
      PsdBlock nonneg;
      nonneg.name = "gpos[" + std::to_string(i) + "," + std::to_string(j) + "]";
      nonneg.dim = 1;
      nonneg.set(0, 0, AffineExpr::variable(g));
      problem_.add_block(std::move(nonneg));
    }
  }

  void add_anchor_priors(const std::vector<AnchorPrior>& priors, Relaxation relaxation) {
    std::map<NodeId, const AnchorPrior*> by_id;
    for (const auto& prior : priors) {
      if (prior.id <= n_ || prior.id > n_ + m_) throw InvalidInput("prior for unknown anchor " + std::to_string(prior.id));
      if (!(prior.radius >= 0.0)) throw InvalidInput("anchor prior radius must be nonnegative");
      if (!prior.estimate.finite()) throw InvalidInput("anchor prior estimate must be finite");
      if (!by_id.emplace(prior.id, &prior).second) throw InvalidInput("duplicate prior for anchor " + std::to_string(prior.id));
    }
    for (NodeId a = n_ + 1; a <= n_ + m_; ++a) {
      if (!by_id.count(a)) throw InvalidInput("missing prior for anchor " + std::to_string(a));
    }
    for (const auto& [a, prior] : by_id) {
      const int za = z_index(a);
      const Point2 est = prior->estimate;
      // Y_aa - 2 <x_a, est>, i.e. ||x_a - est||^2 lifted, minus the constant ||est||^2.
      problem_.objective().add(z(za, za), 1.0).add(z(0, za), -2.0 * est.x).add(z(1, za), -2.0 * est.y);
      if (prior->enforce_ball) {
        if (prior->radius == 0.0) {
          pin_anchor_column(a, est);
          problem_.add_equality(AffineExpr::variable(z(za, za)), squared_norm(est));
        } else {
          // r^2 - (Y_aa - 2 <x_a, est> + ||est||^2) >= 0
          AffineExpr slack(prior->radius * prior->radius - squared_norm(est));
          slack.add(z(za, za), -1.0).add(z(0, za), 2.0 * est.x).add(z(1, za), 2.0 * est.y);
          PsdBlock ball;
          ball.name = "ball[" + std::to_string(a) + "]";
          ball.dim = 1;
          ball.set(0, 0, std::move(slack));
          problem_.add_block(std::move(ball));
        }
      }
      // An anchor without edges would otherwise leave its column unconstrained.
      if (relaxation == Relaxation::kEdge && !touched_.count(a)) {
        add_z_block({za}, "Z(0,1," + std::to_string(za) + ")");
      }
    }
  }

 private:
  void check_anchor_ids(const AnchorMap& anchors) const {
    if (static_cast<int>(anchors.size()) != m_) throw InvalidInput("anchor count mismatch");
    for (const auto& [a, p] : anchors) {
      if (a <= n_ || a > n_ + m_) throw InvalidInput("anchor id " + std::to_string(a) + " outside n+1..n+m");
      if (!p.finite()) throw InvalidInput("anchor " + std::to_string(a) + " has a non-finite position");
    }
  }

  // Principal submatrix of Z on rows {0, 1} + extra (all when extra is empty and name is "Z").
  void add_z_block(std::vector<int> extra, std::string name) {
    std::vector<int> rows{0, 1};
    if (extra.empty()) {
      for (int r = 2; r < dim_; ++r) rows.push_back(r);
    } else {
      std::sort(extra.begin(), extra.end());
      rows.insert(rows.end(), extra.begin(), extra.end());
    }
    PsdBlock block;
    block.name = std::move(name);
    block.dim = static_cast<int>(rows.size());
    for (int a = 0; a < block.dim; ++a) {
      for (int b = a; b < block.dim; ++b) block.set(a, b, AffineExpr::variable(z(rows[a], rows[b])));
    }
    problem_.add_block(std::move(block));
  }

  int n_;
  int m_;
  int dim_;
  const ModelOptions& options_;
  ConicProblem problem_;
  std::vector<VarIndex> zvars_;
  const AnchorMap* known_anchors_ = nullptr;
  std::set<NodeId> touched_;
};

int count_anchors_from_priors(const std::vector<AnchorPrior>& priors) { return static_cast<int>(priors.size()); }

}  // namespace

ConicProblem build_fullsdp(const std::vector<DistanceBounds>& bounds, const AnchorMap& anchors, int n_sensors,
                           const ModelOptions& options) {
  ModelBuilder builder(n_sensors, static_cast<int>(anchors.size()), options);
  builder.pin_anchors(anchors);
  builder.add_edges(bounds, Relaxation::kFull);
  return std::move(builder.problem());
}

ConicProblem build_esdp(const std::vector<DistanceBounds>& bounds, const AnchorMap& anchors, int n_sensors,
                        const ModelOptions& options) {
  ModelBuilder builder(n_sensors, static_cast<int>(anchors.size()), options);
  builder.pin_anchors(anchors);
  builder.add_edges(bounds, Relaxation::kEdge);
  return std::move(builder.problem());
}

ConicProblem build_fullsdp_anchor_uncertain(const std::vector<DistanceBounds>& bounds,
                                            const std::vector<AnchorPrior>& priors, int n_sensors,
                                            const ModelOptions& options) {
  ModelBuilder builder(n_sensors, count_anchors_from_priors(priors), options);
  builder.add_edges(bounds, Relaxation::kFull);
  builder.add_anchor_priors(priors, Relaxation::kFull);
  return std::move(builder.problem());
}

ConicProblem build_esdp_anchor_uncertain(const std::vector<DistanceBounds>& bounds,
                                         const std::vector<AnchorPrior>& priors, int n_sensors,
                                         const ModelOptions& options) {
  ModelBuilder builder(n_sensors, count_anchors_from_priors(priors), options);
  builder.add_edges(bounds, Relaxation::kEdge);
  builder.add_anchor_priors(priors, Relaxation::kEdge);
  return std::move(builder.problem());
}

double nonconvex_objective(const std::vector<DistanceBounds>& bounds, std::span<const Point2> positions,
                           const ModelOptions& options) {
  double total = 0.0;
  for (std::size_t e = 0; e < bounds.size(); ++e) {
    const auto& b = bounds[e];
    const double w = options.weights.empty() ? 1.0 : options.weights[e];
    const auto coeffs = edge_objective_term(b, w, options.mode);
    const double r = distance(positions[b.i], positions[b.j]);
    total += coeffs.gamma * r * r + coeffs.g * r;
  }
  return total;
}

std::vector<double> lift_configuration(const ConicProblem& problem, std::span<const Point2> positions) {
  const auto column = [&](int row) -> std::array<double, 2> {
    if (row == 0) return {1.0, 0.0};
    if (row == 1) return {0.0, 1.0};
    const Point2 p = positions[row - 1];
    return {p.x, p.y};
  };
  std::vector<double> values(problem.num_vars(), 0.0);
  for (VarIndex v = 0; v < problem.num_vars(); ++v) {
    const std::string& label = problem.label(v);
    int a = 0;
    int b = 0;
    if (std::sscanf(label.c_str(), "Z[%d,%d]", &a, &b) == 2) {
      const auto ca = column(a);
      const auto cb = column(b);
      values[v] = ca[0] * cb[0] + ca[1] * cb[1];
    } else if (std::sscanf(label.c_str(), "gamma[%d,%d]", &a, &b) == 2) {
      const double r = distance(positions[a], positions[b]);
      values[v] = r * r;
    } else if (std::sscanf(label.c_str(), "g[%d,%d]", &a, &b) == 2) {
      values[v] = distance(positions[a], positions[b]);
    } else {
      throw InvalidInput("unrecognized variable label " + label);
    }
  }
  return values;
}

}  // namespace nlos
