#include "nlos/geometry.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <utility>

#include "nlos/error.hpp"

namespace nlos {

double NoiseBoundPolicy::resolve(double sigma) const {
  const double slack = mode == Mode::kAbsolute ? value : value * sigma;
  if (!(slack > 0.0) || !std::isfinite(slack)) {
    throw InvalidInput("noise bound n^U must be positive, got " + std::to_string(slack));
  }
  return slack;
}

double upper_bound(const RangeMeasurement& measurement, const NoiseBoundPolicy& policy, double sigma) {
  if (!(measurement.distance > 0.0)) {
    throw InvalidInput("range measurement must be positive");
  }
  const double slack = policy.resolve(sigma);
  // A biased NLOS range already overestimates the true distance.
  if (measurement.kind == EdgeKind::kNlosPrior) return measurement.distance;
  return measurement.distance + slack;
}

double pairwise_anchor_lower_bound(Point2 a_j, Point2 a_k, double upper_ik) {
  if (!(upper_ik > 0.0)) throw InvalidInput("upper bound must be positive");
  const double separation = distance(a_j, a_k);
  if (separation == 0.0) throw InvalidInput("coincident anchors");
  return std::max(0.0, separation - upper_ik);
}

void validate_measurements(const std::vector<RangeMeasurement>& measurements) {
  std::set<std::pair<NodeId, NodeId>> seen;
  for (const auto& m : measurements) {
    if (m.i == m.j) throw InvalidInput("self-edge on node " + std::to_string(m.i));
    if (!(m.distance > 0.0) || !std::isfinite(m.distance)) {
      throw InvalidInput("nonpositive distance on edge " + std::to_string(m.i) + "-" + std::to_string(m.j));
    }
    if (!(m.weight >= 0.0) || !std::isfinite(m.weight)) {
      throw InvalidInput("negative weight on edge " + std::to_string(m.i) + "-" + std::to_string(m.j));
    }
    if (!seen.emplace(std::min(m.i, m.j), std::max(m.i, m.j)).second) {
      throw InvalidInput("duplicate edge " + std::to_string(m.i) + "-" + std::to_string(m.j));
    }
  }
}

std::vector<DistanceBounds> derive_bounds(const std::vector<RangeMeasurement>& measurements,
                                          const AnchorMap& anchors, const NoiseBoundPolicy& policy,
                                          double sigma) {
  validate_measurements(measurements);
  const auto is_anchor = [&](NodeId id) { return anchors.count(id) > 0; };

  std::vector<DistanceBounds> out(measurements.size());
  // sensor -> (anchor, edge index) for every sensor-anchor edge
  std::map<NodeId, std::vector<std::pair<NodeId, std::size_t>>> anchor_edges;
  for (std::size_t e = 0; e < measurements.size(); ++e) {
    const auto& m = measurements[e];
    if (is_anchor(m.i) && is_anchor(m.j)) {
      throw InvalidInput("edge " + std::to_string(m.i) + "-" + std::to_string(m.j) + " joins two anchors");
    }
    out[e] = {m.i, m.j, 0.0, upper_bound(m, policy, sigma), true};
    if (is_anchor(m.j)) anchor_edges[m.i].emplace_back(m.j, e);
    if (is_anchor(m.i)) anchor_edges[m.j].emplace_back(m.i, e);
  }

  for (const auto& [sensor, edges] : anchor_edges) {
    if (edges.size() < 3) continue;
    for (const auto& [anchor_j, e] : edges) {
      double lower = 0.0;
      for (const auto& [anchor_k, f] : edges) {
        if (anchor_k == anchor_j) continue;
        lower = std::max(lower, pairwise_anchor_lower_bound(anchors.at(anchor_j), anchors.at(anchor_k),
                                                            out[f].upper));
      }
      if (lower > out[e].upper) {
        out[e].lower = out[e].upper;
        out[e].consistent = false;
      } else {
        out[e].lower = lower;
      }
    }
  }
  return out;
}

const char* to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::kLosPrior: return "los";
    case EdgeKind::kNlosPrior: return "nlos";
    case EdgeKind::kUnknown: break;
  }
  return "unknown";
}

EdgeKind edge_kind_from_string(const std::string& text) {
  if (text == "unknown" || text.empty()) return EdgeKind::kUnknown;
  if (text == "los") return EdgeKind::kLosPrior;
  if (text == "nlos") return EdgeKind::kNlosPrior;
  throw InvalidInput("unknown edge kind '" + text + "'");
}

}  // namespace nlos
