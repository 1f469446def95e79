#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nlos {

using NodeId = int;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double squared_norm(Point2 p) { return p.x * p.x + p.y * p.y; }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

enum class EdgeKind { kUnknown, kLosPrior, kNlosPrior };

struct RangeMeasurement {
  NodeId i = 0;
  NodeId j = 0;
  double distance = 0.0;
  EdgeKind kind = EdgeKind::kUnknown;
  double weight = 1.0;
};

struct DistanceBounds {
  NodeId i = 0;
  NodeId j = 0;
  double lower = 0.0;
  double upper = 0.0;
  // False when the geometric lower bound exceeded the upper bound and was clamped.
  bool consistent = true;
};

// Slack n^U added to a measurement to obtain an upper bound on the true distance.
struct NoiseBoundPolicy {
  enum class Mode { kAbsolute, kSigmaMultiple };
  Mode mode = Mode::kSigmaMultiple;
  double value = 3.0;

  static NoiseBoundPolicy absolute(double meters) { return {Mode::kAbsolute, meters}; }
  static NoiseBoundPolicy sigma_multiple(double k) { return {Mode::kSigmaMultiple, k}; }

  // Resolved slack in meters; throws InvalidInput if it is not positive.
  double resolve(double sigma) const;
};

using AnchorMap = std::map<NodeId, Point2>;

double upper_bound(const RangeMeasurement& measurement, const NoiseBoundPolicy& policy, double sigma);

// Smallest distance from a_j to any point within radius upper_ik of a_k, clamped at zero.
double pairwise_anchor_lower_bound(Point2 a_j, Point2 a_k, double upper_ik);

// Per-edge [lower, upper] intervals. Output order follows the input order.
// Any endpoint id present in `anchors` is treated as an anchor, the rest as sensors.
std::vector<DistanceBounds> derive_bounds(const std::vector<RangeMeasurement>& measurements,
                                          const AnchorMap& anchors, const NoiseBoundPolicy& policy,
                                          double sigma);

// Throws InvalidInput on i == j, nonpositive distance, negative weight or duplicate pairs.
void validate_measurements(const std::vector<RangeMeasurement>& measurements);

const char* to_string(EdgeKind kind);
EdgeKind edge_kind_from_string(const std::string& text);

}  // namespace nlos
