#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nlos/estimator.hpp"
#include "nlos/geometry.hpp"

namespace nlos {

struct Field {
  double xmin = -20.0, xmax = 20.0, ymin = -20.0, ymax = 20.0;
  bool contains(Point2 p) const { return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax; }
};

enum class Connectivity { kFull, kSensorAnchorOnly, kRadiusLimited };
const char* to_string(Connectivity c);
Connectivity connectivity_from_string(const std::string& text);

struct Scenario {
  Field field;
  std::vector<Point2> anchors;  // anchor k (0-based) has id n_sensors + 1 + k
  std::vector<Point2> sensors;  // sensor k (0-based) has id k + 1
  Connectivity connectivity = Connectivity::kFull;
  double radius = 0.0;  // radius-limited only
  std::uint64_t seed = 0;
  std::vector<std::string> notes;

  int n_sensors() const { return static_cast<int>(sensors.size()); }
  int n_anchors() const { return static_cast<int>(anchors.size()); }
  AnchorMap anchor_map() const;
  std::map<NodeId, Point2> truth() const;
  Point2 position(NodeId id) const;
  void validate() const;
};

// 40 x 40 field centered at the origin, 18 fixed anchors, 80 uniform sensors.
Scenario paper_scenario(std::uint64_t seed, int n_sensors = 80);
// Uniform sensors and anchors over `field`.
Scenario random_scenario(std::uint64_t seed, int n_sensors, int n_anchors, Field field = {});

// Edges implied by the scenario connectivity, ordered by (i, j) with i < j.
std::vector<std::pair<NodeId, NodeId>> scenario_edges(const Scenario& scenario);

struct NoiseModel {
  double sigma = 0.01;
  double bias_low = 0.0;
  double bias_high = 0.5;
  double nlos_fraction = 1.0;
  void validate() const;
};

// sigma such that 10 log10(sigma^2) equals `db`.
double sigma_from_db(double db);

constexpr double kDistanceFloor = 1e-6;
// r + n + delta, clamped to kDistanceFloor when the sum is not positive enough.
double measured_distance(double r, double noise, double bias);

struct NoiseDraw {
  double noise = 0.0;
  double bias = 0.0;
  bool nlos = false;
};

// Draws one (noise, bias, nlos) triple per call; three variates per draw, always.
class NoiseSampler {
 public:
  NoiseSampler(const NoiseModel& model, std::uint64_t seed);
  NoiseDraw draw();

 private:
  NoiseModel model_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> unit_;
};

// Noisy ranges for every scenario edge. Edge kinds are reported as unknown.
std::vector<RangeMeasurement> measure(const Scenario& scenario, const NoiseModel& noise, std::uint64_t seed,
                                      std::vector<NoiseDraw>* draws = nullptr);

double mse(const std::map<NodeId, Point2>& estimates, const std::map<NodeId, Point2>& truth);

// SplitMix64 step; `state` advances by the golden-ratio increment.
std::uint64_t splitmix64(std::uint64_t& state);
// Seed of stream `stream` derived from `seed` (one SplitMix64 output after mixing in the stream index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  double mse = 0.0;
  SolveStatus status = SolveStatus::kOptimal;
  int iterations = 0;
  double seconds = 0.0;
};

struct BatchSummary {
  std::vector<TrialResult> trials;
  double mean_mse = 0.0;
  double std_mse = 0.0;
  double min_mse = 0.0;
  double max_mse = 0.0;
  int degraded = 0;  // trials whose solver status was not optimal
};

struct BatchSpec {
  // Without a fixed scenario every trial draws its own paper scenario.
  std::optional<Scenario> fixed_scenario;
  NoiseModel noise;
  EstimatorConfig estimator;
  int trials = 5;
  std::uint64_t master_seed = 1;
};

// Trial t uses seed s_t, the t-th SplitMix64 output from master_seed;
// the scenario uses derive_seed(s_t, 0) and the measurements derive_seed(s_t, 1).
using TrialCallback = std::function<void(const TrialResult&, const EstimationReport&, const Scenario&)>;
BatchSummary run_batch(const BatchSpec& spec, const TrialCallback& on_trial = {});

// One trial of the batch protocol; also returns the full estimation report.
TrialResult run_trial(const BatchSpec& spec, int trial, std::uint64_t trial_seed, EstimationReport* report = nullptr,
                      Scenario* scenario_out = nullptr);

// Two-sided one-sample Kolmogorov-Smirnov statistic against U[lo, hi].
double ks_statistic_uniform(std::vector<double> sample, double lo, double hi);

}  // namespace nlos
