#include "nlos/sim.hpp"

#include <algorithm>
#include <cmath>

#include "nlos/error.hpp"

namespace nlos {

const char* to_string(Connectivity c) {
  switch (c) {
    case Connectivity::kFull: return "full";
    case Connectivity::kSensorAnchorOnly: return "sensor-anchor-only";
    case Connectivity::kRadiusLimited: return "radius-limited";
  }
  return "full";
}

Connectivity connectivity_from_string(const std::string& text) {
  if (text == "full") return Connectivity::kFull;
  if (text == "sensor-anchor-only") return Connectivity::kSensorAnchorOnly;
  if (text == "radius-limited") return Connectivity::kRadiusLimited;
  throw InvalidInput("unknown connectivity '" + text + "'");
}

AnchorMap Scenario::anchor_map() const {
  AnchorMap out;
  for (int k = 0; k < n_anchors(); ++k) out[n_sensors() + 1 + k] = anchors[k];
  return out;
}

std::map<NodeId, Point2> Scenario::truth() const {
  std::map<NodeId, Point2> out;
  for (int k = 0; k < n_sensors(); ++k) out[k + 1] = sensors[k];
  return out;
}

Point2 Scenario::position(NodeId id) const {
  if (id >= 1 && id <= n_sensors()) return sensors[id - 1];
  if (id > n_sensors() && id <= n_sensors() + n_anchors()) return anchors[id - n_sensors() - 1];
  throw InvalidInput("unknown node id " + std::to_string(id));
}

void Scenario::validate() const {
  if (!(field.xmin < field.xmax) || !(field.ymin < field.ymax)) throw InvalidInput("empty field");
  for (const auto& p : anchors) {
    if (!p.finite() || !field.contains(p)) throw InvalidInput("anchor outside the field");
  }
  for (const auto& p : sensors) {
    if (!p.finite() || !field.contains(p)) throw InvalidInput("sensor outside the field");
  }
  if (connectivity == Connectivity::kRadiusLimited && !(radius > 0.0)) {
    throw InvalidInput("radius-limited connectivity needs a positive radius");
  }
}

namespace {

Point2 uniform_point(std::mt19937_64& rng, const Field& f) {
  std::uniform_real_distribution<double> ux(f.xmin, f.xmax);
  std::uniform_real_distribution<double> uy(f.ymin, f.ymax);
  const double x = ux(rng);
  return {x, uy(rng)};
}

}  // namespace

Scenario paper_scenario(std::uint64_t seed, int n_sensors) {
  if (n_sensors < 0) throw InvalidInput("negative sensor count");
  Scenario s;
  s.seed = seed;
  // Seven boundary/center anchors as listed, plus (0, 20) to complete the eight.
  s.anchors = {{20, 20}, {-20, 20}, {20, -20}, {-20, -20}, {0, 0}, {-20, 0}, {0, -20}, {0, 20},
               {4.3416, -19.3696}, {-19.3458, -12.3970}, {3.4767, -17.6967}, {-5.2972, 5.2580},
               {8.7053, 7.7067}, {-16.6368, -1.8257}, {-2.3268, -5.8699}, {-13.8557, 7.0257},
               {7.9685, 9.1003}, {-0.8646, 2.1936}};
  s.notes.push_back("anchor (0,20) added to complete the eight boundary anchors");
  std::mt19937_64 rng(seed);
  for (int k = 0; k < n_sensors; ++k) s.sensors.push_back(uniform_point(rng, s.field));
  return s;
}

Scenario random_scenario(std::uint64_t seed, int n_sensors, int n_anchors, Field field) {
  if (n_sensors < 0 || n_anchors < 0) throw InvalidInput("negative node count");
  Scenario s;
  s.field = field;
  s.seed = seed;
  std::mt19937_64 rng(seed);
  for (int k = 0; k < n_anchors; ++k) s.anchors.push_back(uniform_point(rng, field));
  for (int k = 0; k < n_sensors; ++k) s.sensors.push_back(uniform_point(rng, field));
  s.validate();
  return s;
}

std::vector<std::pair<NodeId, NodeId>> scenario_edges(const Scenario& scenario) {
  scenario.validate();
  const int n = scenario.n_sensors();
  const int total = n + scenario.n_anchors();
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 1; i <= n; ++i) {
    for (NodeId j = i + 1; j <= total; ++j) {
      const bool sensor_pair = j <= n;
      if (scenario.connectivity == Connectivity::kSensorAnchorOnly && sensor_pair) continue;
      if (scenario.connectivity == Connectivity::kRadiusLimited &&
          distance(scenario.position(i), scenario.position(j)) > scenario.radius) {
        continue;
      }
      edges.emplace_back(i, j);
    }
  }
  return edges;
}

void NoiseModel::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidInput("sigma must be finite and nonnegative");
  if (!(bias_low >= 0.0) || !(bias_high >= bias_low) || !std::isfinite(bias_high)) {
    throw InvalidInput("NLOS bias range must satisfy 0 <= low <= high");
  }
  if (!(nlos_fraction >= 0.0 && nlos_fraction <= 1.0)) throw InvalidInput("NLOS fraction must be in [0, 1]");
}

double sigma_from_db(double db) { return std::sqrt(std::pow(10.0, db / 10.0)); }

double measured_distance(double r, double noise, double bias) {
  const double d = r + noise + bias;
  return d > kDistanceFloor ? d : kDistanceFloor;
}

NoiseSampler::NoiseSampler(const NoiseModel& model, std::uint64_t seed)
    : model_(model), rng_(seed), normal_(0.0, 1.0), unit_(0.0, 1.0) {
  model_.validate();
}

NoiseDraw NoiseSampler::draw() {
  NoiseDraw d;
  d.noise = model_.sigma * normal_(rng_);
  const double u = unit_(rng_);
  const double v = unit_(rng_);
  d.nlos = u < model_.nlos_fraction;
  d.bias = d.nlos ? model_.bias_low + (model_.bias_high - model_.bias_low) * v : 0.0;
  return d;
}

std::vector<RangeMeasurement> measure(const Scenario& scenario, const NoiseModel& noise, std::uint64_t seed,
                                      std::vector<NoiseDraw>* draws) {
  NoiseSampler sampler(noise, seed);
  std::vector<RangeMeasurement> out;
  if (draws) draws->clear();
  for (const auto& [i, j] : scenario_edges(scenario)) {
    const NoiseDraw d = sampler.draw();
    const double r = distance(scenario.position(i), scenario.position(j));
    out.push_back({i, j, measured_distance(r, d.noise, d.bias), EdgeKind::kUnknown, 1.0});
    if (draws) draws->push_back(d);
  }
  return out;
}

double mse(const std::map<NodeId, Point2>& estimates, const std::map<NodeId, Point2>& truth) {
  if (estimates.empty()) throw InvalidInput("mse of an empty estimate set");
  double sum = 0.0;
  for (const auto& [id, p] : estimates) {
    const auto it = truth.find(id);
    if (it == truth.end()) throw InvalidInput("truth is missing node " + std::to_string(id));
    sum += squared_norm(p - it->second);
  }
  return sum / static_cast<double>(estimates.size());
}

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed ^ (0xD1B54A32D192ED03ULL * (stream + 1));
  return splitmix64(state);
}

TrialResult run_trial(const BatchSpec& spec, int trial, std::uint64_t trial_seed, EstimationReport* report,
                      Scenario* scenario_out) {
  const Scenario scenario = spec.fixed_scenario ? *spec.fixed_scenario : paper_scenario(derive_seed(trial_seed, 0));
  LocalizationInput input;
  input.n_sensors = scenario.n_sensors();
  input.anchors = scenario.anchor_map();
  input.measurements = measure(scenario, spec.noise, derive_seed(trial_seed, 1));
  input.truth = scenario.truth();
  EstimatorConfig config = spec.estimator;
  EstimationReport r = localize(input, config);

  TrialResult t;
  t.trial = trial;
  t.seed = trial_seed;
  t.mse = r.mse.value_or(0.0);
  t.status = r.solver.status;
  t.iterations = r.solver.iterations;
  t.seconds = r.solver.seconds;
  if (report) *report = std::move(r);
  if (scenario_out) *scenario_out = scenario;
  return t;
}

BatchSummary run_batch(const BatchSpec& spec, const TrialCallback& on_trial) {
  if (spec.trials < 1) throw InvalidInput("trial count must be positive");
  spec.noise.validate();
  BatchSummary out;
  std::uint64_t state = spec.master_seed;
  for (int t = 0; t < spec.trials; ++t) {
    EstimationReport report;
    Scenario scenario;
    out.trials.push_back(run_trial(spec, t, splitmix64(state), &report, &scenario));
    if (on_trial) on_trial(out.trials.back(), report, scenario);
  }
  double sum = 0.0;
  out.min_mse = out.trials.front().mse;
  out.max_mse = out.trials.front().mse;
  for (const auto& t : out.trials) {
    sum += t.mse;
    out.min_mse = std::min(out.min_mse, t.mse);
    out.max_mse = std::max(out.max_mse, t.mse);
    if (t.status != SolveStatus::kOptimal) ++out.degraded;
  }
  const double count = static_cast<double>(out.trials.size());
  out.mean_mse = sum / count;
  double var = 0.0;
  for (const auto& t : out.trials) var += (t.mse - out.mean_mse) * (t.mse - out.mean_mse);
  out.std_mse = out.trials.size() > 1 ? std::sqrt(var / (count - 1.0)) : 0.0;
  return out;
}

double ks_statistic_uniform(std::vector<double> sample, double lo, double hi) {
  if (sample.empty() || !(hi > lo)) throw InvalidInput("KS test needs a sample and a nonempty interval");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t k = 0; k < sample.size(); ++k) {
    const double cdf = std::clamp((sample[k] - lo) / (hi - lo), 0.0, 1.0);
    d = std::max({d, (static_cast<double>(k) + 1.0) / n - cdf, cdf - static_cast<double>(k) / n});
  }
  return d;
}

}  // namespace nlos
