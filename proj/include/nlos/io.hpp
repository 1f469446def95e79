#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlos/estimator.hpp"
#include "nlos/geometry.hpp"
#include "nlos/sim.hpp"

namespace nlos {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Nine significant digits, shortest form ("%.9g").
std::string format_double(double v);
// v rounded to nine significant digits, so JSON output stays within that precision.
double round9(double v);

std::string read_text(const std::filesystem::path& path);
// Writes `path.tmp` and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

nlohmann::ordered_json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j);
std::string serialize_scenario(const Scenario& scenario);
Scenario parse_scenario(const std::string& text);

// CSV tables. Each starts with a fixed header row.
std::string measurements_csv(const std::vector<RangeMeasurement>& measurements);
std::vector<RangeMeasurement> parse_measurements_csv(const std::string& text);
std::string bounds_csv(const std::vector<DistanceBounds>& bounds);
std::vector<DistanceBounds> parse_bounds_csv(const std::string& text);
// Truth columns are emitted when `truth` is non-empty.
std::string positions_csv(const std::map<NodeId, Point2>& positions, const std::map<NodeId, Point2>& truth = {});

nlohmann::ordered_json config_to_json(const EstimatorConfig& config);
nlohmann::ordered_json report_to_json(const EstimationReport& report);
// No timings, so equal seeds give identical files.
nlohmann::ordered_json batch_to_json(const BatchSummary& batch, const BatchSpec& spec);

}  // namespace nlos
