#include "nlos/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "nlos/error.hpp"

namespace nlos {

using nlohmann::json;
using nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double round9(double v) { return std::isfinite(v) ? std::strtod(format_double(v).c_str(), nullptr) : v; }

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

namespace {

ordered_json point_json(Point2 p) { return ordered_json::array({round9(p.x), round9(p.y)}); }

Point2 point_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidInput("point must be a two-element array");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || *end != '\0') throw InvalidInput("bad number '" + cell + "'");
  return v;
}

int parse_int(const std::string& cell) {
  const double v = parse_number(cell);
  if (v != static_cast<int>(v)) throw InvalidInput("bad integer '" + cell + "'");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& cell) {
  if (cell == "true" || cell == "1") return true;
  if (cell == "false" || cell == "0") return false;
  throw InvalidInput("bad boolean '" + cell + "'");
}

// Rows of a CSV body after checking the header.
std::vector<std::vector<std::string>> csv_rows(const std::string& text, const std::string& header,
                                               std::size_t min_cols, std::size_t max_cols) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw InvalidInput("expected CSV header '" + header + "'");
  std::vector<std::vector<std::string>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() < min_cols || cells.size() > max_cols) {
      throw InvalidInput("CSV line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) + " columns");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

ordered_json scenario_to_json(const Scenario& s) {
  ordered_json j;
  j["format"] = "nlos-scenario/1";
  j["seed"] = s.seed;
  j["field"] = {{"xmin", round9(s.field.xmin)}, {"xmax", round9(s.field.xmax)},
                {"ymin", round9(s.field.ymin)}, {"ymax", round9(s.field.ymax)}};
  j["connectivity"] = to_string(s.connectivity);
  j["radius"] = round9(s.radius);
  j["anchors"] = ordered_json::array();
  for (const auto& p : s.anchors) j["anchors"].push_back(point_json(p));
  j["sensors"] = ordered_json::array();
  for (const auto& p : s.sensors) j["sensors"].push_back(point_json(p));
  j["notes"] = s.notes;
  return j;
}

Scenario scenario_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "nlos-scenario/1") throw InvalidInput("unsupported scenario format");
    Scenario s;
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto& f = j.at("field");
    s.field = {f.at("xmin").get<double>(), f.at("xmax").get<double>(), f.at("ymin").get<double>(),
               f.at("ymax").get<double>()};
    s.connectivity = connectivity_from_string(j.at("connectivity").get<std::string>());
    s.radius = j.value("radius", 0.0);
    for (const auto& p : j.at("anchors")) s.anchors.push_back(point_from(p));
    for (const auto& p : j.at("sensors")) s.sensors.push_back(point_from(p));
    if (j.contains("notes")) s.notes = j.at("notes").get<std::vector<std::string>>();
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed scenario: ") + e.what());
  }
}

std::string serialize_scenario(const Scenario& scenario) { return scenario_to_json(scenario).dump(2) + "\n"; }

Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("scenario is not valid JSON: ") + e.what());
  }
  return scenario_from_json(j);
}

std::string measurements_csv(const std::vector<RangeMeasurement>& measurements) {
  std::string out = "i,j,distance,kind,weight\n";
  for (const auto& m : measurements) {
    out += std::to_string(m.i) + "," + std::to_string(m.j) + "," + format_double(m.distance) + "," +
           to_string(m.kind) + "," + format_double(m.weight) + "\n";
  }
  return out;
}

std::vector<RangeMeasurement> parse_measurements_csv(const std::string& text) {
  std::vector<RangeMeasurement> out;
  for (const auto& row : csv_rows(text, "i,j,distance,kind,weight", 5, 5)) {
    out.push_back({parse_int(row[0]), parse_int(row[1]), parse_number(row[2]), edge_kind_from_string(row[3]),
                   parse_number(row[4])});
  }
  return out;
}

std::string bounds_csv(const std::vector<DistanceBounds>& bounds) {
  std::string out = "i,j,lower,upper,consistent\n";
  for (const auto& b : bounds) {
    out += std::to_string(b.i) + "," + std::to_string(b.j) + "," + format_double(b.lower) + "," +
           format_double(b.upper) + "," + (b.consistent ? "true" : "false") + "\n";
  }
  return out;
}

std::vector<DistanceBounds> parse_bounds_csv(const std::string& text) {
  std::vector<DistanceBounds> out;
  for (const auto& row : csv_rows(text, "i,j,lower,upper,consistent", 5, 5)) {
    out.push_back({parse_int(row[0]), parse_int(row[1]), parse_number(row[2]), parse_number(row[3]),
                   parse_bool(row[4])});
  }
  return out;
}

std::string positions_csv(const std::map<NodeId, Point2>& positions, const std::map<NodeId, Point2>& truth) {
  const bool with_truth = !truth.empty();
  std::string out = with_truth ? "id,x,y,true_x,true_y,sq_error\n" : "id,x,y\n";
  for (const auto& [id, p] : positions) {
    out += std::to_string(id) + "," + format_double(p.x) + "," + format_double(p.y);
    if (with_truth) {
      const auto it = truth.find(id);
      if (it == truth.end()) throw InvalidInput("truth is missing node " + std::to_string(id));
      out += "," + format_double(it->second.x) + "," + format_double(it->second.y) + "," +
             format_double(squared_norm(p - it->second));
    }
    out += "\n";
  }
  return out;
}

ordered_json config_to_json(const EstimatorConfig& c) {
  ordered_json j;
  j["formulation"] = to_string(c.formulation);
  j["variant"] = to_string(c.variant);
  j["mode"] = to_string(c.mode);
  j["noise_policy"] = {
      {"kind", c.noise_policy.mode == NoiseBoundPolicy::Mode::kAbsolute ? "absolute" : "sigma-multiple"},
      {"value", round9(c.noise_policy.value)}};
  j["sigma"] = round9(c.sigma);
  j["solver"] = {{"gap_tol", c.solver.gap_tol}, {"feas_tol", c.solver.feas_tol}, {"max_iters", c.solver.max_iters}};
  j["refine"] = c.refine;
  return j;
}

ordered_json report_to_json(const EstimationReport& r) {
  ordered_json j;
  j["format"] = "nlos-report/1";
  j["config"] = config_to_json(r.config);
  j["solver"] = {{"status", to_string(r.solver.status)},
                 {"objective", round9(r.solver.objective_value)},
                 {"duality_gap", round9(r.solver.duality_gap)},
                 {"equality_residual", round9(r.solver.equality_residual_inf_norm)},
                 {"min_block_eigenvalue", round9(r.solver.min_block_eigenvalue)},
                 {"iterations", r.solver.iterations},
                 {"messages", r.solver.messages}};
  if (r.mse) j["mse_m2"] = round9(*r.mse);
  if (r.refine_objective_before) {
    j["refine"] = {{"objective_before", round9(*r.refine_objective_before)},
                   {"objective_after", round9(*r.refine_objective_after)}};
  }
  ordered_json sensors = ordered_json::array();
  for (const auto& [id, p] : r.positions) {
    ordered_json row = {{"id", id}, {"x", round9(p.x)}, {"y", round9(p.y)}};
    if (auto it = r.per_sensor_sq_error.find(id); it != r.per_sensor_sq_error.end()) {
      row["sq_error"] = round9(it->second);
    }
    if (auto it = r.lift_gap.find(id); it != r.lift_gap.end()) row["lift_gap"] = round9(it->second);
    sensors.push_back(std::move(row));
  }
  j["sensors"] = std::move(sensors);
  ordered_json anchors = ordered_json::array();
  for (const auto& [id, p] : r.anchor_estimates) anchors.push_back({{"id", id}, {"x", round9(p.x)}, {"y", round9(p.y)}});
  j["anchor_estimates"] = std::move(anchors);
  ordered_json bad = ordered_json::array();
  for (const auto& b : r.inconsistent_edges) bad.push_back({{"i", b.i}, {"j", b.j}, {"lower", round9(b.lower)}, {"upper", round9(b.upper)}});
  j["inconsistent_edges"] = std::move(bad);
  return j;
}

ordered_json batch_to_json(const BatchSummary& batch, const BatchSpec& spec) {
  ordered_json j;
  j["format"] = "nlos-batch/1";
  j["master_seed"] = spec.master_seed;
  j["seed_rule"] = "trial seed t = t-th splitmix64 output from master_seed; scenario seed = derive_seed(t, 0); "
                   "measurement seed = derive_seed(t, 1)";
  j["scenario"] = spec.fixed_scenario ? "fixed" : "paper-layout";
  j["noise"] = {{"sigma", round9(spec.noise.sigma)},
                {"sigma_reading", "noise power in dB read as variance: sigma = sqrt(10^(dB/10))"},
                {"bias", {round9(spec.noise.bias_low), round9(spec.noise.bias_high)}},
                {"nlos_fraction", round9(spec.noise.nlos_fraction)}};
  j["config"] = config_to_json(spec.estimator);
  j["trials"] = ordered_json::array();
  for (const auto& t : batch.trials) {
    j["trials"].push_back({{"trial", t.trial}, {"seed", t.seed}, {"mse_m2", round9(t.mse)},
                           {"status", to_string(t.status)}, {"iterations", t.iterations}});
  }
  j["mse_m2"] = {{"mean", round9(batch.mean_mse)}, {"std", round9(batch.std_mse)},
                 {"min", round9(batch.min_mse)}, {"max", round9(batch.max_mse)}};
  j["degraded_trials"] = batch.degraded;
  return j;
}

}  // namespace nlos
