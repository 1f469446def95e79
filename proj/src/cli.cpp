#include "nlos/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "nlos/error.hpp"
#include "nlos/io.hpp"

namespace nlos::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

NoiseBoundPolicy parse_nu(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw InvalidInput("--nu expects abs:<m> or sigma:<k>, got '" + text + "'");
  const std::string kind = text.substr(0, colon);
  double value = 0.0;
  try {
    std::size_t used = 0;
    value = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw InvalidInput("--nu value is not a number: '" + text + "'");
  }
  if (!(value >= 0.0)) throw InvalidInput("--nu value must be nonnegative");
  if (kind == "abs") return NoiseBoundPolicy::absolute(value);
  if (kind == "sigma") return NoiseBoundPolicy::sigma_multiple(value);
  throw InvalidInput("--nu kind must be abs or sigma, got '" + kind + "'");
}

NoiseModel parse_noise(const std::string& text) {
  NoiseModel m;
  std::istringstream in(text);
  std::string item;
  auto number = [](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw InvalidInput("bad number '" + s + "' in --noise");
    return v;
  };
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InvalidInput("--noise entries are key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (key == "sigma") {
      m.sigma = number(value);
    } else if (key == "db") {
      m.sigma = sigma_from_db(number(value));
    } else if (key == "bias") {
      const auto colon = value.find(':');
      if (colon == std::string::npos) throw InvalidInput("bias expects <lo>:<hi>");
      m.bias_low = number(value.substr(0, colon));
      m.bias_high = number(value.substr(colon + 1));
    } else if (key == "frac") {
      m.nlos_fraction = number(value);
    } else {
      throw InvalidInput("unknown --noise key '" + key + "'");
    }
  }
  m.validate();
  return m;
}

namespace {

struct EstimatorFlags {
  std::string formulation = "esdp";
  std::string variant = "known";
  std::string coeff = "midpoint";
  std::string nu = "sigma:3";
  std::optional<double> sigma;  // defaults to the simulated noise sigma, else 0.01
  bool refine = false;
  std::optional<double> tol;
  int max_iters = 200;
  bool serial = false;
};

void add_estimator_flags(CLI::App* app, EstimatorFlags& f) {
  app->add_option("--formulation", f.formulation, "fullsdp or esdp")
      ->check(CLI::IsMember({"fullsdp", "esdp"}))
      ->capture_default_str();
  app->add_option("--variant", f.variant, "known or uncertain anchors")
      ->check(CLI::IsMember({"known", "uncertain"}))
      ->capture_default_str();
  app->add_option("--coeff", f.coeff, "objective coefficients: paper or midpoint")
      ->check(CLI::IsMember({"paper", "midpoint", "paper-literal", "midpoint-consistent"}))
      ->capture_default_str();
  app->add_option("--nu", f.nu, "upper-bound slack: abs:<m> or sigma:<k>")->capture_default_str();
  app->add_option("--sigma", f.sigma, "LOS noise std used by sigma:<k> slack (default: noise sigma)");
  app->add_flag("--refine", f.refine, "polish the SDP estimate by local descent");
  app->add_option("--tol", f.tol, "solver gap and feasibility tolerance");
  app->add_option("--max-iters", f.max_iters, "solver iteration cap")->capture_default_str();
  app->add_flag("--serial", f.serial, "use the serial reference kernels");
}

EstimatorConfig make_config(const EstimatorFlags& f, double default_sigma) {
  EstimatorConfig c;
  c.formulation = formulation_from_string(f.formulation);
  c.variant = anchor_variant_from_string(f.variant);
  c.mode = coefficient_mode_from_string(f.coeff);
  c.noise_policy = parse_nu(f.nu);
  c.sigma = f.sigma.value_or(default_sigma);
  c.refine = f.refine;
  if (f.tol) {
    c.solver.gap_tol = *f.tol;
    c.solver.feas_tol = *f.tol;
  }
  c.solver.max_iters = f.max_iters;
  c.solver.execution = f.serial ? Execution::kSerial : Execution::kParallel;
  c.solver.validate();
  return c;
}

ordered_json manifest(const std::string& command, const std::vector<std::string>& args, ordered_json flags,
                      ordered_json seeds, const std::vector<std::string>& outputs, double seconds) {
  ordered_json j;
  j["format"] = "nlos-manifest/1";
  j["tool"] = "nlos";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["argv"] = args;
  j["flags"] = std::move(flags);
  j["seeds"] = std::move(seeds);
  j["outputs"] = outputs;
  j["timing"] = {{"seconds", round9(seconds)}};
  return j;
}

ordered_json estimator_flags_json(const EstimatorConfig& c) { return config_to_json(c); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Context {
  const std::vector<std::string>& args;
  std::ostream& out;
  std::ostream& err;
};

// generate ------------------------------------------------------------------

struct GenerateFlags {
  std::uint64_t seed = 1;
  int sensors = 80;
  bool paper_layout = false;
  std::optional<int> random_anchors;
  std::string connectivity = "full";
  double radius = 0.0;
  std::string out;
};

int cmd_generate(const GenerateFlags& f, Context& ctx) {
  if (f.sensors < 0) throw InvalidInput("--sensors must be nonnegative");
  Scenario s;
  if (f.random_anchors) {
    s = random_scenario(f.seed, f.sensors, *f.random_anchors);
  } else {
    s = paper_scenario(f.seed, f.sensors);
  }
  s.connectivity = connectivity_from_string(f.connectivity);
  s.radius = f.radius;
  s.validate();
  write_atomic(f.out, serialize_scenario(s));
  ctx.out << "wrote " << f.out << " (" << s.n_anchors() << " anchors, " << s.n_sensors() << " sensors)\n";
  return kExitOk;
}

// localize ------------------------------------------------------------------

struct LocalizeFlags {
  std::string scenario;
  std::string measurements;
  std::string bounds;
  std::string noise = "sigma=0.01,bias=0:0.5,frac=1.0";
  std::uint64_t seed = 1;
  double anchor_radius = 0.0;
  bool enforce_ball = false;
  std::string out;
  EstimatorFlags est;
};

std::vector<AnchorPrior> priors_from(const Scenario& s, double radius, bool enforce_ball) {
  std::vector<AnchorPrior> priors;
  for (const auto& [id, p] : s.anchor_map()) priors.push_back({id, p, radius, enforce_ball});
  return priors;
}

int cmd_localize(const LocalizeFlags& f, Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario s = parse_scenario(read_text(f.scenario));
  const bool simulated = f.bounds.empty() && f.measurements.empty();
  const NoiseModel noise = simulated ? parse_noise(f.noise) : NoiseModel{};
  const EstimatorConfig config = make_config(f.est, simulated ? noise.sigma : 0.01);
  LocalizationInput input;
  input.n_sensors = s.n_sensors();
  input.anchors = s.anchor_map();
  input.truth = s.truth();
  if (config.variant == AnchorVariant::kUncertain) input.priors = priors_from(s, f.anchor_radius, f.enforce_ball);

  ordered_json seeds = {{"scenario", s.seed}};
  std::string source;
  if (!f.bounds.empty()) {
    auto bounds = parse_bounds_csv(read_text(f.bounds));
    for (const auto& b : bounds) input.measurements.push_back({b.i, b.j, b.upper, EdgeKind::kUnknown, 1.0});
    input.bounds = std::move(bounds);
    source = "bounds:" + f.bounds;
  } else if (!f.measurements.empty()) {
    input.measurements = parse_measurements_csv(read_text(f.measurements));
    source = "measurements:" + f.measurements;
  } else {
    input.measurements = measure(s, noise, f.seed);
    seeds["measurements"] = f.seed;
    source = "simulated:" + f.noise;
  }

  const EstimationReport report = localize(input, config);
  const fs::path dir(f.out);
  ensure_dir(dir);
  ordered_json rj = report_to_json(report);
  rj["manifest"] = "manifest.json";
  rj["scenario_seed"] = s.seed;
  rj["input"] = source;
  write_atomic(dir / "report.json", rj.dump(2) + "\n");
  write_atomic(dir / "positions.csv", positions_csv(report.positions, input.truth));
  if (!report.anchor_estimates.empty()) write_atomic(dir / "anchors.csv", positions_csv(report.anchor_estimates));

  ordered_json flags = estimator_flags_json(config);
  flags["scenario"] = f.scenario;
  flags["input"] = source;
  flags["anchor_radius"] = f.anchor_radius;
  flags["enforce_ball"] = f.enforce_ball;
  std::vector<std::string> outputs = {"report.json", "positions.csv"};
  if (!report.anchor_estimates.empty()) outputs.push_back("anchors.csv");
  write_atomic(dir / "manifest.json",
               manifest("localize", ctx.args, flags, seeds, outputs, seconds_since(t0)).dump(2) + "\n");

  ctx.out << "status " << to_string(report.solver.status) << ", " << report.solver.iterations << " iterations";
  if (report.mse) ctx.out << ", mse " << format_double(*report.mse) << " m^2";
  ctx.out << "\n";
  if (report.solver.status != SolveStatus::kOptimal) {
    ctx.err << "solver finished with status " << to_string(report.solver.status) << "\n";
    return kExitDegraded;
  }
  return kExitOk;
}

// simulate ------------------------------------------------------------------

struct SimulateFlags {
  bool paper_experiment = false;
  std::string scenario;
  int trials = 5;
  std::uint64_t master_seed = 1;
  std::string noise = "sigma=0.01,bias=0:0.5,frac=1.0";
  std::string out_dir;
  EstimatorFlags est;
};

int cmd_simulate(const SimulateFlags& f, Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  if (f.paper_experiment == !f.scenario.empty()) {
    throw InvalidInput("give exactly one of --paper-experiment or --scenario");
  }
  BatchSpec spec;
  if (!f.scenario.empty()) spec.fixed_scenario = parse_scenario(read_text(f.scenario));
  spec.noise = parse_noise(f.noise);
  spec.estimator = make_config(f.est, spec.noise.sigma);
  if (spec.estimator.variant == AnchorVariant::kUncertain) {
    throw InvalidInput("simulate runs the known-anchors variant only");
  }
  spec.trials = f.trials;
  spec.master_seed = f.master_seed;

  const fs::path dir(f.out_dir);
  ensure_dir(dir);
  std::vector<std::string> outputs;
  std::string scatter = "trial,id,role,true_x,true_y,est_x,est_y\n";
  const BatchSummary batch = run_batch(spec, [&](const TrialResult& t, const EstimationReport& r, const Scenario& s) {
    char name[32];
    std::snprintf(name, sizeof name, "trial_%03d.csv", t.trial);
    write_atomic(dir / name, positions_csv(r.positions, s.truth()));
    outputs.emplace_back(name);
    for (const auto& [id, p] : r.positions) {
      const Point2 truth = s.position(id);
      scatter += std::to_string(t.trial) + "," + std::to_string(id) + ",sensor," + format_double(truth.x) + "," +
                 format_double(truth.y) + "," + format_double(p.x) + "," + format_double(p.y) + "\n";
    }
    for (const auto& [id, p] : s.anchor_map()) {
      scatter += std::to_string(t.trial) + "," + std::to_string(id) + ",anchor," + format_double(p.x) + "," +
                 format_double(p.y) + "," + format_double(p.x) + "," + format_double(p.y) + "\n";
    }
  });
  write_atomic(dir / "scatter.csv", scatter);
  outputs.emplace_back("scatter.csv");
  ordered_json bj = batch_to_json(batch, spec);
  bj["manifest"] = "manifest.json";
  write_atomic(dir / "batch.json", bj.dump(2) + "\n");
  outputs.emplace_back("batch.json");

  ordered_json flags = estimator_flags_json(spec.estimator);
  flags["scenario"] = f.scenario.empty() ? "paper-layout" : f.scenario;
  flags["trials"] = f.trials;
  flags["noise"] = f.noise;
  ordered_json seeds = {{"master", f.master_seed}, {"trials", ordered_json::array()}};
  for (const auto& t : batch.trials) seeds["trials"].push_back(t.seed);
  write_atomic(dir / "manifest.json",
               manifest("simulate", ctx.args, flags, seeds, outputs, seconds_since(t0)).dump(2) + "\n");

  ctx.out << "trials " << batch.trials.size() << ", mean mse " << format_double(batch.mean_mse) << " m^2 (std "
          << format_double(batch.std_mse) << ")\n";
  if (batch.degraded > 0) {
    ctx.err << batch.degraded << " trial(s) ended without an optimal solver status\n";
    return kExitDegraded;
  }
  return kExitOk;
}

// bounds --------------------------------------------------------------------

struct BoundsFlags {
  std::string scenario;
  std::string measurements;
  std::string noise = "sigma=0.01,bias=0:0.5,frac=1.0";
  std::uint64_t seed = 1;
  std::string nu = "sigma:3";
  std::optional<double> sigma;
  std::string out;
};

int cmd_bounds(const BoundsFlags& f, Context& ctx) {
  const Scenario s = parse_scenario(read_text(f.scenario));
  const bool simulated = f.measurements.empty();
  const NoiseModel noise = simulated ? parse_noise(f.noise) : NoiseModel{};
  const auto measurements = simulated ? measure(s, noise, f.seed) : parse_measurements_csv(read_text(f.measurements));
  validate_measurements(measurements);
  const double sigma = f.sigma.value_or(simulated ? noise.sigma : 0.01);
  const auto bounds = derive_bounds(measurements, s.anchor_map(), parse_nu(f.nu), sigma);
  write_atomic(f.out, bounds_csv(bounds));
  const auto bad = std::count_if(bounds.begin(), bounds.end(), [](const DistanceBounds& b) { return !b.consistent; });
  ctx.out << "wrote " << bounds.size() << " edges to " << f.out << " (" << bad << " inconsistent)\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Range-based localization with NLOS-aware distance bounds and SDP relaxations", "nlos"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  GenerateFlags gen;
  auto* g = app.add_subcommand("generate", "write a scenario file");
  g->add_option("--seed", gen.seed, "scenario seed")->capture_default_str();
  g->add_option("--sensors", gen.sensors, "number of sensors")->capture_default_str();
  auto* paper_opt = g->add_flag("--paper-layout", gen.paper_layout, "fixed 18-anchor layout (default)");
  g->add_option("--random-anchors", gen.random_anchors, "uniform random anchors instead")->excludes(paper_opt);
  g->add_option("--connectivity", gen.connectivity, "full, sensor-anchor-only or radius-limited")
      ->check(CLI::IsMember({"full", "sensor-anchor-only", "radius-limited"}))
      ->capture_default_str();
  g->add_option("--radius", gen.radius, "range limit for radius-limited connectivity");
  g->add_option("--out", gen.out, "scenario file")->required();

  LocalizeFlags loc;
  auto* l = app.add_subcommand("localize", "localize the sensors of one scenario");
  l->add_option("--scenario", loc.scenario, "scenario file")->required();
  auto* meas_opt = l->add_option("--measurements", loc.measurements, "measurement CSV (default: simulate)");
  l->add_option("--bounds", loc.bounds, "bounds CSV, bypasses bound derivation")->excludes(meas_opt);
  l->add_option("--noise", loc.noise, "noise model for simulated measurements")->capture_default_str();
  l->add_option("--seed", loc.seed, "measurement seed for simulated measurements")->capture_default_str();
  l->add_option("--anchor-radius", loc.anchor_radius, "prior radius for uncertain anchors")->capture_default_str();
  l->add_flag("--enforce-ball", loc.enforce_ball, "constrain uncertain anchors to their prior balls");
  l->add_option("--out", loc.out, "output directory")->required();
  add_estimator_flags(l, loc.est);

  SimulateFlags sim;
  auto* m = app.add_subcommand("simulate", "Monte Carlo batch");
  auto* pe = m->add_flag("--paper-experiment", sim.paper_experiment, "fresh 80-sensor paper layout per trial");
  m->add_option("--scenario", sim.scenario, "fixed scenario file")->excludes(pe);
  m->add_option("--trials", sim.trials, "number of trials")->capture_default_str();
  m->add_option("--master-seed", sim.master_seed, "seed for per-trial seed splitting")->capture_default_str();
  m->add_option("--noise", sim.noise, "sigma=<m>|db=<dB>,bias=<lo>:<hi>,frac=<p>")->capture_default_str();
  m->add_option("--out-dir", sim.out_dir, "output directory")->required();
  add_estimator_flags(m, sim.est);

  BoundsFlags bnd;
  auto* b = app.add_subcommand("bounds", "derive per-edge distance bounds");
  b->add_option("--scenario", bnd.scenario, "scenario file")->required();
  b->add_option("--measurements", bnd.measurements, "measurement CSV (default: simulate)");
  b->add_option("--noise", bnd.noise, "noise model for simulated measurements")->capture_default_str();
  b->add_option("--seed", bnd.seed, "measurement seed")->capture_default_str();
  b->add_option("--nu", bnd.nu, "upper-bound slack: abs:<m> or sigma:<k>")->capture_default_str();
  b->add_option("--sigma", bnd.sigma, "LOS noise std used by sigma:<k> slack (default: noise sigma)");
  b->add_option("--out", bnd.out, "bounds CSV")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  Context ctx{args, out, err};
  try {
    if (*g) return cmd_generate(gen, ctx);
    if (*l) return cmd_localize(loc, ctx);
    if (*m) return cmd_simulate(sim, ctx);
    if (*b) return cmd_bounds(bnd, ctx);
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace nlos::cli
