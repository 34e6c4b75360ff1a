#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>

#include <CLI11.hpp>
#include <json.hpp>

#include "waveband/couplings.hpp"
#include "waveband/pipeline.hpp"

using namespace waveband;

namespace {

enum Exit { ok = 0, config = 2, numerical = 3, threshold = 4 };

struct Common {
  std::string scenario;
  std::string out = "out";
  int threads = 0;
  std::uint64_t seed = 0x5eed;
  double tol = 1e-9;
};

void add_common(CLI::App* sub, Common& c, bool needs_scenario = true) {
  auto* opt = sub->add_option("--scenario", c.scenario, "scenario JSON file");
  if (needs_scenario) opt->required()->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "output root; artifacts go to <out>/<name>/")->capture_default_str();
  sub->add_option("--threads", c.threads, "worker threads (default: WAVEBAND_THREADS or 1)")->check(CLI::NonNegativeNumber);
  sub->add_option("--seed", c.seed, "seed for iterative solvers")->capture_default_str();
  sub->add_option("--tol", c.tol, "reference eigensolver tolerance")->check(CLI::PositiveNumber)->capture_default_str();
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("WAVEBAND_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

RunOptions run_options(const Common& c) {
  RunOptions o;
  o.threads = resolve_threads(c.threads);
  o.seed = c.seed;
  o.tol = c.tol;
  return o;
}

std::string show(double v) {
  if (!std::isfinite(v)) return "-";
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

void print_levels(const RunReport& r) {
  std::cout << std::left << std::setw(8) << "eps" << std::setw(6) << "level" << std::setw(18) << "E_eff"
            << std::setw(18) << "E_ref" << std::setw(18) << "|dE|" << "residual\n";
  for (const auto& row : r.levels)
    std::cout << std::setw(8) << row.eps << std::setw(6) << row.level << std::setw(18) << show(row.effective)
              << std::setw(18) << show(row.reference) << std::setw(18) << show(std::abs(row.reference - row.effective))
              << show(row.residual) << '\n';
}

void print_fits(const RunReport& r) {
  for (const auto& f : r.fits) {
    std::cout << std::left << std::setw(20) << f.quantity << " level " << f.level << "  order ";
    if (f.eps.empty()) std::cout << "n/a";
    else std::cout << std::fixed << std::setprecision(3) << f.fit.order << " +- " << f.fit.order_stderr;
    std::cout.unsetf(std::ios::floatfield);
    std::cout << std::setprecision(6);
    if (f.gated)
      std::cout << "  (need >= " << f.min_order
                << (std::isfinite(f.max_order) ? ", <= " + show(f.max_order) : std::string()) << ") "
                << (f.pass ? "pass" : "FAIL");
    std::cout << '\n';
  }
}

int finish(const RunReport& r, bool gate) {
  if (!gate || r.expectations_met()) return ok;
  std::cerr << "acceptance thresholds missed for " << r.scenario << '\n';
  return threshold;
}

int run_pipeline(const Common& c, bool effective, bool reference, bool dynamics, bool show_levels, bool gate) {
  const Scenario s = load_scenario(c.scenario);
  RunOptions o = run_options(c);
  o.effective = effective;
  o.reference = reference;
  o.dynamics = dynamics;
  const RunReport r = run_scenario(s, c.out, o);
  if (show_levels) print_levels(r);
  for (const auto& d : r.dynamics)
    std::cout << "dynamics eps " << d.eps << "  t " << d.time << "  difference " << d.difference << "  band weight "
              << d.band_weight << '\n';
  print_fits(r);
  std::cout << "artifacts: " << (std::filesystem::path(c.out) / s.name).string() << '\n';
  return finish(r, gate);
}

FiberBand scenario_band(const Scenario& s, const ScenarioModel& m, const Common& c) {
  BandOptions bo;
  bo.threads = resolve_threads(c.threads);
  bo.seed = c.seed;
  return solve_band(m.potential, m.grid, m.xgrid, s.band, bo);
}

int fiber_scan(const Common& c) {
  const Scenario s = load_scenario(c.scenario);
  const ScenarioModel m = build_model(s);
  const FiberBand band = scenario_band(s, m, c);
  const auto dir = std::filesystem::path(c.out) / s.name / "band";
  std::filesystem::create_directories(dir);
  export_band(band, dir.string());
  std::cout << "band " << band.band_index << "  periodicity " << to_string(band.periodicity) << "\n"
            << "E_f in [" << band.energy.minCoeff() << ", " << band.energy.maxCoeff() << "]  min gap "
            << band.gap.minCoeff() << "  boundary mass " << band.max_boundary_mass() << "\n"
            << "artifacts: " << dir.string() << '\n';
  return ok;
}

int couplings(const Common& c) {
  const Scenario s = load_scenario(c.scenario);
  const ScenarioModel m = build_model(s);
  const FiberBand band = scenario_band(s, m, c);
  CouplingOptions co;
  co.threads = resolve_threads(c.threads);
  const CouplingSet cs = compute_couplings(band, m.curve, m.grid, co);
  const auto dir = std::filesystem::path(c.out) / s.name;
  std::filesystem::create_directories(dir);
  write_couplings_csv((dir / "couplings.csv").string(), cs);
  std::cout << "born_huang in [" << cs.born_huang.minCoeff() << ", " << cs.born_huang.maxCoeff() << "]\n"
            << "connection in [" << cs.connection().minCoeff() << ", " << cs.connection().maxCoeff() << "]\n"
            << "a2 in [" << cs.a2.minCoeff() << ", " << cs.a2.maxCoeff() << "]\n"
            << "orthogonality defect " << cs.orthogonality_defect << '\n';
  if (s.fiber_dim == 2) std::cout << "angular coefficient " << angular_coefficient(band.phi.col(0), m.grid) << '\n';
  std::cout << "artifacts: " << (dir / "couplings.csv").string() << '\n';
  return ok;
}

int circuit_holonomy(const Common& c) {
  const Scenario s = load_scenario(c.scenario);
  const ScenarioModel m = build_model(s);
  if (m.curve.topology != Topology::circle) throw TopologyMismatch("circuit-holonomy needs a closed circuit");
  const FiberBand band = scenario_band(s, m, c);
  const CouplingSet cs = compute_couplings(band, m.curve, m.grid);
  // product of the slice overlaps once around the circuit; gauge invariant
  const double around = std::remainder(cs.link_phase.sum(), 2.0 * std::numbers::pi);
  nlohmann::json j{{"scenario", s.name},
                   {"band", band.band_index},
                   {"periodicity", to_string(band.periodicity)},
                   {"holonomy", band.holonomy},
                   {"gauge_rate", band.gauge_rate},
                   {"link_phase_total", cs.link_phase.sum()},
                   {"transport_phase", around}};
  const auto dir = std::filesystem::path(c.out) / s.name;
  std::filesystem::create_directories(dir);
  std::ofstream((dir / "holonomy.json").string()) << j.dump(2) << '\n';
  std::cout << "periodicity " << to_string(band.periodicity) << "  holonomy " << band.holonomy
            << "  transport factor " << std::cos(around) << '\n';
  return ok;
}

int list_scenarios(const std::string& dir_arg) {
  std::string dir = dir_arg;
  if (dir.empty()) {
    if (const char* env = std::getenv("WAVEBAND_SCENARIOS")) dir = env;
    else if (std::filesystem::is_directory("scenarios")) dir = "scenarios";
#ifdef WAVEBAND_SCENARIO_DIR
    else dir = WAVEBAND_SCENARIO_DIR;
#endif
  }
  if (dir.empty() || !std::filesystem::is_directory(dir)) throw ConfigError("no scenario directory found; use --dir");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      const Scenario s = load_scenario(f.string());
      std::cout << std::left << std::setw(18) << s.name << ' ' << s.description << '\n';
    } catch (const ConfigError& e) {
      std::cout << std::left << std::setw(18) << f.filename().string() << " invalid: " << e.what() << '\n';
    }
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"waveband: effective one-dimensional operators for thin quantum waveguides"};
  app.require_subcommand(1);
  Common c;
  std::string scenario_dir;

  auto* run = app.add_subcommand("run", "full pipeline over the eps list, gated on the scenario's expectations");
  auto* fiber = app.add_subcommand("fiber-scan", "solve and export the fiber band");
  auto* coup = app.add_subcommand("couplings", "band couplings as CSV");
  auto* eff = app.add_subcommand("effective-spectrum", "effective spectra only");
  auto* ref = app.add_subcommand("reference-spectrum", "effective and reference spectra, no gating");
  auto* conv = app.add_subcommand("converge", "spectra plus convergence fits, gated");
  auto* prop = app.add_subcommand("propagate", "toy dynamics: full versus effective propagation");
  auto* hol = app.add_subcommand("circuit-holonomy", "periodicity and transport phase of a band on a circuit");
  auto* list = app.add_subcommand("list-scenarios", "bundled scenarios");
  for (auto* sub : {run, fiber, coup, eff, ref, conv, prop, hol}) add_common(sub, c);
  list->add_option("--dir", scenario_dir, "scenario directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return config;
  }

  try {
    if (*run) return run_pipeline(c, true, true, true, true, true);
    if (*fiber) return fiber_scan(c);
    if (*coup) return couplings(c);
    if (*eff) return run_pipeline(c, true, false, false, true, false);
    if (*ref) return run_pipeline(c, true, true, false, true, false);
    if (*conv) return run_pipeline(c, true, true, false, false, true);
    if (*prop) return run_pipeline(c, false, false, true, false, true);
    if (*hol) return circuit_holonomy(c);
    if (*list) return list_scenarios(scenario_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return numerical;
  }
  return ok;
}
