#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "waveband/fit.hpp"
#include "waveband/pipeline.hpp"

using namespace waveband;

namespace {

const std::string kMinimal = R"({
  "name": "tiny",
  "geometry": { "topology": "line", "length": 4.0 },
  "potential": { "kind": "harmonic", "omega": [1.0, 1.0] },
  "grids": { "M": 16, "N": 16, "r_max": 4.0 },
  "eps": [0.2, 0.1, 0.05],
  "levels": 2
})";

int config_line(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  REQUIRE(at != std::string::npos);
  return s.replace(at, from.size(), to);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream b;
  b << in.rdbuf();
  return b.str();
}

}  // namespace

TEST_CASE("fit_order recovers exact power laws") {
  Eigen::VectorXd eps(3), cube(3), square(3);
  eps << 0.2, 0.1, 0.05;
  for (int i = 0; i < 3; ++i) {
    cube(i) = std::pow(eps(i), 3);
    square(i) = 2.0 * eps(i) * eps(i);
  }
  const auto a = fit_order(eps, cube);
  CHECK(a.order == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(a.order_stderr < 1e-10);
  const auto b = fit_order(eps, square);
  CHECK(b.order == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(b.prefactor == doctest::Approx(2.0).epsilon(1e-12));
  cube(1) = 0.0;
  CHECK_THROWS_AS(fit_order(eps, cube), NonPositiveError);
  CHECK_THROWS_AS(fit_order(eps.head(1), square.head(1)), DimensionTooSmall);
}

TEST_CASE("scenario parsing fills defaults") {
  const auto s = parse_scenario(kMinimal);
  CHECK(s.name == "tiny");
  CHECK(s.eps.size() == 3);
  CHECK(s.fiber_dim == 2);
  CHECK(s.band == 0);
  CHECK(s.run_reference);
  CHECK(!s.run_dynamics);
  CHECK(s.potential.omega2 == 1.0);
}

TEST_CASE("config errors carry the offending line") {
  CHECK(config_line(replace(kMinimal, "[0.2, 0.1, 0.05]", "[0.05,\n 0.1,\n 0.2]")) == 7);
  CHECK(config_line(replace(kMinimal, "[0.2, 0.1, 0.05]", "[0.2, 0.1]")) == 6);
  CHECK(config_line(replace(kMinimal, "\"levels\": 2", "\"levels\": 2,\n  \"colour\": 1")) == 8);
  CHECK(config_line(replace(kMinimal, "\"M\": 16", "\"M\": \"many\"")) == 5);
  CHECK(config_line(replace(kMinimal, "\"line\"", "\"helix\"")) == 3);
  CHECK(config_line(replace(kMinimal, "\"levels\": 2", "\"levels\": 2,")) == 8);
  CHECK(config_line(replace(kMinimal, "\"M\": 16", "\"M\": 4000, \"N\": 400")) == 5);
  CHECK(config_line(replace(kMinimal, "  \"levels\": 2\n", "  \"levels\": 2,\n  \"expect\": [\n    { \"quantity\": \"speed\", \"min_order\": 1 }\n  ]\n")) == 9);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST_CASE("bundled scenarios parse and build") {
  for (const char* name : {"straight-ho", "twist-circle", "mobius-circle", "ho-corollary", "toy-dynamics"}) {
    CAPTURE(name);
    const auto s = load_scenario(std::string(WAVEBAND_SCENARIO_DIR) + "/" + name + ".json");
    CHECK(s.name == name);
    const auto m = build_model(s);
    CHECK(m.xgrid.M == s.M);
    CHECK(m.grid.N == s.N);
  }
  const auto s = load_scenario(std::string(WAVEBAND_SCENARIO_DIR) + "/mobius-circle.json");
  const auto m = build_model(s);
  CHECK(m.curve.topology == Topology::circle);
  CHECK(m.twist.half_twist(m.curve.length));
}

TEST_CASE("straight-ho runs end to end with separable levels and deterministic output") {
  const auto s = load_scenario(std::string(WAVEBAND_SCENARIO_DIR) + "/straight-ho.json");
  const auto root = std::filesystem::temp_directory_path() / "waveband_cli_test";
  std::filesystem::remove_all(root);
  RunOptions opt;
  const auto r = run_scenario(s, (root / "a").string(), opt);
  CHECK(r.complete);
  CHECK(r.periodicity == "periodic");
  REQUIRE(r.levels.size() == s.eps.size() * static_cast<std::size_t>(s.levels));

  const auto m = build_model(s);
  const double ef = lowest_eigenpairs(assemble_fiber_operator(0.0, m.potential, m.grid), 1, 1e-12).eigenvalues(0);
  for (const auto& row : r.levels) {
    const double lx = (2.0 - 2.0 * std::cos((row.level + 1) * std::numbers::pi / (m.xgrid.M + 1))) / (m.xgrid.h * m.xgrid.h);
    CHECK(row.effective == doctest::Approx(ef + row.eps * row.eps * lx).epsilon(1e-10));
    CHECK(row.reference == doctest::Approx(row.effective).epsilon(1e-9));
  }

  const auto dir = root / "a" / "straight-ho";
  for (const char* f : {"report.json", "eigenvalues.csv", "couplings.csv", "convergence.csv", "band.dat", "spectrum.dat"})
    CHECK(std::filesystem::exists(dir / f));
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  for (const char* key : {"schema", "scenario", "complete", "units", "grids", "band", "eps", "spectra", "fits",
                          "dynamics", "expectations_met"})
    CHECK(report.contains(key));
  CHECK(report["complete"] == true);
  CHECK(slurp(dir / "eigenvalues.csv").rfind("scenario,eps,level,E_eff,E_ref,abs_dE,residual\n", 0) == 0);

  run_scenario(s, (root / "b").string(), opt);
  for (const char* f : {"eigenvalues.csv", "couplings.csv", "convergence.csv"})
    CHECK(slurp(dir / f) == slurp(root / "b" / "straight-ho" / f));
}

TEST_CASE("a failing stage leaves an incomplete report") {
  auto s = parse_scenario(kMinimal);
  s.geometry.topology = Topology::circle;  // circle of radius 1 with r_max 4: eps 0.2 degenerates the metric
  s.geometry.radius = 1.0;
  s.geometry.length = 2.0 * std::numbers::pi;
  s.r_max = 8.0;
  s.N = 16;
  const auto root = std::filesystem::temp_directory_path() / "waveband_cli_fail";
  std::filesystem::remove_all(root);
  CHECK_THROWS_AS(run_scenario(s, root.string()), MetricDegenerate);
  const auto report = nlohmann::json::parse(slurp(root / "tiny" / "report.json"));
  CHECK(report["complete"] == false);
  CHECK(report["error"].is_string());
}
