#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "waveband/fiber.hpp"
#include "waveband/geometry.hpp"

namespace waveband {

struct TwistConfig {
  std::string kind = "none";  // none | constant | step
  double rate = 0.0;          // constant
  double total = 0.0;         // step: total angle
  double center = 0.0;
  double width = 1.0;
};

struct GeometryConfig {
  Topology topology = Topology::line;
  double radius = 1.0;  // circle
  double length = 0.0;  // line
  std::string kappa = "none";  // none | constant | bump | table (lines only for bump)
  double kappa0 = 0.0;
  double kappa_center = 0.0;
  double kappa_width = 1.0;
  std::string table;  // CSV x, kappa1, kappa2, alpha
  TwistConfig twist;
};

struct PotentialConfig {
  // harmonic: omega1^2 n1^2 + omega2^2 n2^2, rotated by the twist
  // width_family: omega(x)^2 |n|^2, omega = base + amplitude tanh^2((x - center)/width)
  // csv: tabulated cross-section profile, rotated by the twist
  std::string kind = "harmonic";
  double omega1 = 1.0, omega2 = 1.0;
  double base = 1.0, amplitude = 0.5, center = 0.0, width = 1.0;
  std::string csv;
  bool reflection_symmetric = false;
};

struct DynamicsConfig {
  double dt = 0.01;
  double time_factor = 1.0;       // t = time_factor / eps
  double offset = 1.0;            // packet starts at x_min(E_f) + offset
  double width_factor = 1.0;      // packet width = width_factor sqrt(eps)
  int samples = 20;
};

struct Expectation {
  // eigenvalue_error | quasimode_residual | twist_error | ho_error | dynamics_error
  std::string quantity;
  double min_order = 0.0;
  double max_order = std::numeric_limits<double>::infinity();
  std::vector<int> levels;
};

struct Scenario {
  std::string name;
  std::string description;
  std::string base_dir;
  GeometryConfig geometry;
  PotentialConfig potential;
  Index M = 64;
  Index N = 24;
  double r_max = 5.0;
  int fiber_dim = 2;
  std::vector<double> eps;
  int levels = 3;
  int band = 0;
  bool include_quartic = true;
  bool run_reference = true;
  bool run_dynamics = false;
  bool twist_prediction = false;  // also compare against H_twist
  bool ho_prediction = false;     // also compare against the harmonic corollary
  DynamicsConfig dynamics;
  std::vector<Expectation> expect;
};

// Upper bound on tube unknowns M * N^k.
inline constexpr Index kMaxTubeUnknowns = 500000;

// Parses and validates; errors are ConfigError with the offending line.
Scenario parse_scenario(const std::string& text, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

struct ScenarioModel {
  CurveSpec curve;
  Grid1D xgrid;
  TwistProfile twist;
  PotentialFamily potential;
  CrossSectionGrid grid;
};

ScenarioModel build_model(const Scenario& s);

}  // namespace waveband
