#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "waveband/fit.hpp"
#include "waveband/scenario.hpp"

namespace waveband {

struct RunOptions {
  int threads = 1;
  std::uint64_t seed = 0x5eed;
  double tol = 1e-9;  // reference eigensolver tolerance
  bool effective = true;
  bool reference = true;  // still subject to the scenario's run_reference flag
  bool dynamics = true;   // still subject to run_dynamics
  bool write = true;
};

inline constexpr double kNotComputed = std::numeric_limits<double>::quiet_NaN();

struct LevelRow {
  double eps = 0.0;
  int level = 0;
  double effective = kNotComputed;
  double reference = kNotComputed;
  double reference_band_weight = kNotComputed;
  double residual = kNotComputed;          // corrected quasimode
  double leading_residual = kNotComputed;  // phi_f chi alone
  double twist = kNotComputed;             // E_f + eps^2 E(H_twist)
  double harmonic = kNotComputed;          // E_f(x0) + eps E(H_HO)
};

struct FitRow {
  std::string quantity;
  int level = 0;
  std::vector<double> eps;
  std::vector<double> error;
  ConvergenceFit fit;
  bool gated = false;
  double min_order = 0.0;
  double max_order = std::numeric_limits<double>::infinity();
  bool pass = true;
};

struct DynamicsRow {
  double eps = 0.0;
  double time = 0.0;
  double difference = 0.0;   // at the final time
  double band_weight = 0.0;
  Eigen::VectorXd times, trace;
};

struct RunReport {
  std::string scenario;
  bool complete = false;
  std::string error;
  std::string periodicity;
  double holonomy = 0.0;
  double min_gap = kNotComputed;
  double max_boundary_mass = kNotComputed;
  double angular_coefficient = kNotComputed;
  std::vector<double> eps;
  std::vector<LevelRow> levels;
  std::vector<FitRow> fits;
  std::vector<DynamicsRow> dynamics;

  bool expectations_met() const;
};

// Runs the fiber -> couplings -> effective -> reference chain over the eps list
// and writes out_root/<name>/. On a module error the partial report is written
// flagged incomplete and the error is rethrown.
RunReport run_scenario(const Scenario& s, const std::string& out_root, const RunOptions& opt = {});

void write_report_json(const std::string& path, const Scenario& s, const RunReport& r);

}  // namespace waveband
