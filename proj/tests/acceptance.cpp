// End-to-end acceptance run: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "waveband/couplings.hpp"
#include "waveband/effective.hpp"
#include "waveband/pipeline.hpp"
#include "waveband/reference.hpp"

using namespace waveband;

namespace {

const double pi = std::numbers::pi;
const std::string kOut = "acceptance_out";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

Scenario bundled(const std::string& name) {
  return load_scenario(std::string(WAVEBAND_SCENARIO_DIR) + "/" + name + ".json");
}

const FitRow* find_fit(const RunReport& r, const std::string& quantity, int level) {
  for (const auto& f : r.fits)
    if (f.quantity == quantity && f.level == level && !f.eps.empty()) return &f;
  return nullptr;
}

// Checks fitted orders of one quantity over the given levels.
Outcome orders(const RunReport& r, const std::string& quantity, std::vector<int> levels, double min_order) {
  Outcome o{true, quantity + " orders"};
  for (int l : levels) {
    const FitRow* f = find_fit(r, quantity, l);
    if (!f) {
      o.pass = false;
      o.detail += " l=" + std::to_string(l) + ":missing";
      continue;
    }
    o.pass = o.pass && f->fit.order >= min_order;
    o.detail += " l=" + std::to_string(l) + ":" + fmt(f->fit.order, 3);
  }
  o.detail += " (need >= " + fmt(min_order) + ")";
  return o;
}

RunReport twist_run() {
  static std::optional<RunReport> cached;
  if (!cached) {
    RunOptions opt;
    opt.dynamics = false;
    cached = run_scenario(bundled("twist-circle"), kOut, opt);
  }
  return *cached;
}

Outcome twist_corollary() { return orders(twist_run(), "twist_error", {0, 1, 2}, 2.5); }

Outcome quasimode_residual() {
  const auto r = twist_run();
  Outcome o = orders(r, "quasimode_residual", {0, 1}, 2.5);
  // leading order phi_f chi alone, for reference
  for (int l : {0, 1}) {
    std::vector<double> eps, res;
    for (const auto& row : r.levels)
      if (row.level == l) {
        eps.push_back(row.eps);
        res.push_back(row.leading_residual);
      }
    const auto f = fit_order(Eigen::Map<Eigen::VectorXd>(eps.data(), eps.size()),
                             Eigen::Map<Eigen::VectorXd>(res.data(), res.size()));
    o.detail += "; uncorrected l=" + std::to_string(l) + ":" + fmt(f.order, 3);
  }
  return o;
}

Outcome harmonic_corollary() {
  RunOptions opt;
  opt.dynamics = false;
  const auto r = run_scenario(bundled("ho-corollary"), kOut, opt);
  return orders(r, "ho_error", {0, 1}, 1.7);
}

Outcome moebius() {
  const auto s = bundled("mobius-circle");
  const auto m = build_model(s);
  const auto ground = solve_band(m.potential, m.grid, m.xgrid, 0);
  const auto band = solve_band(m.potential, m.grid, m.xgrid, 1);
  Outcome o;
  o.detail = "bands " + to_string(ground.periodicity) + "/" + to_string(band.periodicity);
  bool ok = ground.periodicity == Periodicity::periodic && band.periodicity == Periodicity::antiperiodic;

  const double eps = 0.05, R = 1.0;
  const auto c = compute_couplings(band, m.curve, m.grid);
  const auto eff = spectrum(assemble_qwc(band, m.curve, c, eps), 6);
  const auto tube = assemble_tube(TubeOperatorSpec{m.curve, m.xgrid, m.grid, eps, m.potential});
  const double sigma = 0.5 * (eff.eigenvalues(0) + eff.eigenvalues(5));
  const auto near = reference_spectrum_near(tube, sigma, 10);
  std::vector<double> ref;
  for (Index j = 0; j < near.size(); ++j) {
    const Vec<cplx> v = near.eigenvectors.col(j).cast<cplx>();
    const double inside = line_norm(band.xgrid, project_to_band(band, v));
    const double total = tube_norm(band, v);
    if (inside * inside > 0.5 * total * total) ref.push_back(near.eigenvalues(j));
  }
  std::sort(ref.begin(), ref.end());
  if (ref.size() < 6) {
    o.detail += "; only " + std::to_string(ref.size()) + " band states found";
    return o;
  }
  // gaps above the band bottom in units of eps^2/R^2: (m+1/2)^2 - 1/4
  const double ideal[6] = {0.0, 0.0, 2.0, 2.0, 6.0, 6.0};
  double worst_ref = 0.0, worst_ideal = 0.0, split = 0.0;
  for (int l = 2; l < 6; ++l) {
    const double g_ref = ref[l] - ref[0];
    const double g_eff = eff.eigenvalues(l) - eff.eigenvalues(0);
    worst_ref = std::max(worst_ref, std::abs(g_ref - g_eff) / g_eff);
    worst_ideal = std::max(worst_ideal, std::abs(g_ref / (eps * eps / (R * R)) - ideal[l]) / ideal[l]);
  }
  for (int l = 0; l < 6; l += 2) split = std::max(split, std::abs(ref[l + 1] - ref[l]));
  ok = ok && worst_ref < 0.1 && worst_ideal < 0.1 && split < eps * eps * eps;
  o.pass = ok;
  o.detail += "; ladder vs qwc " + fmt(worst_ref, 3) + ", vs (m+1/2)^2 " + fmt(worst_ideal, 3) + " (need < 0.1); split " +
              fmt(split, 3) + " (need < " + fmt(eps * eps * eps, 3) + ")";
  return o;
}

Outcome toy_dynamics() {
  RunOptions opt;
  opt.reference = false;
  const auto r = run_scenario(bundled("toy-dynamics"), kOut, opt);
  Outcome o{r.dynamics.size() == 3, "differences"};
  for (const auto& d : r.dynamics) o.detail += " " + fmt(d.difference, 3);
  o.detail += "; ratios";
  for (std::size_t i = 1; i < r.dynamics.size(); ++i) {
    const double ratio = r.dynamics[i].difference / r.dynamics[i - 1].difference;
    o.pass = o.pass && ratio >= 0.3 && ratio <= 0.8;
    o.detail += " " + fmt(ratio, 3);
  }
  o.detail += " (need in [0.3, 0.8])";
  return o;
}

double fiber_angular(double omega1, double omega2, int level, Index N) {
  const auto grid = CrossSectionGrid::make(6.0, N, 2);
  const auto pot = PotentialFamily::constant(PotentialFamily::harmonic(omega1, omega2));
  const auto pairs = lowest_eigenpairs(assemble_fiber_operator(0.0, pot, grid), level + 1, 1e-12);
  Vec<cplx> phi = pairs.eigenvectors.col(level).cast<cplx>();
  phi /= std::sqrt(phi.squaredNorm() * grid.weight());
  return angular_coefficient(phi, grid);
}

double max_abs(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

Outcome invariants() {
  std::vector<std::pair<std::string, bool>> checks;

  // hermiticity of assembled operators
  auto [circle, cg] = make_circle(1.0, 32);
  const auto grid = CrossSectionGrid::make(5.0, 20, 2);
  const auto twisted = PotentialFamily::twisted(PotentialFamily::harmonic(1.0, 2.0), TwistProfile::constant_rate(0.5), true);
  const auto moeb = solve_band(twisted, grid, cg, 1);
  const auto mc = compute_couplings(moeb, circle, grid);
  const auto qwc = assemble_qwc(moeb, circle, mc, 0.1);
  const auto tube = assemble_tube(TubeOperatorSpec{circle, cg, grid, 0.1, twisted});
  checks.push_back({"hermitian", hermiticity_defect(qwc.matrix.matrix()) < 1e-13 &&
                                     hermiticity_defect(tube.symmetric.matrix()) < 1e-13});

  // gauge invariance and the real-gauge connection on a bent, x-dependent guide
  auto [line, lg] = make_line(6.0, 40, sech2_bump(0.4, 3.0, 0.8), sech2_bump(0.2, 2.5, 1.0));
  const auto shape = PotentialFamily::shape_family([](double x, double n1, double n2) {
    const double om = 1.0 + 0.3 * std::pow(std::tanh(x - 3.0), 2);
    const double shift = n1 - 0.2 * std::tanh(x - 3.0);
    return om * om * shift * shift + 2.0 * n2 * n2;
  });
  const auto band = solve_band(shape, grid, lg, 0);
  const auto c0 = compute_couplings(band, line, grid);
  FiberBand rephased = band;
  for (Index i = 0; i < lg.M; ++i) rephased.phi.col(i) *= std::polar(1.0, 1.3 * std::sin(0.7 * lg.x(i)));
  const auto c1 = compute_couplings(rephased, line, grid);
  checks.push_back({"gauge", max_abs(c1.born_huang - c0.born_huang) < 1e-8 && max_abs(c1.a2 - c0.a2) < 1e-8 &&
                                 max_abs(c1.a3 - c0.a3) < 1e-8 && max_abs(c1.a4 - c0.a4) < 1e-8});
  checks.push_back({"berry", max_abs(c0.connection()) < 1e-10});

  // angular coefficients
  // the central-difference angular operator is O(h^2); excited states are extrapolated
  const double c_ground = fiber_angular(1.0, 1.0, 0, 161);
  const double c_first = (4.0 * fiber_angular(1.0, 1.0, 1, 121) - fiber_angular(1.0, 1.0, 1, 61)) / 3.0;
  const double c_aniso = (4.0 * fiber_angular(1.0, 2.0, 1, 121) - fiber_angular(1.0, 2.0, 1, 61)) / 3.0;
  checks.push_back({"C=0", std::abs(c_ground) < 1e-6});
  checks.push_back({"C=1", std::abs(c_first - 1.0) < 1e-3});
  checks.push_back({"C=1.375", std::abs(c_aniso - 1.375) < 1e-3});

  // flat tube is a Kronecker sum
  auto [straight, sg] = make_line(3.0, 12);
  const auto small = CrossSectionGrid::make(4.0, 16, 2);
  const auto ho = PotentialFamily::constant(PotentialFamily::harmonic(1.0, 1.7));
  const double eps = 0.2;
  const auto flat = assemble_tube(TubeOperatorSpec{straight, sg, small, eps, ho});
  const SpMat<double> fiber = assemble_fiber_operator(0.0, ho, small).matrix();
  const Index F = small.size();
  double worst = 0.0;
  const Eigen::MatrixXd dense = Eigen::MatrixXd(flat.symmetric.matrix());
  const Eigen::MatrixXd fd = Eigen::MatrixXd(fiber);
  const double k = eps * eps / (sg.h * sg.h);
  for (Index i = 0; i < sg.M; ++i)
    for (Index j = 0; j < sg.M; ++j) {
      Eigen::MatrixXd block = Eigen::MatrixXd::Zero(F, F);
      if (i == j) block = fd + 2.0 * k * Eigen::MatrixXd::Identity(F, F);
      else if (std::abs(i - j) == 1) block = -k * Eigen::MatrixXd::Identity(F, F);
      worst = std::max(worst, (dense.block(i * F, j * F, F, F) - block).cwiseAbs().maxCoeff());
    }
  checks.push_back({"kronecker", worst < 1e-12});

  // integer gauge change on the circuit
  const auto base = spectrum(qwc, 6).eigenvalues;
  FiberBand wound = moeb;
  for (Index i = 0; i < cg.M; ++i) wound.phi.col(i) *= std::polar(1.0, 2.0 * pi * cg.x(i) / cg.length);
  const auto moved = spectrum(assemble_qwc(wound, circle, compute_couplings(wound, circle, grid), 0.1), 6).eigenvalues;
  checks.push_back({"winding", max_abs(moved - base) < 1e-9});

  Outcome o{true, ""};
  for (const auto& [name, ok] : checks) {
    o.pass = o.pass && ok;
    o.detail += name + (ok ? ":ok " : ":FAIL ");
  }
  o.detail += "(C values " + fmt(c_ground, 3) + ", " + fmt(c_first, 7) + ", " + fmt(c_aniso, 7) + ")";
  return o;
}

Outcome grid_convergence() {
  // separable benchmark: isotropic oscillator fiber (E = 2) on a straight guide of length 4
  const double L = 4.0, eps = 0.2;
  const auto pot = PotentialFamily::constant(PotentialFamily::harmonic(1.0, 1.0));
  const double exact_ref = 2.0 + eps * eps * pi * pi / (L * L);
  Eigen::VectorXd h(3), fiber_err(3), ref_err(3);
  const Index Ns[3] = {17, 33, 65};
  const Index Ms[3] = {15, 31, 63};
  for (int i = 0; i < 3; ++i) {
    const auto grid = CrossSectionGrid::make(4.0, Ns[i], 2);
    auto [curve, xg] = make_line(L, Ms[i]);
    h(i) = grid.h();
    fiber_err(i) = std::abs(lowest_eigenpairs(assemble_fiber_operator(0.0, pot, grid), 1, 1e-12).eigenvalues(0) - 2.0);
    const auto tube = assemble_tube(TubeOperatorSpec{curve, xg, grid, eps, pot});
    ref_err(i) = std::abs(reference_spectrum(tube, 1).eigenvalues(0) - exact_ref);
  }
  const auto ff = fit_order(h, fiber_err);
  const auto fr = fit_order(h, ref_err);
  Outcome o;
  o.pass = std::abs(ff.order - 2.0) <= 0.2 && std::abs(fr.order - 2.0) <= 0.2;
  o.detail = "fiber " + fmt(ff.order, 3) + ", reference " + fmt(fr.order, 3) + " (need 2.0 +- 0.2)";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 twist corollary", twist_corollary},
      {"2 harmonic corollary", harmonic_corollary},
      {"3 Moebius holonomy", moebius},
      {"4 quasimode residual", quasimode_residual},
      {"5 toy dynamics", toy_dynamics},
      {"6 invariant suite", invariants},
      {"7 grid convergence", grid_convergence},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << name << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
              << fmt(sec, 3) << " s]" << std::endl;
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
