#include "waveband/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <json.hpp>

#include "waveband/couplings.hpp"
#include "waveband/effective.hpp"
#include "waveband/reference.hpp"

namespace waveband {

namespace {

using json = nlohmann::json;

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string cell(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::ofstream open(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << std::setprecision(17);
  return out;
}

double band_weight(const FiberBand& band, const Vec<cplx>& psi) {
  const double total = tube_norm(band, psi);
  const double inside = line_norm(band.xgrid, project_to_band(band, psi));
  return total > 0.0 ? inside * inside / (total * total) : 0.0;
}

// Reference pairs belonging to the band, ascending, at most `levels`.
struct ReferenceLevels {
  std::vector<double> energy, weight;
};

ReferenceLevels reference_levels(const TubeOperator& tube, const FiberBand& band, int levels,
                                 const Eigen::VectorXd& effective, const RunOptions& opt) {
  ReferenceOptions ro;
  ro.tol = opt.tol;
  ro.seed = opt.seed;
  ro.threads = opt.threads;
  std::vector<std::pair<double, double>> found;
  auto collect = [&](const EigpairSet<double>& ref) {
    found.clear();
    for (Index j = 0; j < ref.size(); ++j) {
      const Vec<cplx> v = ref.eigenvectors.col(j).cast<cplx>();
      const double w = band_weight(band, v);
      if (band.band_index == 0 || w > 0.5) found.emplace_back(ref.eigenvalues(j), w);
    }
    std::sort(found.begin(), found.end());
  };
  if (band.band_index == 0) {
    ro.guard = 3;
    collect(reference_spectrum(tube, levels, ro));
  } else {
    // States of lower bands share this energy window; keep the ones that live
    // in the band. The window is widened until it covers the effective levels.
    const double sigma = 0.5 * (effective(0) + effective(levels - 1));
    const double half = 0.5 * (effective(levels - 1) - effective(0));
    const int limit = std::min<Index>(4 * levels + 16, tube.dimension() / 2);
    for (int k = levels + 4;; k = std::min(2 * k, limit)) {
      const auto ref = reference_spectrum_near(tube, sigma, k, ro);
      collect(ref);
      const double reach = (ref.eigenvalues.array() - sigma).abs().maxCoeff();
      if ((static_cast<int>(found.size()) >= levels && reach > 1.05 * half) || k == limit) break;
    }
  }
  if (static_cast<int>(found.size()) < levels)
    throw NonConvergence("reference solve found " + std::to_string(found.size()) + " of " + std::to_string(levels) +
                         " band states");
  ReferenceLevels out;
  for (int l = 0; l < levels; ++l) {
    out.energy.push_back(found[l].first);
    out.weight.push_back(found[l].second);
  }
  return out;
}

void add_fit(RunReport& r, const std::string& quantity, int level, const std::vector<double>& eps,
             const std::vector<double>& error) {
  FitRow row;
  row.quantity = quantity;
  row.level = level;
  for (std::size_t i = 0; i < eps.size(); ++i)
    if (std::isfinite(error[i]) && error[i] > 0.0) {
      row.eps.push_back(eps[i]);
      row.error.push_back(error[i]);
    }
  // differences at roundoff level carry no order information
  const bool noise = std::all_of(row.error.begin(), row.error.end(), [](double e) { return e < 1e-11; });
  if (row.eps.size() < 2 || noise) return;
  row.fit = fit_order(Eigen::Map<const Eigen::VectorXd>(row.eps.data(), static_cast<Index>(row.eps.size())),
                      Eigen::Map<const Eigen::VectorXd>(row.error.data(), static_cast<Index>(row.error.size())));
  r.fits.push_back(std::move(row));
}

void compute_fits(RunReport& r, const Scenario& s, const RunOptions& opt) {
  r.fits.clear();
  for (int l = 0; l < s.levels; ++l) {
    std::vector<double> eps, dE, res, tw, ho;
    for (const auto& row : r.levels) {
      if (row.level != l) continue;
      eps.push_back(row.eps);
      dE.push_back(std::abs(row.reference - row.effective));
      res.push_back(row.residual);
      tw.push_back(std::abs(row.reference - row.twist));
      ho.push_back(std::abs(row.reference - row.harmonic));
    }
    add_fit(r, "eigenvalue_error", l, eps, dE);
    add_fit(r, "quasimode_residual", l, eps, res);
    add_fit(r, "twist_error", l, eps, tw);
    add_fit(r, "ho_error", l, eps, ho);
  }
  std::vector<double> eps, diff;
  for (const auto& d : r.dynamics) {
    eps.push_back(d.eps);
    diff.push_back(d.difference);
  }
  add_fit(r, "dynamics_error", 0, eps, diff);

  const bool with_reference = opt.effective && opt.reference && s.run_reference;
  const bool with_dynamics = opt.dynamics && s.run_dynamics;
  for (const auto& e : s.expect) {
    if (e.quantity == "dynamics_error" ? !with_dynamics : !with_reference) continue;
    std::vector<int> lv = e.levels;
    if (lv.empty())
      for (int l = 0; l < (e.quantity == "dynamics_error" ? 1 : s.levels); ++l) lv.push_back(l);
    for (int l : lv) {
      auto it = std::find_if(r.fits.begin(), r.fits.end(),
                             [&](const FitRow& f) { return f.quantity == e.quantity && f.level == l; });
      if (it == r.fits.end()) {
        FitRow missing;
        missing.quantity = e.quantity;
        missing.level = l;
        r.fits.push_back(missing);
        it = r.fits.end() - 1;
        it->pass = false;
      } else {
        it->pass = it->fit.order >= e.min_order && it->fit.order <= e.max_order;
      }
      it->gated = true;
      it->min_order = e.min_order;
      it->max_order = e.max_order;
    }
  }
}

void write_outputs(const std::filesystem::path& dir, const Scenario& s, const RunReport& r, const FiberBand* band,
                   const CouplingSet* couplings) {
  std::filesystem::create_directories(dir);
  write_report_json((dir / "report.json").string(), s, r);

  auto ev = open(dir / "eigenvalues.csv");
  ev << "scenario,eps,level,E_eff,E_ref,abs_dE,residual\n";
  for (const auto& row : r.levels)
    ev << s.name << ',' << cell(row.eps) << ',' << row.level << ',' << cell(row.effective) << ','
       << cell(row.reference) << ',' << cell(std::abs(row.reference - row.effective)) << ',' << cell(row.residual)
       << '\n';

  auto cv = open(dir / "convergence.csv");
  cv << "quantity,level,eps,error,order,order_stderr,prefactor\n";
  for (const auto& f : r.fits)
    for (std::size_t i = 0; i < f.eps.size(); ++i)
      cv << f.quantity << ',' << f.level << ',' << cell(f.eps[i]) << ',' << cell(f.error[i]) << ','
         << cell(f.fit.order) << ',' << cell(f.fit.order_stderr) << ',' << cell(f.fit.prefactor) << '\n';

  if (couplings) write_couplings_csv((dir / "couplings.csv").string(), *couplings);

  if (band) {
    auto bd = open(dir / "band.dat");
    bd << "# x E_f gap boundary_mass\n";
    for (Index i = 0; i < band->slices(); ++i)
      bd << band->xgrid.x(i) << ' ' << band->energy(i) << ' ' << band->gap(i) << ' ' << band->boundary_mass(i) << '\n';
  }

  auto sp = open(dir / "spectrum.dat");
  sp << "# eps level E_eff E_ref E_twist E_ho residual leading_residual\n";
  for (const auto& row : r.levels)
    sp << row.eps << ' ' << row.level << ' ' << row.effective << ' ' << row.reference << ' ' << row.twist << ' '
       << row.harmonic << ' ' << row.residual << ' ' << row.leading_residual << '\n';

  // one gnuplot index per (quantity, level)
  auto cd = open(dir / "convergence.dat");
  for (const auto& f : r.fits) {
    if (f.eps.empty()) continue;
    cd << "# " << f.quantity << " level " << f.level << " order " << f.fit.order << "\n";
    for (std::size_t i = 0; i < f.eps.size(); ++i) cd << f.eps[i] << ' ' << f.error[i] << '\n';
    cd << "\n\n";
  }

  if (!r.dynamics.empty()) {
    auto dd = open(dir / "dynamics.dat");
    for (const auto& d : r.dynamics) {
      dd << "# eps " << d.eps << "\n# t difference\n";
      for (Index i = 0; i < d.times.size(); ++i) dd << d.times(i) << ' ' << d.trace(i) << '\n';
      dd << "\n\n";
    }
  }
}

}  // namespace

bool RunReport::expectations_met() const {
  return std::all_of(fits.begin(), fits.end(), [](const FitRow& f) { return !f.gated || f.pass; });
}

void write_report_json(const std::string& path, const Scenario& s, const RunReport& r) {
  json j;
  j["schema"] = "waveband-report/1";
  j["scenario"] = s.name;
  j["description"] = s.description;
  j["complete"] = r.complete;
  j["error"] = r.error.empty() ? json(nullptr) : json(r.error);
  j["units"] = {{"x", "arc length"},
                {"eps", "tube width scale (dimensionless)"},
                {"energy", "dilated fiber units; tube energies are E_f + O(eps)"},
                {"residual", "weighted L2 norm on the tube grid"},
                {"time", "dilated time"}};
  j["grids"] = {{"M", s.M}, {"N", s.N}, {"r_max", s.r_max}, {"fiber_dim", s.fiber_dim}};
  j["band"] = {{"index", s.band},
               {"periodicity", r.periodicity.empty() ? json(nullptr) : json(r.periodicity)},
               {"holonomy", number(r.holonomy)},
               {"min_gap", number(r.min_gap)},
               {"max_boundary_mass", number(r.max_boundary_mass)},
               {"angular_coefficient", number(r.angular_coefficient)}};
  j["eps"] = r.eps;
  json spectra = json::array();
  for (double e : r.eps) {
    json t;
    t["eps"] = e;
    for (const char* key : {"effective", "reference", "reference_band_weight", "residual", "leading_residual", "twist",
                            "harmonic"})
      t[key] = json::array();
    for (const auto& row : r.levels) {
      if (row.eps != e) continue;
      t["effective"].push_back(number(row.effective));
      t["reference"].push_back(number(row.reference));
      t["reference_band_weight"].push_back(number(row.reference_band_weight));
      t["residual"].push_back(number(row.residual));
      t["leading_residual"].push_back(number(row.leading_residual));
      t["twist"].push_back(number(row.twist));
      t["harmonic"].push_back(number(row.harmonic));
    }
    spectra.push_back(t);
  }
  j["spectra"] = spectra;
  json fits = json::array();
  for (const auto& f : r.fits)
    fits.push_back({{"quantity", f.quantity},
                    {"level", f.level},
                    {"eps", f.eps},
                    {"error", f.error},
                    {"order", f.eps.empty() ? json(nullptr) : json(f.fit.order)},
                    {"order_stderr", f.eps.size() > 2 ? json(f.fit.order_stderr) : json(nullptr)},
                    {"prefactor", f.eps.empty() ? json(nullptr) : json(f.fit.prefactor)},
                    {"points", f.fit.points},
                    {"gated", f.gated},
                    {"min_order", f.gated ? json(f.min_order) : json(nullptr)},
                    {"max_order", f.gated ? number(f.max_order) : json(nullptr)},
                    {"pass", f.pass}});
  j["fits"] = fits;
  json dyn = json::array();
  for (const auto& d : r.dynamics)
    dyn.push_back({{"eps", d.eps}, {"time", d.time}, {"difference", d.difference}, {"band_weight", d.band_weight}});
  j["dynamics"] = dyn;
  j["expectations_met"] = r.expectations_met();
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

RunReport run_scenario(const Scenario& s, const std::string& out_root, const RunOptions& opt) {
  RunReport r;
  r.scenario = s.name;
  r.eps = s.eps;
  const std::filesystem::path dir = std::filesystem::path(out_root) / s.name;
  std::optional<FiberBand> band;
  std::optional<CouplingSet> couplings;
  auto log = [&](const std::string& msg) { std::clog << "[" << s.name << "] " << msg << std::endl; };

  try {
    const ScenarioModel m = build_model(s);
    BandOptions bo;
    bo.threads = opt.threads;
    bo.seed = opt.seed;
    band = solve_band(m.potential, m.grid, m.xgrid, s.band, bo);
    r.periodicity = to_string(band->periodicity);
    r.holonomy = band->holonomy;
    r.min_gap = band->gap.minCoeff();
    r.max_boundary_mass = band->max_boundary_mass();
    if (s.fiber_dim == 2) r.angular_coefficient = angular_coefficient(band->phi.col(0), m.grid);
    log("band " + std::to_string(s.band) + ": " + r.periodicity + ", E_f in [" + cell(band->energy.minCoeff()) + ", " +
        cell(band->energy.maxCoeff()) + "]");

    CouplingOptions co;
    co.threads = opt.threads;
    couplings = compute_couplings(*band, m.curve, m.grid, co);

    std::optional<HarmonicCorollary> ho;
    if (s.ho_prediction) ho = build_ho_corollary_operator(band->energy, m.xgrid, -1.0, s.levels);
    Eigen::VectorXd twist_levels;
    if (s.twist_prediction) {
      const auto tw = assemble_twist(m.curve, m.xgrid, m.twist, r.angular_coefficient, band->periodicity);
      twist_levels = spectrum(tw, s.levels).eigenvalues;
    }
    const double band_floor = band->energy.mean();
    const bool with_reference = opt.reference && s.run_reference;

    if (opt.effective)
      for (double eps : s.eps) {
        const auto eff = m.curve.topology == Topology::circle
                             ? assemble_qwc(*band, m.curve, *couplings, eps, s.include_quartic)
                             : assemble_qwg(*couplings, *band, m.curve, eps, s.include_quartic);
        const auto es = spectrum(eff, s.levels);
        std::vector<LevelRow> rows(static_cast<std::size_t>(s.levels));
        for (int l = 0; l < s.levels; ++l) {
          auto& row = rows[static_cast<std::size_t>(l)];
          row.eps = eps;
          row.level = l;
          row.effective = es.eigenvalues(l);
          if (s.twist_prediction) row.twist = band_floor + eps * eps * twist_levels(l);
          if (ho) row.harmonic = ho->energy + eps * ho->analytic(l);
        }
        if (with_reference) {
          TubeOperatorSpec spec{m.curve, m.xgrid, m.grid, eps, m.potential};
          const TubeOperator tube = assemble_tube(spec);
          const auto ref = reference_levels(tube, *band, s.levels, es.eigenvalues, opt);
          for (int l = 0; l < s.levels; ++l) {
            auto& row = rows[static_cast<std::size_t>(l)];
            row.reference = ref.energy[static_cast<std::size_t>(l)];
            row.reference_band_weight = ref.weight[static_cast<std::size_t>(l)];
            const auto q = lift_quasimode(*band, es.eigenvectors.col(l), es.eigenvalues(l), tube);
            row.residual = q.residual;
            row.leading_residual = q.leading_residual;
          }
        }
        std::ostringstream msg;
        msg << "eps " << eps << ": E_eff " << rows[0].effective;
        if (with_reference) msg << ", E_ref " << rows[0].reference << ", residual " << rows[0].residual;
        log(msg.str());
        r.levels.insert(r.levels.end(), rows.begin(), rows.end());
      }

    if (opt.dynamics && s.run_dynamics) {
      Index start = 0;
      band->energy.minCoeff(&start);
      const double x1 = m.xgrid.x(start) + s.dynamics.offset;
      for (double eps : s.eps) {
        const auto eff = assemble_qwg(*couplings, *band, m.curve, eps, s.include_quartic);
        const double width = s.dynamics.width_factor * std::sqrt(eps);
        Vec<cplx> chi0(m.xgrid.M);
        for (Index i = 0; i < m.xgrid.M; ++i) {
          const double d = (m.xgrid.x(i) - x1) / width;
          chi0(i) = std::exp(-0.5 * d * d);
        }
        TubeOperatorSpec spec{m.curve, m.xgrid, m.grid, eps, m.potential};
        const TubeOperator tube = assemble_tube(spec);
        const double t = s.dynamics.time_factor / eps;
        const auto res = propagate_toy(tube, *band, eff.matrix, chi0, t, s.dynamics.dt, s.dynamics.samples);
        DynamicsRow d;
        d.eps = eps;
        d.time = t;
        d.difference = res.difference(res.difference.size() - 1);
        d.band_weight = res.band_weight(res.band_weight.size() - 1);
        d.times = res.times;
        d.trace = res.difference;
        log("dynamics eps " + cell(eps) + ": difference " + cell(d.difference) + " at t = " + cell(t));
        r.dynamics.push_back(std::move(d));
      }
    }
    compute_fits(r, s, opt);
    r.complete = true;
  } catch (const std::exception& e) {
    r.error = e.what();
    r.complete = false;
    if (opt.write) {
      try {
        compute_fits(r, s, opt);
      } catch (const std::exception&) {
        r.fits.clear();
      }
      write_outputs(dir, s, r, band ? &*band : nullptr, couplings ? &*couplings : nullptr);
    }
    throw;
  }
  if (opt.write) write_outputs(dir, s, r, band ? &*band : nullptr, couplings ? &*couplings : nullptr);
  return r;
}

}  // namespace waveband
