#include "waveband/fiber.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "waveband/parallel.hpp"

namespace waveband {

CrossSectionGrid CrossSectionGrid::make(double r_max, Index N, int dim) {
  if (!(r_max > 0.0) || !std::isfinite(r_max)) throw InvalidRadius("fiber half-width must be positive");
  if (N < 16) throw DimensionTooSmall("fiber grid needs N >= 16 points per axis");
  if (dim != 1 && dim != 2) throw DimensionTooSmall("fiber dimension must be 1 or 2");
  return CrossSectionGrid{r_max, N, dim};
}

PotentialFamily PotentialFamily::constant(std::function<double(double, double)> v, bool reflection_symmetric) {
  PotentialFamily p;
  p.kind = Kind::constant;
  p.base = std::move(v);
  p.reflection_symmetric = reflection_symmetric;
  return p;
}

PotentialFamily PotentialFamily::twisted(std::function<double(double, double)> v, TwistProfile twist,
                                         bool reflection_symmetric) {
  PotentialFamily p;
  p.kind = Kind::twisted;
  p.base = std::move(v);
  p.twist = std::move(twist);
  p.reflection_symmetric = reflection_symmetric;
  return p;
}

PotentialFamily PotentialFamily::shape_family(std::function<double(double, double, double)> v) {
  PotentialFamily p;
  p.kind = Kind::shape_family;
  p.shape = std::move(v);
  return p;
}

std::function<double(double, double)> PotentialFamily::harmonic(double omega1, double omega2) {
  const double a = omega1 * omega1, b = omega2 * omega2;
  return [a, b](double n1, double n2) { return a * n1 * n1 + b * n2 * n2; };
}

double PotentialFamily::operator()(double x, double n1, double n2) const {
  switch (kind) {
    case Kind::shape_family:
      return shape(x, n1, n2);
    case Kind::constant:
      return base(n1, n2);
    case Kind::twisted: {
      const double a = twist.angle(x), c = std::cos(a), s = std::sin(a);
      return base(c * n1 - s * n2, s * n1 + c * n2);
    }
  }
  return 0.0;
}

std::function<double(double, double)> read_potential_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open potential table " + path);
  std::vector<double> n1s, n2s, vs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double a, b, v;
    if (!(ss >> a >> b >> v)) throw ConfigError(path + ": expected columns n1,n2,V", lineno);
    n1s.push_back(a);
    n2s.push_back(b);
    vs.push_back(v);
  }
  auto axis = [](std::vector<double> c) {
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end(), [](double p, double q) { return std::abs(p - q) < 1e-12; }), c.end());
    return c;
  };
  const auto ax1 = axis(n1s), ax2 = axis(n2s);
  const std::size_t n1 = ax1.size(), n2 = ax2.size();
  if (n1 < 2 || n2 < 2 || n1 * n2 != vs.size()) throw ConfigError(path + ": potential table must be a full tensor grid");
  auto find = [](const std::vector<double>& ax, double v) {
    return static_cast<std::size_t>(std::lower_bound(ax.begin(), ax.end(), v - 1e-12) - ax.begin());
  };
  auto table = std::make_shared<std::vector<double>>(n1 * n2, 0.0);
  for (std::size_t r = 0; r < vs.size(); ++r) (*table)[find(ax1, n1s[r]) * n2 + find(ax2, n2s[r])] = vs[r];
  return [table, ax1, ax2](double a, double b) {
    auto locate = [](const std::vector<double>& ax, double v, std::size_t& i, double& t) {
      v = std::clamp(v, ax.front(), ax.back());
      i = std::min<std::size_t>(static_cast<std::size_t>(std::upper_bound(ax.begin(), ax.end(), v) - ax.begin()),
                                ax.size() - 1);
      i = i == 0 ? 0 : i - 1;
      t = (v - ax[i]) / (ax[i + 1] - ax[i]);
    };
    std::size_t i, j;
    double s, t;
    locate(ax1, a, i, s);
    locate(ax2, b, j, t);
    const std::size_t m = ax2.size();
    const auto& T = *table;
    return (1 - s) * (1 - t) * T[i * m + j] + s * (1 - t) * T[(i + 1) * m + j] + (1 - s) * t * T[i * m + j + 1] +
           s * t * T[(i + 1) * m + j + 1];
  };
}

Index rotate_quarter(const CrossSectionGrid& grid, Index p, int q) {
  if (grid.dim == 1) return q % 2 == 0 ? p : grid.N - 1 - p;
  const Index N = grid.N, a = p / N, b = p % N;
  switch (((q % 4) + 4) % 4) {
    case 0:
      return p;
    case 1:  // (N1, N2) -> (N2, -N1)
      return grid.index(b, N - 1 - a);
    case 2:
      return grid.index(N - 1 - a, N - 1 - b);
    default:  // (N1, N2) -> (-N2, N1)
      return grid.index(N - 1 - b, a);
  }
}

SliceFrame SliceFrame::choose(const PotentialFamily& pot, const CrossSectionGrid& grid, const Grid1D& xgrid,
                              bool prefer_corotating) {
  SliceFrame f;
  const Index M = xgrid.M;
  f.angle = Eigen::VectorXd::Zero(M);
  f.rate = Eigen::VectorXd::Zero(M);
  f.rate_mid = Eigen::VectorXd::Zero(M);
  int q = 0;
  if (pot.rotates() && grid.dim == 2 && prefer_corotating) {
    q = xgrid.boundary == Boundary::periodic ? pot.twist.quarter_turns(xgrid.length) : 0;
    if (q >= 0) {
      f.corotating = true;
      for (Index i = 0; i < M; ++i) {
        f.angle(i) = pot.twist.angle(xgrid.x(i));
        f.rate(i) = pot.twist.rate(xgrid.x(i));
        f.rate_mid(i) = pot.twist.rate(xgrid.x(i) + 0.5 * xgrid.h);
      }
    } else {
      q = 0;
    }
  }
  f.quarter_turns = q;
  f.wrap.resize(static_cast<std::size_t>(grid.size()));
  for (Index p = 0; p < grid.size(); ++p) f.wrap[static_cast<std::size_t>(p)] = rotate_quarter(grid, p, q);
  return f;
}

bool SliceFrame::wraps_identity() const { return quarter_turns == 0; }

Eigen::Vector2d SliceFrame::slice_kappa(const CurveSpec& curve, double x, double alpha) const {
  const Eigen::Vector2d k = curve.kappa(x);
  if (!corotating) return k;
  const double c = std::cos(alpha), s = std::sin(alpha);
  return {c * k(0) - s * k(1), s * k(0) + c * k(1)};
}

SparseHermitianOp<double> assemble_fiber_operator(double x, const PotentialFamily& pot, const CrossSectionGrid& grid,
                                                  bool corotating) {
  if (corotating && pot.kind == PotentialFamily::Kind::shape_family)
    throw GridMismatch("co-rotating frame requires a twisted or constant potential");
  const Index N = grid.N, F = grid.size();
  const double inv_h2 = 1.0 / (grid.h() * grid.h());
  Triplets<double> t;
  t.reserve(static_cast<std::size_t>(F * (2 * grid.dim + 1)));
  for (Index p = 0; p < F; ++p) {
    const Eigen::Vector2d n = grid.point(p);
    const double v = corotating ? pot.body(n(0), n(1)) : pot(x, n(0), n(1));
    if (!std::isfinite(v)) throw ConfigError("potential is not finite on the fiber grid");
    t.emplace_back(p, p, 2.0 * grid.dim * inv_h2 + v);
    if (grid.dim == 1) {
      if (p > 0) t.emplace_back(p, p - 1, -inv_h2);
      if (p + 1 < N) t.emplace_back(p, p + 1, -inv_h2);
    } else {
      const Index a = p / N, b = p % N;
      if (a > 0) t.emplace_back(p, p - N, -inv_h2);
      if (a + 1 < N) t.emplace_back(p, p + N, -inv_h2);
      if (b > 0) t.emplace_back(p, p - 1, -inv_h2);
      if (b + 1 < N) t.emplace_back(p, p + 1, -inv_h2);
    }
  }
  return SparseHermitianOp<double>::from_triplets(F, t);
}

std::string to_string(Periodicity p) { return p == Periodicity::periodic ? "periodic" : "antiperiodic"; }

double ring_mass(const CrossSectionGrid& grid, const Vec<cplx>& f) {
  const Index N = grid.N;
  double m = 0.0;
  if (grid.dim == 1) {
    m = std::norm(f(0)) + std::norm(f(N - 1));
  } else {
    for (Index a = 0; a < N; ++a)
      for (Index b = 0; b < N; ++b)
        if (a == 0 || b == 0 || a == N - 1 || b == N - 1) m += std::norm(f(grid.index(a, b)));
  }
  return m * grid.weight();
}

bool FiberBand::neighbour(Index i, int offset, Vec<cplx>& out) const {
  const Index M = xgrid.M, j = i + offset;
  if (j >= 0 && j < M) {
    out = phi.col(j);
    return true;
  }
  if (xgrid.boundary == Boundary::dirichlet) return false;
  const Index F = grid.size();
  out.resize(F);
  if (j >= M) {
    const Index src = j - M;
    for (Index p = 0; p < F; ++p) out(p) = phi(frame.wrap[static_cast<std::size_t>(p)], src);
  } else {
    const Index src = j + M;
    for (Index p = 0; p < F; ++p) out(frame.wrap[static_cast<std::size_t>(p)]) = phi(p, src);
  }
  return true;
}

namespace {

struct SliceSolution {
  Eigen::VectorXd values;
  Mat<double> vectors;  // unit weighted norm
};

SliceSolution solve_slice(const SparseHermitianOp<double>& op, const CrossSectionGrid& grid, int count,
                          const BandOptions& opt) {
  EigenOptions eo;
  eo.tol = opt.tol;
  eo.seed = opt.seed;
  eo.block_size = std::clamp(count, 2, 8);
  eo.max_basis = std::max(4 * count + 8, 40);
  auto pairs = lowest_eigenpairs(op, count, opt.tol, eo);
  SliceSolution s;
  s.values = pairs.eigenvalues;
  s.vectors = pairs.eigenvectors / std::sqrt(grid.weight());
  return s;
}

}  // namespace

FiberBand solve_band(const PotentialFamily& pot, const CrossSectionGrid& grid, const Grid1D& xgrid, int band_index,
                     const BandOptions& opt) {
  if (band_index < 0) throw DegenerateBand("band index must be nonnegative");
  FiberBand band;
  band.xgrid = xgrid;
  band.grid = grid;
  band.potential = pot;
  band.band_index = band_index;
  band.frame = SliceFrame::choose(pot, grid, xgrid, opt.prefer_corotating);
  band.x_independent =
      pot.kind == PotentialFamily::Kind::constant || (pot.kind == PotentialFamily::Kind::twisted && band.frame.corotating);

  const Index M = xgrid.M, F = grid.size();
  const int count = static_cast<int>(std::min<Index>(band_index + 3, F - 1));

  std::vector<SliceSolution> sol(static_cast<std::size_t>(M));
  if (band.x_independent) {
    auto op = std::make_shared<SparseHermitianOp<double>>(
        assemble_fiber_operator(xgrid.x(0), pot, grid, band.frame.corotating));
    band.ops = {op};
    SliceSolution s = solve_slice(*op, grid, count, opt);
    for (auto& e : sol) e = s;
  } else {
    band.ops.resize(static_cast<std::size_t>(M));
    parallel_for(M, opt.threads, [&](Index i) {
      auto op = std::make_shared<SparseHermitianOp<double>>(
          assemble_fiber_operator(xgrid.x(i), pot, grid, band.frame.corotating));
      sol[static_cast<std::size_t>(i)] = solve_slice(*op, grid, count, opt);
      band.ops[static_cast<std::size_t>(i)] = op;
    });
  }

  band.energy.resize(M);
  band.gap.resize(M);
  band.boundary_mass.resize(M);
  band.neighbours = Eigen::MatrixXd::Constant(M, 2, std::numeric_limits<double>::quiet_NaN());
  band.phi.resize(F, M);
  Eigen::VectorXd prev;
  const double w = grid.weight();
  for (Index i = 0; i < M; ++i) {
    const auto& s = sol[static_cast<std::size_t>(i)];
    Index pick = band_index;
    if (i > 0) {
      double best = -1.0;
      for (Index j = 0; j < s.values.size(); ++j) {
        const double o = std::abs(prev.dot(s.vectors.col(j))) * w;
        if (o > best) {
          best = o;
          pick = j;
        }
      }
    }
    if (pick >= s.values.size()) throw DegenerateBand("requested band index exceeds the fiber dimension");
    const double e = s.values(pick);
    double g = std::numeric_limits<double>::infinity();
    if (pick > 0) {
      band.neighbours(i, 0) = s.values(pick - 1);
      g = std::min(g, e - s.values(pick - 1));
    }
    if (pick + 1 < s.values.size()) {
      band.neighbours(i, 1) = s.values(pick + 1);
      g = std::min(g, s.values(pick + 1) - e);
    }
    if (g < 1e-3) {
      std::ostringstream msg;
      msg << "fiber band " << band_index << " is not simple at x = " << xgrid.x(i) << " (gap " << g << ")";
      throw DegenerateBand(msg.str());
    }
    band.energy(i) = e;
    band.gap(i) = g;
    prev = s.vectors.col(pick);
    band.phi.col(i) = prev.cast<cplx>();
    band.boundary_mass(i) = ring_mass(grid, band.phi.col(i));
  }

  if (opt.c_gap > 0.0) {
    band.c_gap = opt.c_gap;
  } else {
    double smallest = std::numeric_limits<double>::infinity();
    const Index stride = std::max(1, opt.prescan_stride);
    for (Index i = 0; i < M; i += stride) smallest = std::min(smallest, band.gap(i));
    band.c_gap = 0.5 * smallest;
  }
  for (Index i = 0; i < M; ++i)
    if (band.gap(i) < band.c_gap) throw GapViolation(xgrid.x(i), band.gap(i));

  band.is_real = true;
  if (opt.gauge)
    band = fix_gauge(std::move(band), xgrid.boundary == Boundary::periodic ? Topology::circle : Topology::line);
  return band;
}

FiberBand fix_gauge(FiberBand band, Topology topology) {
  const Index M = band.xgrid.M, F = band.grid.size();
  const double w = band.grid.weight();
  if (topology == Topology::circle && band.xgrid.boundary != Boundary::periodic)
    throw TopologyMismatch("circle gauge requested on a Dirichlet grid");

  auto unit_phase = [](cplx z) { return std::abs(z) > 0.0 ? z / std::abs(z) : cplx(1.0); };
  auto real_sign = [](cplx z) { return z.real() < 0.0 ? cplx(-1.0) : cplx(1.0); };

  // Slice 0: positive mean, or the largest entry positive when the mean vanishes.
  {
    Vec<cplx> f = band.phi.col(0);
    cplx ref = f.sum() * w;
    if (std::abs(ref) < 1e-6) {
      Index imax = 0;
      f.cwiseAbs().maxCoeff(&imax);
      ref = f(imax);
    }
    band.phi.col(0) *= std::conj(band.is_real ? real_sign(ref) : unit_phase(ref));
  }
  for (Index i = 1; i < M; ++i) {
    const cplx o = band.phi.col(i - 1).dot(band.phi.col(i));
    band.phi.col(i) *= std::conj(band.is_real ? real_sign(o) : unit_phase(o));
  }

  band.periodicity = Periodicity::periodic;
  band.holonomy = 0.0;
  band.gauge_rate = 0.0;
  if (topology == Topology::circle) {
    band.gauged = false;
    Vec<cplx> ghost;
    band.neighbour(M - 1, 1, ghost);
    const cplx o = band.phi.col(M - 1).dot(ghost) * w;
    if (std::abs(o) < 0.9) {
      std::ostringstream msg;
      msg << "end-to-start overlap " << std::abs(o) << " < 0.9; band under-resolved in x";
      throw AmbiguousHolonomy(msg.str());
    }
    band.holonomy = band.is_real ? (o.real() < 0.0 ? std::numbers::pi : 0.0) : std::arg(o);
    band.periodicity = o.real() < 0.0 ? Periodicity::antiperiodic : Periodicity::periodic;
    if (band.holonomy != 0.0) {
      band.gauge_rate = band.holonomy / band.xgrid.length;
      for (Index i = 0; i < M; ++i) band.phi.col(i) *= std::polar(1.0, band.gauge_rate * band.xgrid.x(i));
      band.is_real = false;
    }
  }
  (void)F;
  band.gauged = true;
  return band;
}

void export_band(const FiberBand& band, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  nlohmann::ordered_json j;
  j["band_index"] = band.band_index;
  j["slices"] = band.slices();
  j["fiber"] = {{"r_max", band.grid.r_max}, {"N", band.grid.N}, {"dim", band.grid.dim}, {"h", band.grid.h()}};
  j["x_boundary"] = band.xgrid.boundary == Boundary::periodic ? "periodic" : "dirichlet";
  j["periodicity"] = to_string(band.periodicity);
  j["gauge_rate"] = band.gauge_rate;
  j["co_rotating_frame"] = band.frame.corotating;
  j["c_gap"] = band.c_gap;
  j["complex"] = !band.is_real;
  auto& rows = j["slices_data"] = nlohmann::ordered_json::array();
  for (Index i = 0; i < band.slices(); ++i) {
    rows.push_back({{"x", band.xgrid.x(i)},
                    {"E_f", band.energy(i)},
                    {"gap", band.gap(i)},
                    {"boundary_mass", band.boundary_mass(i)},
                    {"file", "phi_" + std::to_string(i) + ".csv"}});
  }
  std::ofstream(fs::path(directory) / "band.json") << j.dump(2) << '\n';

  const Index N = band.grid.N, cols = band.grid.dim == 2 ? N : 1;
  for (Index i = 0; i < band.slices(); ++i) {
    auto write = [&](const std::string& name, bool imag) {
      std::ofstream out(fs::path(directory) / name);
      out << std::setprecision(12) << std::scientific;
      for (Index r = 0; r < (band.grid.dim == 2 ? N : N); ++r) {
        for (Index c = 0; c < cols; ++c) {
          const cplx v = band.phi(band.grid.dim == 2 ? r * N + c : r, i);
          out << (c ? "," : "") << (imag ? v.imag() : v.real());
        }
        out << '\n';
      }
    };
    write("phi_" + std::to_string(i) + ".csv", false);
    if (!band.is_real) write("phi_im_" + std::to_string(i) + ".csv", true);
  }
}

}  // namespace waveband
