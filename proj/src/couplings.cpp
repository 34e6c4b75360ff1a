#include "waveband/couplings.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "waveband/parallel.hpp"

namespace waveband {

Vec<cplx> angular_apply(const CrossSectionGrid& grid, const Vec<cplx>& f) {
  if (f.size() != grid.size()) throw GridMismatch("angular_apply: size mismatch");
  Vec<cplx> out = Vec<cplx>::Zero(f.size());
  if (grid.dim != 2) return out;
  const Index N = grid.N;
  const double s = 0.5 / grid.h();
  auto at = [&](Index a, Index b) -> cplx {
    if (a < 0 || b < 0 || a >= N || b >= N) return 0.0;
    return f(grid.index(a, b));
  };
  for (Index a = 0; a < N; ++a)
    for (Index b = 0; b < N; ++b) {
      const double n1 = grid.coord(a), n2 = grid.coord(b);
      out(grid.index(a, b)) = s * (n1 * (at(a, b + 1) - at(a, b - 1)) - n2 * (at(a + 1, b) - at(a - 1, b)));
    }
  return out;
}

double angular_coefficient(const Vec<cplx>& phi, const CrossSectionGrid& grid) {
  return angular_apply(grid, phi).squaredNorm() * grid.weight();
}

namespace {

// Unit direction of the curvature vector in slice coordinates, or zero.
Eigen::Vector2d curvature_direction(const FiberBand& band, const CurveSpec& curve, Index i, double& eta) {
  const double x = band.xgrid.x(i);
  const Eigen::Vector2d kb = band.frame.slice_kappa(curve, x, band.frame.angle(i));
  eta = curve.curvature(x);
  if (eta < 1e-14) {
    eta = 0.0;
    return Eigen::Vector2d::Zero();
  }
  return kb / kb.norm();
}

Vec<cplx> times_n(const CrossSectionGrid& grid, const Eigen::Vector2d& dir, const Vec<cplx>& f) {
  Vec<cplx> out(f.size());
  for (Index p = 0; p < f.size(); ++p) out(p) = grid.point(p).dot(dir) * f(p);
  return out;
}

// Neighbour rephased so its overlap with `base` is real and positive.
Vec<cplx> transported(const CrossSectionGrid& grid, const Vec<cplx>& base, Vec<cplx> g) {
  const cplx o = fiber_dot(grid, base, g);
  if (std::abs(o) > 1e-300) g *= std::conj(o) / std::abs(o);
  return g;
}

}  // namespace

MomentProfile moment_profile(const FiberBand& band, const CurveSpec& curve, const CrossSectionGrid& grid) {
  if (!(grid == band.grid)) throw GridMismatch("moment_profile: fiber grid differs from the band's");
  const Index M = band.slices();
  MomentProfile out{Eigen::VectorXd::Zero(M), Eigen::VectorXd::Zero(M)};
  for (Index i = 0; i < M; ++i) {
    double eta = 0.0;
    const Eigen::Vector2d dir = curvature_direction(band, curve, i, eta);
    if (eta == 0.0) continue;
    const Vec<cplx> f = band.phi.col(i);
    const Vec<cplx> nf = times_n(grid, dir, f);
    out.m1(i) = fiber_dot(grid, f, nf).real();
    out.m2(i) = nf.squaredNorm() * grid.weight();
  }
  return out;
}

CouplingSet compute_couplings(const FiberBand& band, const CurveSpec& curve, const CrossSectionGrid& grid,
                              const CouplingOptions& opt) {
  if (!(grid == band.grid)) throw GridMismatch("compute_couplings: fiber grid differs from the band's");
  if (!band.gauged) throw GridMismatch("compute_couplings: band must be gauge fixed");
  const Index M = band.slices();
  const auto& xg = band.xgrid;
  const double dx = xg.h, w = grid.weight();
  const bool periodic = xg.boundary == Boundary::periodic;
  if (!periodic && M < 3) throw DimensionTooSmall("compute_couplings: need at least 3 slices");

  CouplingSet c;
  c.xgrid = xg;
  c.x = xg.points();
  c.eta = Eigen::VectorXd::Zero(M);
  c.berry = Vec<cplx>::Zero(M);
  c.born_huang = c.m1 = c.m2 = c.a2 = c.a3 = c.a4 = Eigen::VectorXd::Zero(M);
  c.link_phase = Eigen::VectorXd::Zero(periodic ? M : M - 1);
  std::vector<double> defect(static_cast<std::size_t>(M), 0.0);

  parallel_for(M, opt.threads, [&](Index i) {
    const Vec<cplx> f = band.phi.col(i);
    Vec<cplx> lo, hi, hi2;
    Vec<cplx> plain, cov;
    const bool has_lo = band.neighbour(i, -1, lo), has_hi = band.neighbour(i, 1, hi);
    if (has_lo && has_hi) {
      plain = (hi - lo) / (2.0 * dx);
      cov = (transported(grid, f, hi) - transported(grid, f, lo)) / (2.0 * dx);
    } else if (has_hi) {
      band.neighbour(i, 2, hi2);
      plain = (-3.0 * f + 4.0 * hi - hi2) / (2.0 * dx);
      cov = (-3.0 * f + 4.0 * transported(grid, f, hi) - transported(grid, f, hi2)) / (2.0 * dx);
    } else {
      band.neighbour(i, -2, hi2);
      plain = (3.0 * f - 4.0 * lo + hi2) / (2.0 * dx);
      cov = (3.0 * f - 4.0 * transported(grid, f, lo) + transported(grid, f, hi2)) / (2.0 * dx);
    }
    const double rate = band.frame.rate(i);
    if (rate != 0.0) {
      const Vec<cplx> lf = rate * angular_apply(grid, f);
      plain += lf;
      cov += lf;
    }
    c.berry(i) = fiber_dot(grid, f, plain);
    const cplx proj = fiber_dot(grid, f, cov);
    c.born_huang(i) = cov.squaredNorm() * w - std::norm(proj);

    double eta = 0.0;
    const Eigen::Vector2d dir = curvature_direction(band, curve, i, eta);
    c.eta(i) = eta;
    const Vec<cplx> unit = f / std::sqrt(f.squaredNorm());
    const auto& op = band.op(i);
    const double e = band.energy(i);
    ProjectedSolveOptions po;
    const Vec<cplx> rd = solve_shifted_projected<cplx, double>(op, e, unit, cov, opt.resolvent_tol, po);
    c.a2(i) = fiber_dot(grid, cov, rd).real();
    double worst = std::abs(fiber_dot(grid, f, rd)) / std::max(std::sqrt(rd.squaredNorm() * w), 1e-300);
    if (eta > 0.0) {
      const Vec<cplx> nf = times_n(grid, dir, f);
      c.m1(i) = fiber_dot(grid, f, nf).real();
      c.m2(i) = nf.squaredNorm() * w;
      const Vec<cplx> rn = solve_shifted_projected<cplx, double>(op, e, unit, nf, opt.resolvent_tol, po);
      c.a3(i) = fiber_dot(grid, cov, rn).real();
      c.a4(i) = fiber_dot(grid, nf, rn).real();
      worst = std::max(worst, std::abs(fiber_dot(grid, f, rn)) / std::max(std::sqrt(rn.squaredNorm() * w), 1e-300));
    }
    defect[static_cast<std::size_t>(i)] = worst;

    if (periodic || i + 1 < M) {
      Vec<cplx> next;
      band.neighbour(i, 1, next);
      cplx o = fiber_dot(grid, f, next);
      const double rate_mid = band.frame.rate_mid(i);
      if (rate_mid != 0.0) o += dx * rate_mid * fiber_dot(grid, f, angular_apply(grid, next));
      c.link_phase(i) = std::arg(o);
    }
  });
  for (double d : defect) c.orthogonality_defect = std::max(c.orthogonality_defect, d);
  return c;
}

void write_couplings_csv(const std::string& path, const CouplingSet& c) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "x,berry_im,born_huang,m1,m2,a2,a3,a4\n" << std::setprecision(17);
  for (Index i = 0; i < c.x.size(); ++i)
    out << c.x(i) << ',' << c.berry(i).imag() << ',' << c.born_huang(i) << ',' << c.m1(i) << ',' << c.m2(i) << ','
        << c.a2(i) << ',' << c.a3(i) << ',' << c.a4(i) << '\n';
}

}  // namespace waveband
