#include "waveband/effective.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace waveband {

namespace {

// Covariant forward differences, one row per link: (e^{i theta} chi_j - chi_i)/dx.
// On a line the ghost links (chi = 0 beyond the ends) are the first and last rows.
SpMat<cplx> link_gradient(const Grid1D& grid, const Eigen::VectorXd& phase) {
  const Index M = grid.M;
  const bool periodic = grid.boundary == Boundary::periodic;
  const Index links = periodic ? M : M + 1;
  Triplets<cplx> t;
  const double inv = 1.0 / grid.h;
  if (periodic) {
    for (Index l = 0; l < M; ++l) {
      t.emplace_back(l, l, -inv);
      t.emplace_back(l, (l + 1) % M, std::polar(inv, phase(l)));
    }
  } else {
    // link l joins node l-1 and node l; l = 0 and l = M are the ghost links
    for (Index l = 0; l <= M; ++l) {
      if (l > 0) t.emplace_back(l, l - 1, -inv);
      if (l < M) t.emplace_back(l, l, l > 0 ? std::polar(inv, phase(l - 1)) : cplx(inv));
    }
  }
  SpMat<cplx> g(links, M);
  g.setFromTriplets(t.begin(), t.end());
  return g;
}

// Node-centred covariant first difference (anti-Hermitian).
SpMat<cplx> central_difference(const Grid1D& grid, const Eigen::VectorXd& phase) {
  const Index M = grid.M;
  const bool periodic = grid.boundary == Boundary::periodic;
  const double s = 0.5 / grid.h;
  Triplets<cplx> t;
  for (Index i = 0; i < M; ++i) {
    if (periodic || i + 1 < M) t.emplace_back(i, (i + 1) % M, std::polar(s, phase(i)));
    if (periodic || i > 0) {
      const Index j = (i + M - 1) % M;
      t.emplace_back(i, j, -std::polar(s, -phase(j)));
    }
  }
  SpMat<cplx> d(M, M);
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

// Link weights: midpoint averages, node values on the ghost links.
Eigen::VectorXd link_average(const Grid1D& grid, const Eigen::VectorXd& v) {
  const Index M = grid.M;
  if (grid.boundary == Boundary::periodic) {
    Eigen::VectorXd out(M);
    for (Index l = 0; l < M; ++l) out(l) = 0.5 * (v(l) + v((l + 1) % M));
    return out;
  }
  Eigen::VectorXd out(M + 1);
  out(0) = v(0);
  out(M) = v(M - 1);
  for (Index l = 1; l < M; ++l) out(l) = 0.5 * (v(l - 1) + v(l));
  return out;
}

SpMat<cplx> diagonal(const Eigen::VectorXd& v) {
  SpMat<cplx> d(v.size(), v.size());
  Triplets<cplx> t;
  for (Index i = 0; i < v.size(); ++i) t.emplace_back(i, i, v(i));
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

SparseHermitianOp<cplx> hermitian(SpMat<cplx> m) {
  SpMat<cplx> adj = m.adjoint();
  m = (m + adj) * 0.5;
  m.prune(cplx(0.0), 1e-300);
  return SparseHermitianOp<cplx>(std::move(m));
}

void assemble_matrix(EffectiveOperator1D& op) {
  const auto& grid = op.grid;
  const double e = op.eps, e2 = e * e;
  const SpMat<cplx> g = link_gradient(grid, op.link_phase);
  SpMat<cplx> m = SpMat<cplx>(g.adjoint()) * diagonal(e2 * link_average(grid, op.weight)) * g;
  m += diagonal(op.potential);
  if (op.include_quartic) {
    // c2 (eps d) (eps d), c3 Re (eps d)(eps^2 d^2), c4 (eps^2 d^2)(eps^2 d^2) with
    // d ~ -G^* on links, d^2 ~ -G^* G and d ~ D1 at the nodes
    const SpMat<cplx> lap = -(SpMat<cplx>(g.adjoint()) * g);
    const SpMat<cplx> d1 = central_difference(grid, op.link_phase);
    m -= SpMat<cplx>(g.adjoint()) * diagonal(e2 * link_average(grid, op.c2)) * g;
    const SpMat<cplx> mixed = d1 * diagonal(op.c3) * lap * (e * e2);
    m += (mixed + SpMat<cplx>(mixed.adjoint())) * 0.5;
    m += lap * diagonal(op.c4) * lap * (e2 * e2);
  }
  op.matrix = hermitian(std::move(m));
}

void check_weight(const EffectiveOperator1D& op) {
  const double wmin = op.weight.minCoeff();
  if (!(wmin > 0.0)) {
    std::ostringstream msg;
    msg << "kinetic weight reaches " << wmin << " (eps " << op.eps << " too large for the curvature)";
    throw WeightNonPositive(msg.str());
  }
}

}  // namespace

EffectiveOperator1D assemble_qwg(const CouplingSet& c, const FiberBand& band, const CurveSpec& curve, double eps,
                                 bool include_quartic) {
  if (!(c.xgrid == band.xgrid)) throw GridMismatch("couplings and band use different base grids");
  if (!(eps > 0.0 && eps < 1.0)) throw WeightNonPositive("eps must lie in (0, 1)");
  if ((curve.topology == Topology::circle) != (band.xgrid.boundary == Boundary::periodic))
    throw TopologyMismatch("curve topology and base grid disagree");
  EffectiveOperator1D op;
  op.eps = eps;
  op.grid = band.xgrid;
  op.include_quartic = include_quartic;
  op.link_phase = c.link_phase;
  op.connection = c.connection();
  const Eigen::ArrayXd eta = c.eta.array();
  op.weight = (1.0 + eps * eta * c.m1.array() + 3.0 * eps * eps * eta.square() * c.m2.array()).matrix();
  op.potential = (band.energy.array() - eps * eps * eta.square() / 4.0 + eps * eps * c.born_huang.array()).matrix();
  op.c2 = (eps * eps * 4.0 * c.a2.array()).matrix();
  op.c3 = (eps * eps * 4.0 * eta * c.a3.array()).matrix();
  op.c4 = (eps * eps * eta.square() * c.a4.array()).matrix();
  check_weight(op);
  assemble_matrix(op);
  return op;
}

EffectiveOperator1D assemble_qwc(const FiberBand& band, const CurveSpec& curve, const CouplingSet& couplings, double eps,
                                 bool include_quartic) {
  if (curve.topology != Topology::circle) throw TopologyMismatch("assemble_qwc needs a closed circuit");
  return assemble_qwg(couplings, band, curve, eps, include_quartic);
}

EffectiveOperator1D assemble_twist(const CurveSpec& curve, const Grid1D& grid, const TwistProfile& twist, double C,
                                   Periodicity periodicity) {
  if ((curve.topology == Topology::circle) != (grid.boundary == Boundary::periodic))
    throw TopologyMismatch("curve topology and base grid disagree");
  const Index M = grid.M;
  EffectiveOperator1D op;
  op.eps = 1.0;
  op.grid = grid;
  op.weight = Eigen::VectorXd::Ones(M);
  op.link_phase = Eigen::VectorXd::Zero(grid.boundary == Boundary::periodic ? M : M - 1);
  if (grid.boundary == Boundary::periodic && periodicity == Periodicity::antiperiodic)
    op.link_phase(M - 1) = std::numbers::pi;
  op.connection = Eigen::VectorXd::Zero(M);
  op.potential.resize(M);
  for (Index i = 0; i < M; ++i) {
    const double x = grid.x(i), eta = curve.curvature(x), rate = twist.rate(x);
    op.potential(i) = -eta * eta / 4.0 + C * rate * rate;
  }
  op.c2 = op.c3 = op.c4 = Eigen::VectorXd::Zero(M);
  assemble_matrix(op);
  return op;
}

EigpairSet<cplx> spectrum(const EffectiveOperator1D& op, int k) {
  EigenOptions eo;
  eo.dense_cutoff = 2000;
  eo.tol = 1e-12;
  return subspace_eigensolve<cplx>(op.dimension(), k, op.matrix.as_block_apply(), eo);
}

double tube_residual(const TubeOperator& tube, const FiberBand& band, const Vec<cplx>& psi, double energy) {
  const Vec<cplx> r = tube.symmetric.matrix() * psi - energy * psi;
  return tube_norm(band, r);
}

Quasimode lift_quasimode(const FiberBand& band, const Vec<cplx>& chi, double energy, const TubeOperator& tube,
                         LiftOrder order, double resolvent_tol) {
  if (!(tube.spec.grid == band.grid) || !(tube.spec.xgrid == band.xgrid))
    throw GridMismatch("tube and band grids differ");
  if (chi.size() != band.slices()) throw GridMismatch("effective state and band differ in slice count");
  if (tube.frame.corotating != band.frame.corotating)
    throw GridMismatch("tube and band use different slice frames");
  Quasimode q;
  q.energy = energy;
  q.order = order;
  q.psi = lift(band, chi);
  q.psi /= tube_norm(band, q.psi);
  q.leading_residual = tube_residual(tube, band, q.psi, energy);
  q.residual = q.leading_residual;
  if (order == LiftOrder::leading) return q;

  const Index M = band.slices(), F = band.grid.size();
  const Vec<cplx> r = tube.symmetric.matrix() * q.psi - energy * q.psi;
  Vec<cplx> correction(M * F);
  for (Index i = 0; i < M; ++i) {
    const Vec<cplx> f = band.phi.col(i);
    const Vec<cplx> unit = f / f.norm();
    const Vec<cplx> ri = r.segment(i * F, F);
    correction.segment(i * F, F) =
        solve_shifted_projected<cplx, double>(band.op(i), band.energy(i), unit, ri, resolvent_tol);
  }
  q.psi -= correction;
  q.psi /= tube_norm(band, q.psi);
  q.residual = tube_residual(tube, band, q.psi, energy);
  return q;
}

}  // namespace waveband
