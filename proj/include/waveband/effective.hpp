#pragma once

#include <string>
#include <vector>

#include "waveband/couplings.hpp"
#include "waveband/fiber.hpp"
#include "waveband/reference.hpp"

namespace waveband {

// Finite-difference effective operator on the base curve. The connection is
// carried as link phases (Peierls form): the kinetic term is
// eps^2 sum w_{i+1/2} |e^{i theta} chi_{i+1} - chi_i|^2 / dx^2.
struct EffectiveOperator1D {
  double eps = 1.0;
  Grid1D grid;
  Eigen::VectorXd weight;      // w at the nodes
  Eigen::VectorXd link_phase;  // M on a circle, M - 1 on a line
  Eigen::VectorXd connection;  // a(x), reported alongside the link phases
  Eigen::VectorXd potential;   // V_eff
  Eigen::VectorXd c2, c3, c4;  // eps^2 (4 a2, 4 |eta| a3, |eta|^2 a4)
  bool include_quartic = false;
  SparseHermitianOp<cplx> matrix;

  Index dimension() const { return grid.M; }
};

EffectiveOperator1D assemble_qwg(const CouplingSet& couplings, const FiberBand& band, const CurveSpec& curve, double eps,
                                 bool include_quartic = true);
// The same operator on a circle; throws TopologyMismatch on a line.
EffectiveOperator1D assemble_qwc(const FiberBand& band, const CurveSpec& curve, const CouplingSet& couplings, double eps,
                                 bool include_quartic = true);
// -d^2 - |eta|^2/4 + C alpha'^2, free of eps. On a circle the boundary
// condition follows the band's periodicity.
EffectiveOperator1D assemble_twist(const CurveSpec& curve, const Grid1D& grid, const TwistProfile& twist, double C,
                                   Periodicity periodicity = Periodicity::periodic);

// Lowest k eigenpairs, ascending; dense below 2000 unknowns.
EigpairSet<cplx> spectrum(const EffectiveOperator1D& op, int k);

enum class LiftOrder { leading, first_adiabatic };

struct Quasimode {
  double energy = 0.0;
  Vec<cplx> psi;  // tube grid, unit norm with weight dx h^k
  double residual = 0.0;
  double leading_residual = 0.0;  // residual of phi_f chi before correction
  LiftOrder order = LiftOrder::leading;
};

// psi = phi_f chi on the tube grid; with first_adiabatic the slice-wise
// off-band part of the residual is removed with the reduced resolvent.
Quasimode lift_quasimode(const FiberBand& band, const Vec<cplx>& chi, double energy, const TubeOperator& tube,
                         LiftOrder order = LiftOrder::first_adiabatic, double resolvent_tol = 1e-11);

// Residual || (B - E) psi || of a tube state in the weighted norm.
double tube_residual(const TubeOperator& tube, const FiberBand& band, const Vec<cplx>& psi, double energy);

}  // namespace waveband
