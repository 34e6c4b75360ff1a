#pragma once

#include <string>

#include "waveband/fiber.hpp"
#include "waveband/geometry.hpp"

namespace waveband {

// Per-slice coefficients of the effective operators. Derivatives along x are
// the lab-frame horizontal derivative D = d_x + alpha' L, which in the
// co-rotating frame picks up the twist through the angular momentum L.
struct CouplingSet {
  Grid1D xgrid;
  Eigen::VectorXd x;
  Eigen::VectorXd eta;         // |kappa(x_i)|
  Vec<cplx> berry;             // <phi|D phi>, central differences
  Eigen::VectorXd born_huang;  // <D phi|D phi> - |<phi|D phi>|^2
  Eigen::VectorXd m1;          // <phi|n phi>
  Eigen::VectorXd m2;          // <phi|n^2 phi>
  Eigen::VectorXd a2;          // <D phi|R D phi>
  Eigen::VectorXd a3;          // Re <D phi|R n phi>
  Eigen::VectorXd a4;          // <n phi|R n phi>
  // arg of the lab-frame overlap <phi_i|phi_{i+1}>; M entries on a circle
  // (the last one crosses the wrap), M-1 on a line.
  Eigen::VectorXd link_phase;
  double orthogonality_defect = 0.0;  // max |<phi|R f>| over the resolvent outputs

  // Connection a(x) = Im berry.
  Eigen::VectorXd connection() const { return berry.imag(); }
};

struct CouplingOptions {
  double resolvent_tol = 1e-11;
  int threads = 1;
};

// angular momentum N1 d2 - N2 d1 by central differences (zero for dim 1)
Vec<cplx> angular_apply(const CrossSectionGrid& grid, const Vec<cplx>& f);

// int |n1 d2 phi - n2 d1 phi|^2 for a normalized phi
double angular_coefficient(const Vec<cplx>& phi, const CrossSectionGrid& grid);

CouplingSet compute_couplings(const FiberBand& band, const CurveSpec& curve, const CrossSectionGrid& grid,
                              const CouplingOptions& opt = {});

struct MomentProfile {
  Eigen::VectorXd m1, m2;
};
MomentProfile moment_profile(const FiberBand& band, const CurveSpec& curve, const CrossSectionGrid& grid);

// x, berry_im, born_huang, m1, m2, a2, a3, a4
void write_couplings_csv(const std::string& path, const CouplingSet& c);

}  // namespace waveband
