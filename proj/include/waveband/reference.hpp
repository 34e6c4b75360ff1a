#pragma once

#include <memory>
#include <vector>

#include "waveband/fiber.hpp"
#include "waveband/geometry.hpp"
#include "waveband/numerics.hpp"

namespace waveband {

struct TubeOperatorSpec {
  CurveSpec curve;
  Grid1D xgrid;
  CrossSectionGrid grid;
  double eps = 0.1;
  PotentialFamily potential;
  bool prefer_corotating = true;
  // Metric fade: h = 1 - s is used while s = eps kappa.N <= fade_start; beyond
  // it h decays smoothly (C^1) towards h_floor. Disable to require h > 0 exactly.
  bool metric_fade = true;
  double fade_start = 0.6;
  double h_floor = 0.25;
};

// Metric factor as a function of s = eps <kappa, N>.
double faded_metric(double s, double fade_start, double h_floor);
// First and second derivatives of faded_metric with respect to s.
void faded_metric_derivatives(double s, double fade_start, double h_floor, double& d1, double& d2);

// Full tube operator in dilated Fermi coordinates for the quadratic form
// eps^2 h^{-1}|D psi|^2 + h|grad_N psi|^2 + h V |psi|^2  with D = d_x + alpha' L
// in the co-rotating frame (D = d_x in the lab frame). The transverse part is
// discretized in u = h^{1/2} psi, where it is a plain Laplacian plus the
// geometric potential.
struct TubeOperator {
  TubeOperatorSpec spec;
  SliceFrame frame;
  SpMat<double> stiffness;           // quadratic form S
  Eigen::VectorXd metric;            // h at the nodes (mass of the weighted form)
  SparseHermitianOp<double> symmetric;  // h^{-1/2} S h^{-1/2}
  double min_metric = 1.0;
  bool faded = false;

  Index fiber_size() const { return spec.grid.size(); }
  Index slices() const { return spec.xgrid.M; }
  Index dimension() const { return fiber_size() * slices(); }
  Index index(Index i, Index p) const { return i * fiber_size() + p; }
  // h^{-1} S, the operator symmetric in the h-weighted inner product.
  SpMat<double> weighted() const;
  // Ring mass of a state (flat normalization) summed over slices.
  double boundary_mass(const Vec<double>& psi) const;
};

TubeOperator assemble_tube(const TubeOperatorSpec& spec);

struct ReferenceOptions {
  double tol = 1e-9;
  int guard = 2;        // extra pairs carried to stabilize the wanted block
  int coarse_bands = 4;  // fiber bands spanning the preconditioner's coarse space
  int max_iterations = 3000;
  std::uint64_t seed = 0x5eed;
  int threads = 1;
};

// Additive two-level preconditioner: per-slice shifted fiber blocks plus an
// exact solve on the span of the lowest fiber eigenvectors of every slice.
class TwoLevelPreconditioner {
 public:
  TwoLevelPreconditioner(const TubeOperator& tube, double shift, int coarse_bands, bool absolute, int threads);
  void apply(const Mat<double>& x, Mat<double>& y) const;
  double shift() const { return shift_; }
  // Lowest eigenvalue of the Galerkin operator on the coarse space.
  double coarse_bottom() const { return coarse_values_(0); }
  const Eigen::VectorXd& coarse_values() const { return coarse_values_; }

 private:
  const TubeOperator* tube_;
  double shift_;
  std::vector<std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>> blocks_;
  std::vector<Mat<double>> slice_basis_;  // per slice: fiber size x bands
  Mat<double> coarse_vectors_;
  Eigen::VectorXd coarse_values_;
  Eigen::VectorXd coarse_inverse_;
};

EigpairSet<double> reference_spectrum(const TubeOperator& tube, int k, const ReferenceOptions& opt = {});
// k eigenpairs closest to sigma, by preconditioned shift-invert Lanczos.
EigpairSet<double> reference_spectrum_near(const TubeOperator& tube, double sigma, int k,
                                           const ReferenceOptions& opt = {});

// Harmonic approximation at the minimum of a sampled band energy.
struct HarmonicCorollary {
  Index index = 0;
  double x0 = 0.0;
  double energy = 0.0;        // E_f(x0)
  double curvature = 0.0;     // E_f''(x0), second difference
  double omega = 0.0;         // sqrt(E_f''/2)
  Eigen::VectorXd analytic;   // omega (2l+1)
  Eigen::VectorXd fd;         // FD eigenvalues of -d^2 + E_f''/2 (x-x0)^2
};

// x0 < 0 selects the sampled minimum. Throws DegenerateMinimum unless the
// second difference is positive.
HarmonicCorollary build_ho_corollary_operator(const Eigen::VectorXd& energy, const Grid1D& grid, double x0 = -1.0,
                                              int levels = 4);

struct ToyDynamicsResult {
  Eigen::VectorXd times;
  Eigen::VectorXd difference;  // ||psi(t) - phi_f chi(t)||
  Eigen::VectorXd band_weight;  // ||P_band psi(t)||^2
  Vec<cplx> psi;               // final full state (flat normalization)
  Vec<cplx> chi;               // final effective state
};

// Crank-Nicolson evolution of the flat d=1,k=1 tube and of the given
// effective operator from psi0 = phi_f chi0 (or an explicit full state).
ToyDynamicsResult propagate_toy(const TubeOperator& tube, const FiberBand& band, const SparseHermitianOp<cplx>& effective,
                                const Vec<cplx>& chi0, double t, double dt, int samples = 20,
                                const Vec<cplx>* psi0_override = nullptr);

// phi_f(x_i) chi_i on the tube grid; flat normalization with weight dx h^k.
Vec<cplx> lift(const FiberBand& band, const Vec<cplx>& chi);
// U_0: slice-wise projection <phi_f(x_i) | psi_i>.
Vec<cplx> project_to_band(const FiberBand& band, const Vec<cplx>& psi);
// Norms on the tube and effective grids consistent with lift().
double tube_norm(const FiberBand& band, const Vec<cplx>& psi);
double line_norm(const Grid1D& grid, const Vec<cplx>& chi);

}  // namespace waveband
