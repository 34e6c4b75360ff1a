#pragma once

#include <memory>
#include <string>
#include <vector>

#include "waveband/geometry.hpp"
#include "waveband/numerics.hpp"

namespace waveband {

// Uniform Dirichlet grid on [-r_max, r_max]^k with N points per axis
// (endpoints included). Ghost zeros sit one spacing beyond each end.
struct CrossSectionGrid {
  double r_max = 0.0;
  Index N = 0;
  int dim = 2;

  static CrossSectionGrid make(double r_max, Index N, int dim);

  double h() const { return 2.0 * r_max / static_cast<double>(N - 1); }
  double coord(Index a) const { return -r_max + static_cast<double>(a) * h(); }
  Index size() const { return dim == 2 ? N * N : N; }
  double weight() const { return dim == 2 ? h() * h() : h(); }
  Index index(Index a, Index b) const { return a * N + b; }
  // Coordinates of flat index p; n2 = 0 for dim 1.
  Eigen::Vector2d point(Index p) const {
    return dim == 2 ? Eigen::Vector2d(coord(p / N), coord(p % N)) : Eigen::Vector2d(coord(p), 0.0);
  }
  bool operator==(const CrossSectionGrid& o) const { return r_max == o.r_max && N == o.N && dim == o.dim; }
};

// Confining potential. `base` is the cross-section profile in the co-rotating
// frame (twisted and constant kinds); `shape` is the full lab-frame V0(x, n).
struct PotentialFamily {
  enum class Kind { twisted, shape_family, constant };

  Kind kind = Kind::constant;
  std::function<double(double, double)> base;
  std::function<double(double, double, double)> shape;
  TwistProfile twist = TwistProfile::none();
  bool reflection_symmetric = false;

  static PotentialFamily constant(std::function<double(double, double)> v, bool reflection_symmetric = false);
  static PotentialFamily twisted(std::function<double(double, double)> v, TwistProfile twist,
                                 bool reflection_symmetric = false);
  static PotentialFamily shape_family(std::function<double(double, double, double)> v);
  // omega1^2 n1^2 + omega2^2 n2^2
  static std::function<double(double, double)> harmonic(double omega1, double omega2);

  // Lab-frame value V0(x, n1, n2).
  double operator()(double x, double n1, double n2) const;
  // Value in the co-rotating frame; only for twisted/constant kinds.
  double body(double N1, double N2) const { return base(N1, N2); }
  bool rotates() const { return kind == Kind::twisted; }
};

// Bilinear interpolation of a uniform (n1, n2, V) table; values outside the
// table are clamped to the nearest edge.
std::function<double(double, double)> read_potential_csv(const std::string& path);

// How slices of the tube are parametrized. In the co-rotating frame the fiber
// coordinate follows the twist, so twisted potentials become x-independent;
// the periodic wrap then rotates the fiber by the total twist.
struct SliceFrame {
  bool corotating = false;
  Eigen::VectorXd angle;  // alpha(x_i); zero in the lab frame
  Eigen::VectorXd rate;   // alpha'(x_i); zero in the lab frame
  Eigen::VectorXd rate_mid;  // alpha' at x_i + h/2
  int quarter_turns = 0;  // circle wrap rotation (co-rotating frame)
  std::vector<Index> wrap;  // ghost slice M at fiber point p equals slice 0 at wrap[p]

  static SliceFrame choose(const PotentialFamily& pot, const CrossSectionGrid& grid, const Grid1D& xgrid,
                           bool prefer_corotating = true);
  bool wraps_identity() const;
  // Curvature vector in slice coordinates at position x.
  Eigen::Vector2d slice_kappa(const CurveSpec& curve, double x, double alpha) const;
};

// Fiber index of R_{-q pi/2} applied to the grid point p.
Index rotate_quarter(const CrossSectionGrid& grid, Index p, int q);

// -Laplacian (5-point / 3-point, Dirichlet) plus the potential at slice x.
// In the co-rotating frame the base profile is used directly.
SparseHermitianOp<double> assemble_fiber_operator(double x, const PotentialFamily& pot, const CrossSectionGrid& grid,
                                                  bool corotating = false);

enum class Periodicity { periodic, antiperiodic };
std::string to_string(Periodicity p);

struct BandOptions {
  double tol = 1e-11;
  double c_gap = 0.0;        // <= 0: half the smallest gap on the pre-scan
  int prescan_stride = 8;
  bool prefer_corotating = true;
  bool gauge = true;          // run fix_gauge after the slice solves
  int threads = 1;
  std::uint64_t seed = 0x5eed;
};

struct FiberBand {
  Grid1D xgrid;
  CrossSectionGrid grid;
  PotentialFamily potential;
  SliceFrame frame;
  int band_index = 0;
  bool x_independent = false;
  bool is_real = true;
  Eigen::VectorXd energy;         // E_f(x_i)
  Eigen::VectorXd gap;            // distance to the nearest other fiber level
  Eigen::VectorXd boundary_mass;  // mass on the outermost grid ring
  Eigen::MatrixXd neighbours;     // (lower, upper) fiber levels per slice, NaN if absent
  Mat<cplx> phi;                  // grid.size() x M, unit norm with weight h^k
  double c_gap = 0.0;
  Periodicity periodicity = Periodicity::periodic;
  double holonomy = 0.0;     // arg of the end-to-start overlap before regauging
  double gauge_rate = 0.0;   // phi <- exp(i gauge_rate x) phi applied by fix_gauge
  bool gauged = false;

  std::vector<std::shared_ptr<const SparseHermitianOp<double>>> ops;  // per slice, or a single shared one

  Index slices() const { return xgrid.M; }
  const SparseHermitianOp<double>& op(Index i) const { return *ops[ops.size() == 1 ? 0 : static_cast<std::size_t>(i)]; }
  // Slice i+offset with periodic/Dirichlet continuation; returns false past a Dirichlet end.
  bool neighbour(Index i, int offset, Vec<cplx>& out) const;
  double max_boundary_mass() const { return boundary_mass.maxCoeff(); }
};

FiberBand solve_band(const PotentialFamily& pot, const CrossSectionGrid& grid, const Grid1D& xgrid, int band_index,
                     const BandOptions& opt = {});
FiberBand fix_gauge(FiberBand band, Topology topology);

// Discrete weighted inner product <f|g> h^k on the fiber grid.
inline cplx fiber_dot(const CrossSectionGrid& grid, const Vec<cplx>& f, const Vec<cplx>& g) {
  return f.dot(g) * grid.weight();
}

// Mass of f on the outermost ring of the fiber grid (weighted).
double ring_mass(const CrossSectionGrid& grid, const Vec<cplx>& f);

// JSON summary plus one row-major CSV per slice (real and, for complex bands,
// imaginary parts).
void export_band(const FiberBand& band, const std::string& directory);

}  // namespace waveband
