#include <doctest.h>

#include <cmath>
#include <numbers>

#include "waveband/couplings.hpp"

using namespace waveband;

namespace {

// Hermite functions of the oscillator -d^2 + omega^2 n^2 and their derivatives.
double hermite(int level, double omega, double n) {
  const double g = std::pow(omega / std::numbers::pi, 0.25) * std::exp(-0.5 * omega * n * n);
  return level == 0 ? g : std::sqrt(2.0 * omega) * n * g;
}
double hermite_slope(int level, double omega, double n) {
  const double g = std::pow(omega / std::numbers::pi, 0.25) * std::exp(-0.5 * omega * n * n);
  return level == 0 ? -omega * n * g : std::sqrt(2.0 * omega) * (1.0 - omega * n * n) * g;
}

// |L phi|^2 for phi = h_a(n1) h_b(n2) by trapezoidal quadrature of the
// analytic derivatives (spectrally accurate for Gaussian tails).
double angular_oracle(int a, double omega1, int b, double omega2) {
  const int n = 1601;
  const double r = 10.0, h = 2.0 * r / (n - 1);
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double n1 = -r + i * h, n2 = -r + j * h;
      const double l = n1 * hermite(a, omega1, n1) * hermite_slope(b, omega2, n2) -
                       n2 * hermite_slope(a, omega1, n1) * hermite(b, omega2, n2);
      sum += l * l;
    }
  return sum * h * h;
}

double discrete_angular(double omega1, double omega2, int level, Index N) {
  const auto grid = CrossSectionGrid::make(6.0, N, 2);
  const auto pot = PotentialFamily::constant(PotentialFamily::harmonic(omega1, omega2));
  const auto pairs = lowest_eigenpairs(assemble_fiber_operator(0.0, pot, grid), level + 1, 1e-12);
  Vec<cplx> phi = pairs.eigenvectors.col(level).cast<cplx>();
  phi /= std::sqrt(phi.squaredNorm() * grid.weight());
  return angular_coefficient(phi, grid);
}

struct Bent {
  CurveSpec curve;
  Grid1D xgrid;
  CrossSectionGrid grid;
  FiberBand band;
};

// Line with a curvature bump and an x-dependent cross-section width.
Bent bent_guide() {
  Bent b;
  std::tie(b.curve, b.xgrid) = make_line(6.0, 40, sech2_bump(0.4, 3.0, 0.8), sech2_bump(0.2, 2.5, 1.0));
  b.grid = CrossSectionGrid::make(5.0, 20, 2);
  const auto pot = PotentialFamily::shape_family([](double x, double n1, double n2) {
    const double om = 1.0 + 0.3 * std::pow(std::tanh(x - 3.0), 2);
    const double shift = n1 - 0.2 * std::tanh(x - 3.0);
    return om * om * shift * shift + 2.0 * n2 * n2;
  });
  b.band = solve_band(pot, b.grid, b.xgrid, 0);
  return b;
}

}  // namespace

TEST_CASE("angular coefficient oracle reproduces the moment formula") {
  // <n1^2><p2^2> + <n2^2><p1^2> - 2 <n1 p1><n2 p2> with the oscillator moments
  CHECK(angular_oracle(1, 1.0, 0, 2.0) == doctest::Approx(1.375).epsilon(1e-10));
  CHECK(angular_oracle(0, 1.0, 0, 2.0) == doctest::Approx(0.125).epsilon(1e-10));
  CHECK(angular_oracle(0, 1.0, 0, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("angular coefficient of fiber eigenstates") {
  SUBCASE("isotropic ground state carries no angular momentum") {
    CHECK(std::abs(discrete_angular(1.0, 1.0, 0, 161)) < 1e-6);
  }
  SUBCASE("isotropic first excited states have |m| = 1, extrapolated in h^2") {
    const double coarse = discrete_angular(1.0, 1.0, 1, 61);
    const double fine = discrete_angular(1.0, 1.0, 1, 121);
    CHECK(std::abs(fine - 1.0) < 1e-2);
    CHECK(std::abs((4.0 * fine - coarse) / 3.0 - 1.0) < 1e-3);
  }
  SUBCASE("anisotropic first excited state, extrapolated in h^2") {
    const double coarse = discrete_angular(1.0, 2.0, 1, 61);
    const double fine = discrete_angular(1.0, 2.0, 1, 121);
    const double extrapolated = (4.0 * fine - coarse) / 3.0;
    CHECK(std::abs(extrapolated - angular_oracle(1, 1.0, 0, 2.0)) < 1e-3);
  }
}

TEST_CASE("couplings vanish for a straight parallel guide") {
  auto [curve, xg] = make_line(4.0, 24);
  const auto grid = CrossSectionGrid::make(5.0, 20, 2);
  const auto band = solve_band(PotentialFamily::constant(PotentialFamily::harmonic(1.0, 1.5)), grid, xg, 0);
  const auto c = compute_couplings(band, curve, grid);
  CHECK(c.berry.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(c.born_huang.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(c.a2.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(c.eta.maxCoeff() == 0.0);
}

TEST_CASE("parallel potential on a circle has no Born-Huang term") {
  auto [curve, xg] = make_circle(1.0, 24);
  const auto grid = CrossSectionGrid::make(5.0, 20, 2);
  const auto band = solve_band(PotentialFamily::constant(PotentialFamily::harmonic(1.0, 1.0)), grid, xg, 0);
  const auto c = compute_couplings(band, curve, grid);
  CHECK(c.born_huang.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(c.eta.minCoeff() == doctest::Approx(1.0));
  // isotropic ground state is centred
  CHECK(c.m1.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(c.orthogonality_defect < 1e-8);
}

TEST_CASE("real gauge has no Berry connection") {
  const auto b = bent_guide();
  const auto c = compute_couplings(b.band, b.curve, b.grid);
  CHECK(c.connection().cwiseAbs().maxCoeff() < 1e-10);
  CHECK(c.born_huang.maxCoeff() > 1e-4);
  CHECK(c.a3.cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("gauge invariance of the scalar couplings") {
  const auto b = bent_guide();
  const auto ref = compute_couplings(b.band, b.curve, b.grid);
  FiberBand rephased = b.band;
  for (Index i = 0; i < rephased.slices(); ++i)
    rephased.phi.col(i) *= std::polar(1.0, 1.3 * std::sin(0.7 * rephased.xgrid.x(i)) + 0.2);
  const auto c = compute_couplings(rephased, b.curve, b.grid);
  CHECK((c.born_huang - ref.born_huang).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((c.a2 - ref.a2).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((c.a3 - ref.a3).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((c.a4 - ref.a4).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((c.m1 - ref.m1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("moment profile matches the coupling moments") {
  const auto b = bent_guide();
  const auto c = compute_couplings(b.band, b.curve, b.grid);
  const auto m = moment_profile(b.band, b.curve, b.grid);
  CHECK((m.m1 - c.m1).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((m.m2 - c.m2).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("Moebius band: connection 1/(2R) and link phases pi/M") {
  auto [curve, xg] = make_circle(1.0, 32);
  const auto grid = CrossSectionGrid::make(5.0, 24, 2);
  const auto pot = PotentialFamily::twisted(PotentialFamily::harmonic(1.0, 2.0), TwistProfile::constant_rate(0.5), true);
  const auto band = solve_band(pot, grid, xg, 1);
  const auto c = compute_couplings(band, curve, grid);
  const double pi = std::numbers::pi;
  CHECK(std::abs(std::remainder(c.link_phase.sum(), 2.0 * pi)) == doctest::Approx(pi).epsilon(1e-8));
  for (Index i = 0; i < xg.M; ++i) CHECK(std::abs(c.link_phase(i)) == doctest::Approx(pi / xg.M).epsilon(1e-8));
  CHECK(std::abs(c.connection().mean()) == doctest::Approx(0.5).epsilon(2e-3));
}

TEST_CASE("coupling input validation") {
  auto [curve, xg] = make_line(4.0, 16);
  const auto grid = CrossSectionGrid::make(5.0, 16, 2);
  const auto band = solve_band(PotentialFamily::constant(PotentialFamily::harmonic(1.0, 1.0)), grid, xg, 0);
  CHECK_THROWS_AS(compute_couplings(band, curve, CrossSectionGrid::make(4.0, 16, 2)), GridMismatch);
  FiberBand raw = band;
  raw.gauged = false;
  CHECK_THROWS_AS(compute_couplings(raw, curve, grid), GridMismatch);
}
