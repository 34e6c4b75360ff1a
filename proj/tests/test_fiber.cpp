#include <doctest.h>

#include <cmath>
#include <numbers>

#include "waveband/fiber.hpp"

using namespace waveband;

namespace {

double fiber_level(double omega1, double omega2, double r_max, Index N, int dim, int k) {
  const auto grid = CrossSectionGrid::make(r_max, N, dim);
  const auto pot = PotentialFamily::constant(PotentialFamily::harmonic(omega1, omega2));
  const auto op = assemble_fiber_operator(0.0, pot, grid);
  return lowest_eigenpairs(op, k + 1, 1e-12).eigenvalues(k);
}

}  // namespace

TEST_CASE("one-dimensional harmonic fiber levels approach 2n+1") {
  for (int n = 0; n < 3; ++n) CHECK(std::abs(fiber_level(1.0, 1.0, 8.0, 401, 1, n) - (2 * n + 1)) < 2e-3);
}

TEST_CASE("fiber eigenvalues converge at second order under grid refinement") {
  // anisotropic oscillator ground state: omega1 + omega2 = 3
  const double coarse = fiber_level(1.0, 2.0, 5.0, 25, 2, 0);
  const double mid = fiber_level(1.0, 2.0, 5.0, 49, 2, 0);
  const double fine = fiber_level(1.0, 2.0, 5.0, 97, 2, 0);
  const double order = std::log2(std::abs(coarse - mid) / std::abs(mid - fine));
  CHECK(order == doctest::Approx(2.0).epsilon(0.1));
  CHECK(std::abs(fine - 3.0) < 5e-3);
}

TEST_CASE("x-independent band is flat, normalized and contained") {
  auto [curve, xg] = make_circle(1.0, 32);
  const auto grid = CrossSectionGrid::make(5.0, 24, 2);
  const auto pot = PotentialFamily::constant(PotentialFamily::harmonic(1.0, 1.0));
  const auto band = solve_band(pot, grid, xg, 0);
  CHECK(band.x_independent);
  CHECK(band.periodicity == Periodicity::periodic);
  CHECK(band.energy.maxCoeff() - band.energy.minCoeff() < 1e-12);
  for (Index i = 0; i < band.slices(); i += 7) CHECK(std::abs(fiber_dot(grid, band.phi.col(i), band.phi.col(i)).real() - 1.0) < 1e-12);
  CHECK(band.max_boundary_mass() < 1e-8);
  CHECK(band.gap.minCoeff() > 1.5);
}

TEST_CASE("half twist makes the first excited band antiperiodic") {
  auto [curve, xg] = make_circle(1.0, 32);
  const auto grid = CrossSectionGrid::make(5.0, 24, 2);
  const auto pot = PotentialFamily::twisted(PotentialFamily::harmonic(1.0, 2.0), TwistProfile::constant_rate(0.5), true);
  const auto ground = solve_band(pot, grid, xg, 0);
  const auto excited = solve_band(pot, grid, xg, 1);
  CHECK(ground.periodicity == Periodicity::periodic);
  CHECK(excited.periodicity == Periodicity::antiperiodic);
  CHECK(std::abs(std::abs(excited.holonomy) - std::numbers::pi) < 1e-8);
  // the regauged section is single valued: e^{i pi x / L} per unit length
  CHECK(std::abs(excited.gauge_rate) == doctest::Approx(0.5));
  CHECK(excited.gauged);
}

TEST_CASE("shape family band follows the local oscillator frequency") {
  auto [curve, xg] = make_line(8.0, 31);
  const auto grid = CrossSectionGrid::make(6.0, 201, 1);
  const auto pot = PotentialFamily::shape_family([](double x, double n1, double) {
    const double om = 1.0 + 0.5 * std::pow(std::tanh(x - 4.0), 2);
    return om * om * n1 * n1;
  });
  const auto band = solve_band(pot, grid, xg, 0);
  CHECK(!band.x_independent);
  for (Index i = 0; i < xg.M; i += 5) {
    const double om = 1.0 + 0.5 * std::pow(std::tanh(xg.x(i) - 4.0), 2);
    CHECK(std::abs(band.energy(i) - om) < 2e-3);
  }
  // real section on a line
  CHECK(band.is_real);
}
