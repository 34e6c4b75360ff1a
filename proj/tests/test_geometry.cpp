#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "waveband/geometry.hpp"

using namespace waveband;

TEST_CASE("grids place nodes as documented") {
  const auto p = Grid1D::periodic(2.0, 8);
  CHECK(p.h == doctest::Approx(0.25));
  CHECK(p.x(0) == 0.0);
  const auto d = Grid1D::dirichlet(2.0, 9);
  CHECK(d.h == doctest::Approx(0.2));
  CHECK(d.x(0) == doctest::Approx(0.2));
  CHECK(d.x(8) == doctest::Approx(1.8));
  CHECK_THROWS_AS(Grid1D::periodic(1.0, 4), DimensionTooSmall);
  CHECK_THROWS_AS(make_circle(-1.0, 16), InvalidRadius);
}

TEST_CASE("circle has constant curvature 1/R") {
  auto [curve, grid] = make_circle(2.0, 32);
  CHECK(curve.topology == Topology::circle);
  CHECK(curve.length == doctest::Approx(4.0 * std::numbers::pi));
  CHECK(grid.boundary == Boundary::periodic);
  for (Index i = 0; i < grid.M; i += 5) CHECK(curve.curvature(grid.x(i)) == doctest::Approx(0.5));
  auto [line, lg] = make_line(3.0, 16);
  CHECK(line.is_straight(lg));
}

TEST_CASE("twist profiles") {
  const auto half = TwistProfile::constant_rate(0.5);
  const double L = 2.0 * std::numbers::pi;
  CHECK(half.half_twist(L));
  CHECK(half.quarter_turns(L) == 2);
  CHECK(!TwistProfile::constant_rate(1.0).half_twist(L));
  CHECK(TwistProfile::none().is_trivial(Grid1D::periodic(L, 16)));

  const auto step = TwistProfile::smooth_step(1.2, 5.0, 0.5);
  CHECK(step.total_angle(10.0) == doctest::Approx(1.2).epsilon(1e-6));
  // the rate is the derivative of the angle
  const double x = 4.7, d = 1e-5;
  CHECK(step.rate(x) == doctest::Approx((step.angle(x + d) - step.angle(x - d)) / (2 * d)).epsilon(1e-8));
}

TEST_CASE("tabulated profiles reproduce samples and quadratics on uniform tables") {
  std::vector<double> xs, ys;
  for (int i = 0; i <= 20; ++i) {
    xs.push_back(0.1 * i);
    ys.push_back(1.0 + 0.3 * xs.back() - 0.7 * xs.back() * xs.back());
  }
  const TabulatedProfile p(xs, ys);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(p(xs[i]) == doctest::Approx(ys[i]).epsilon(1e-15));
  for (int i = 2; i < 18; ++i) {
    const double x = 0.1 * i + 0.037;
    CHECK(p(x) == doctest::Approx(1.0 + 0.3 * x - 0.7 * x * x).epsilon(1e-12));
  }
}

TEST_CASE("profile tables round-trip through CSV") {
  ProfileTable t;
  for (int i = 0; i < 16; ++i) {
    const double x = 0.25 * i;
    t.x.push_back(x);
    t.kappa1.push_back(std::sin(x));
    t.kappa2.push_back(0.1 * x);
    t.alpha.push_back(0.5 * x);
  }
  const auto path = (std::filesystem::temp_directory_path() / "waveband_profile.csv").string();
  write_profile_csv(path, t);
  const auto back = read_profile_csv(path);
  REQUIRE(back.x.size() == t.x.size());
  for (std::size_t i = 0; i < t.x.size(); ++i) {
    CHECK(back.kappa1[i] == t.kappa1[i]);
    CHECK(back.alpha[i] == t.alpha[i]);
  }
  auto [curve, twist] = curve_from_table(back, Topology::line, 3.75);
  CHECK(curve.kappa1(1.0) == doctest::Approx(std::sin(1.0)));
  CHECK(twist.rate(2.0) == doctest::Approx(0.5).epsilon(1e-10));
}
