#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "waveband/numerics/types.hpp"

namespace waveband {

enum class Topology { line, circle };
enum class Boundary { periodic, dirichlet };

std::string to_string(Topology t);

// Uniform grid on [0, L]. Periodic grids hold x_i = i h (h = L/M); Dirichlet
// grids hold the interior points x_i = (i+1) h (h = L/(M+1)).
struct Grid1D {
  Index M = 0;
  double h = 0.0;
  double length = 0.0;
  Boundary boundary = Boundary::periodic;

  static Grid1D periodic(double length, Index M);
  static Grid1D dirichlet(double length, Index M);

  double x(Index i) const { return boundary == Boundary::periodic ? i * h : (i + 1) * h; }
  Eigen::VectorXd points() const;
  bool operator==(const Grid1D& o) const {
    return M == o.M && h == o.h && length == o.length && boundary == o.boundary;
  }
};

using Profile = std::function<double(double)>;

// Piecewise-cubic Hermite interpolant through samples; slopes from
// (nonuniform) central differences. Reproduces the samples exactly.
class TabulatedProfile {
 public:
  TabulatedProfile(std::vector<double> xs, std::vector<double> ys, double period = 0.0);
  double operator()(double x) const;
  double derivative(double x) const;
  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& ys() const { return ys_; }

 private:
  double wrap(double x) const;
  std::size_t locate(double x) const;
  std::vector<double> xs_, ys_, slopes_;
  double period_;
};

// Twist angle alpha(x) of the confining potential and its rate.
struct TwistProfile {
  Profile angle;
  Profile rate;

  static TwistProfile none();
  static TwistProfile constant_rate(double rate, double angle0 = 0.0);
  // alpha(x) = total/2 * (1 + tanh((x - center)/width)); rate is a sech^2 bump.
  static TwistProfile smooth_step(double total, double center, double width);

  bool is_trivial(const Grid1D& grid) const;
  double total_angle(double length) const { return angle(length) - angle(0.0); }
  // True when alpha(L) - alpha(0) is an odd multiple of pi.
  bool half_twist(double length) const;
  // Number of quarter turns of alpha(L) - alpha(0) modulo 4, or -1 if the
  // total is not a multiple of pi/2.
  int quarter_turns(double length) const;
};

struct CurveSpec {
  Topology topology = Topology::line;
  double length = 0.0;
  Profile kappa1;
  Profile kappa2;

  Eigen::Vector2d kappa(double x) const { return {kappa1(x), kappa2(x)}; }
  double curvature(double x) const { return std::hypot(kappa1(x), kappa2(x)); }
  bool is_straight(const Grid1D& grid) const;
  double max_curvature(const Grid1D& grid) const;
};

// Circle of radius R; curvature vector along the first frame axis.
std::pair<CurveSpec, Grid1D> make_circle(double R, Index M);
std::pair<CurveSpec, Grid1D> make_line(double L, Index M, Profile kappa1 = nullptr, Profile kappa2 = nullptr);

// kappa1(x) = k0 sech^2((x - center)/width)
Profile sech2_bump(double k0, double center, double width);

// CSV with header and columns x, kappa1, kappa2, alpha.
struct ProfileTable {
  std::vector<double> x, kappa1, kappa2, alpha;
};
ProfileTable read_profile_csv(const std::string& path);
void write_profile_csv(const std::string& path, const ProfileTable& table);
// Builds a curve and twist from a table. For circles the table covers [0, L)
// and is extended periodically (the twist angle is extended by its total).
std::pair<CurveSpec, TwistProfile> curve_from_table(const ProfileTable& table, Topology topology, double length);

}  // namespace waveband
