#include "waveband/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace waveband {

std::string to_string(Topology t) { return t == Topology::circle ? "circle" : "line"; }

Grid1D Grid1D::periodic(double length, Index M) {
  if (M < 8) throw DimensionTooSmall("Grid1D needs M >= 8");
  if (!(length > 0.0)) throw InvalidRadius("grid length must be positive");
  return Grid1D{M, length / static_cast<double>(M), length, Boundary::periodic};
}

Grid1D Grid1D::dirichlet(double length, Index M) {
  if (M < 8) throw DimensionTooSmall("Grid1D needs M >= 8");
  if (!(length > 0.0)) throw InvalidRadius("grid length must be positive");
  return Grid1D{M, length / static_cast<double>(M + 1), length, Boundary::dirichlet};
}

Eigen::VectorXd Grid1D::points() const {
  Eigen::VectorXd p(M);
  for (Index i = 0; i < M; ++i) p(i) = x(i);
  return p;
}

TabulatedProfile::TabulatedProfile(std::vector<double> xs, std::vector<double> ys, double period)
    : xs_(std::move(xs)), ys_(std::move(ys)), period_(period) {
  const std::size_t n = xs_.size();
  if (n < 2 || ys_.size() != n) throw ConfigError("profile table needs at least two rows of equal length");
  for (std::size_t i = 1; i < n; ++i)
    if (!(xs_[i] > xs_[i - 1])) throw ConfigError("profile abscissae must be strictly increasing");
  slopes_.resize(n);
  auto secant = [&](std::size_t a, std::size_t b) { return (ys_[b] - ys_[a]) / (xs_[b] - xs_[a]); };
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double hl = xs_[i] - xs_[i - 1], hr = xs_[i + 1] - xs_[i];
    slopes_[i] = (hr * secant(i - 1, i) + hl * secant(i, i + 1)) / (hl + hr);
  }
  if (period_ > 0.0 && n >= 3) {
    // Samples span [x0, x0 + period]; endpoints share a slope.
    const double hl = xs_[n - 1] - xs_[n - 2], hr = xs_[1] - xs_[0];
    const double s = (hr * secant(n - 2, n - 1) + hl * secant(0, 1)) / (hl + hr);
    slopes_[0] = slopes_[n - 1] = s;
  } else {
    slopes_[0] = secant(0, 1);
    slopes_[n - 1] = secant(n - 2, n - 1);
  }
}

double TabulatedProfile::wrap(double x) const {
  if (period_ <= 0.0) return std::clamp(x, xs_.front(), xs_.back());
  const double x0 = xs_.front();
  double t = std::fmod(x - x0, period_);
  if (t < 0.0) t += period_;
  return x0 + t;
}

std::size_t TabulatedProfile::locate(double x) const {
  auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  std::size_t i = it == xs_.begin() ? 0 : static_cast<std::size_t>(it - xs_.begin()) - 1;
  return std::min(i, xs_.size() - 2);
}

double TabulatedProfile::operator()(double x) const {
  x = wrap(x);
  const std::size_t i = locate(x);
  if (x == xs_[i]) return ys_[i];
  const double h = xs_[i + 1] - xs_[i], t = (x - xs_[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * ys_[i] + (t3 - 2 * t2 + t) * h * slopes_[i] + (-2 * t3 + 3 * t2) * ys_[i + 1] +
         (t3 - t2) * h * slopes_[i + 1];
}

double TabulatedProfile::derivative(double x) const {
  x = wrap(x);
  const std::size_t i = locate(x);
  const double h = xs_[i + 1] - xs_[i], t = (x - xs_[i]) / h;
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * ys_[i] + (-6 * t2 + 6 * t) * ys_[i + 1]) / h + (3 * t2 - 4 * t + 1) * slopes_[i] +
         (3 * t2 - 2 * t) * slopes_[i + 1];
}

TwistProfile TwistProfile::none() {
  return {[](double) { return 0.0; }, [](double) { return 0.0; }};
}

TwistProfile TwistProfile::constant_rate(double rate, double angle0) {
  return {[=](double x) { return angle0 + rate * x; }, [=](double) { return rate; }};
}

TwistProfile TwistProfile::smooth_step(double total, double center, double width) {
  return {[=](double x) { return 0.5 * total * (1.0 + std::tanh((x - center) / width)); },
          [=](double x) {
            const double c = std::cosh((x - center) / width);
            return 0.5 * total / (width * c * c);
          }};
}

bool TwistProfile::is_trivial(const Grid1D& grid) const {
  for (Index i = 0; i < grid.M; ++i)
    if (angle(grid.x(i)) != 0.0 || rate(grid.x(i)) != 0.0) return false;
  return true;
}

bool TwistProfile::half_twist(double length) const {
  const double turns = total_angle(length) / std::numbers::pi;
  const double r = std::round(turns);
  return std::abs(turns - r) < 1e-9 && std::fmod(std::abs(r), 2.0) == 1.0;
}

int TwistProfile::quarter_turns(double length) const {
  const double q = total_angle(length) / (0.5 * std::numbers::pi);
  const double r = std::round(q);
  if (std::abs(q - r) > 1e-9) return -1;
  return static_cast<int>(((static_cast<long long>(r) % 4) + 4) % 4);
}

bool CurveSpec::is_straight(const Grid1D& grid) const { return max_curvature(grid) == 0.0; }

double CurveSpec::max_curvature(const Grid1D& grid) const {
  double m = 0.0;
  for (Index i = 0; i < grid.M; ++i) m = std::max(m, curvature(grid.x(i)));
  // Midpoints enter the tube stencil as well.
  for (Index i = 0; i < grid.M; ++i) m = std::max(m, curvature(grid.x(i) + 0.5 * grid.h));
  return m;
}

std::pair<CurveSpec, Grid1D> make_circle(double R, Index M) {
  if (!(R > 0.0) || !std::isfinite(R)) throw InvalidRadius("circle radius must be positive and finite");
  CurveSpec c;
  c.topology = Topology::circle;
  c.length = 2.0 * std::numbers::pi * R;
  const double k = 1.0 / R;
  c.kappa1 = [k](double) { return k; };
  c.kappa2 = [](double) { return 0.0; };
  return {c, Grid1D::periodic(c.length, M)};
}

std::pair<CurveSpec, Grid1D> make_line(double L, Index M, Profile kappa1, Profile kappa2) {
  CurveSpec c;
  c.topology = Topology::line;
  c.length = L;
  c.kappa1 = kappa1 ? std::move(kappa1) : Profile([](double) { return 0.0; });
  c.kappa2 = kappa2 ? std::move(kappa2) : Profile([](double) { return 0.0; });
  return {c, Grid1D::dirichlet(L, M)};
}

Profile sech2_bump(double k0, double center, double width) {
  return [=](double x) {
    const double c = std::cosh((x - center) / width);
    return k0 / (c * c);
  };
}

ProfileTable read_profile_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profile table " + path);
  ProfileTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (std::isalpha(static_cast<unsigned char>(line[0]))) continue;  // header
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double x, k1, k2, a;
    if (!(ss >> x >> k1 >> k2 >> a)) throw ConfigError(path + ": expected columns x,kappa1,kappa2,alpha", lineno);
    t.x.push_back(x);
    t.kappa1.push_back(k1);
    t.kappa2.push_back(k2);
    t.alpha.push_back(a);
  }
  if (t.x.size() < 2) throw ConfigError(path + ": profile table needs at least two rows");
  return t;
}

void write_profile_csv(const std::string& path, const ProfileTable& t) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write profile table " + path);
  out << "x,kappa1,kappa2,alpha\n" << std::setprecision(17);
  for (std::size_t i = 0; i < t.x.size(); ++i)
    out << t.x[i] << ',' << t.kappa1[i] << ',' << t.kappa2[i] << ',' << t.alpha[i] << '\n';
}

std::pair<CurveSpec, TwistProfile> curve_from_table(const ProfileTable& t, Topology topology, double length) {
  CurveSpec c;
  c.topology = topology;
  c.length = length;
  const bool periodic = topology == Topology::circle;
  if (periodic) {
    if (std::abs(t.x.front()) > 1e-12 || std::abs(t.x.back() - length) > 1e-12)
      throw ConfigError("circle profile table must span [0, L] including both endpoints");
    if (std::abs(t.kappa1.front() - t.kappa1.back()) > 1e-12 || std::abs(t.kappa2.front() - t.kappa2.back()) > 1e-12)
      throw TopologyMismatch("circle curvature profile is not periodic");
  }
  const double period = periodic ? length : 0.0;
  auto k1 = std::make_shared<TabulatedProfile>(t.x, t.kappa1, period);
  auto k2 = std::make_shared<TabulatedProfile>(t.x, t.kappa2, period);
  c.kappa1 = [k1](double x) { return (*k1)(x); };
  c.kappa2 = [k2](double x) { return (*k2)(x); };

  TwistProfile tw;
  if (periodic) {
    // Split alpha into a periodic part plus a linear ramp carrying the total angle.
    const double total = t.alpha.back() - t.alpha.front();
    const double slope = total / length;
    std::vector<double> per(t.alpha.size());
    for (std::size_t i = 0; i < per.size(); ++i) per[i] = t.alpha[i] - slope * (t.x[i] - t.x.front());
    auto a = std::make_shared<TabulatedProfile>(t.x, per, period);
    const double x0 = t.x.front();
    tw.angle = [a, slope, x0, length](double x) {
      // Exact samples at tabulated points, including the endpoint x = L.
      const double turns = std::floor((x - x0) / length);
      return (*a)(x) + slope * (x - x0 - turns * length) + slope * turns * length;
    };
    tw.rate = [a, slope](double x) { return a->derivative(x) + slope; };
  } else {
    auto a = std::make_shared<TabulatedProfile>(t.x, t.alpha, 0.0);
    tw.angle = [a](double x) { return (*a)(x); };
    tw.rate = [a](double x) { return a->derivative(x); };
  }
  return {c, tw};
}

}  // namespace waveband
