#include "waveband/scenario.hpp"

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

namespace waveband {

namespace {

using json = nlohmann::json;

// Line on which each value starts, keyed by JSON pointer. Runs on text that
// already parsed, so it only has to walk the structure.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) : s_(text) {
    value("");
  }
  int line(const std::string& pointer) const {
    auto it = lines_.find(pointer);
    return it == lines_.end() ? 0 : it->second;
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      if (s_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }
  std::string string() {
    std::string out;
    ++pos_;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\') {
        ++pos_;
        if (pos_ < s_.size()) out.push_back(s_[pos_] == '/' ? '/' : s_[pos_]);
      } else {
        out.push_back(s_[pos_]);
      }
      ++pos_;
    }
    ++pos_;
    return out;
  }
  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out.push_back(c);
    }
    return out;
  }
  void value(const std::string& path) {
    skip();
    if (pos_ >= s_.size()) return;
    lines_[path] = line_;
    const char c = s_[pos_];
    if (c == '{') {
      ++pos_;
      for (;;) {
        skip();
        if (pos_ >= s_.size() || s_[pos_] == '}') break;
        const std::string key = string();
        skip();
        ++pos_;  // ':'
        value(path + "/" + escape(key));
        skip();
        if (pos_ < s_.size() && s_[pos_] == ',') ++pos_;
      }
      ++pos_;
    } else if (c == '[') {
      ++pos_;
      for (int i = 0;; ++i) {
        skip();
        if (pos_ >= s_.size() || s_[pos_] == ']') break;
        value(path + "/" + std::to_string(i));
        skip();
        if (pos_ < s_.size() && s_[pos_] == ',') ++pos_;
      }
      ++pos_;
    } else if (c == '"') {
      string();
    } else {
      while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != '}' && s_[pos_] != ']' &&
             !std::isspace(static_cast<unsigned char>(s_[pos_])))
        ++pos_;
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

class Reader {
 public:
  Reader(const json& root, const LineIndex& lines) : root_(root), lines_(lines) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& msg) const {
    std::string p = pointer;
    int line = lines_.line(p);
    while (line == 0 && !p.empty()) {
      p = p.substr(0, p.rfind('/'));
      line = lines_.line(p);
    }
    throw ConfigError(msg, line);
  }

  const json* find(const std::string& pointer) const {
    const json::json_pointer ptr(pointer);
    return root_.contains(ptr) ? &root_.at(ptr) : nullptr;
  }

  // Rejects keys outside `allowed` in the object at `pointer`.
  void only(const std::string& pointer, std::initializer_list<const char*> allowed) const {
    const json* obj = find(pointer);
    if (!obj) return;
    if (!obj->is_object()) fail(pointer, "'" + pointer + "' must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj->begin(); it != obj->end(); ++it)
      if (!ok.count(it.key())) fail(pointer + "/" + it.key(), "unknown key '" + it.key() + "' in '" + pointer + "'");
  }

  double number(const std::string& pointer, std::optional<double> fallback = std::nullopt) const {
    const json* v = find(pointer);
    if (!v) {
      if (fallback) return *fallback;
      fail(pointer, "missing required number '" + pointer + "'");
    }
    if (!v->is_number()) fail(pointer, "'" + pointer + "' must be a number");
    return v->get<double>();
  }
  long integer(const std::string& pointer, std::optional<long> fallback = std::nullopt) const {
    const json* v = find(pointer);
    if (!v) {
      if (fallback) return *fallback;
      fail(pointer, "missing required integer '" + pointer + "'");
    }
    if (!v->is_number_integer()) fail(pointer, "'" + pointer + "' must be an integer");
    return v->get<long>();
  }
  std::string text(const std::string& pointer, std::optional<std::string> fallback = std::nullopt) const {
    const json* v = find(pointer);
    if (!v) {
      if (fallback) return *fallback;
      fail(pointer, "missing required string '" + pointer + "'");
    }
    if (!v->is_string()) fail(pointer, "'" + pointer + "' must be a string");
    return v->get<std::string>();
  }
  bool flag(const std::string& pointer, bool fallback) const {
    const json* v = find(pointer);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(pointer, "'" + pointer + "' must be true or false");
    return v->get<bool>();
  }
  std::string choice(const std::string& pointer, std::initializer_list<const char*> options,
                     std::optional<std::string> fallback = std::nullopt) const {
    const std::string v = text(pointer, fallback);
    for (const char* o : options)
      if (v == o) return v;
    std::string msg = "'" + pointer + "' must be one of";
    for (const char* o : options) msg += std::string(" ") + o;
    fail(pointer, msg + " (got '" + v + "')");
  }

 private:
  const json& root_;
  const LineIndex& lines_;
};

int line_of_offset(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    std::string what = e.what();
    const auto cut = what.find("parse error");
    throw ConfigError("malformed JSON: " + (cut == std::string::npos ? what : what.substr(cut)),
                      line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  const LineIndex lines(text);
  const Reader r(root, lines);
  if (!root.is_object()) r.fail("", "scenario must be a JSON object");
  r.only("", {"name", "description", "geometry", "potential", "grids", "eps", "levels", "band", "flags", "dynamics",
              "expect"});
  r.only("/geometry", {"topology", "radius", "length", "curvature", "twist", "table"});
  r.only("/geometry/curvature", {"kind", "kappa0", "center", "width"});
  r.only("/geometry/twist", {"kind", "rate", "total", "center", "width"});
  r.only("/potential", {"kind", "omega", "base", "amplitude", "center", "width", "csv", "reflection_symmetric"});
  r.only("/grids", {"M", "N", "r_max", "fiber_dim"});
  r.only("/flags", {"include_quartic", "run_reference", "run_dynamics", "twist_prediction", "ho_prediction"});
  r.only("/dynamics", {"dt", "time_factor", "offset", "width_factor", "samples"});

  Scenario s;
  s.base_dir = base_dir;
  s.name = r.text("/name");
  if (s.name.empty()) r.fail("/name", "name must not be empty");
  for (char c : s.name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'))
      r.fail("/name", "name may only contain letters, digits, '-' and '_'");
  s.description = r.text("/description", std::string());

  auto& g = s.geometry;
  const std::string topo = r.choice("/geometry/topology", {"line", "circle"});
  g.topology = topo == "circle" ? Topology::circle : Topology::line;
  g.table = r.text("/geometry/table", std::string());
  if (g.topology == Topology::circle) {
    g.radius = r.number("/geometry/radius", g.table.empty() ? std::nullopt : std::optional<double>(1.0));
    if (!(g.radius > 0.0)) r.fail("/geometry/radius", "radius must be positive");
    g.length = 2.0 * std::numbers::pi * g.radius;
    if (r.find("/geometry/length")) r.fail("/geometry/length", "a circle is given by its radius, not a length");
  } else {
    g.length = r.number("/geometry/length");
    if (!(g.length > 0.0)) r.fail("/geometry/length", "length must be positive");
  }
  if (g.table.empty()) {
    g.kappa = r.choice("/geometry/curvature/kind", {"none", "constant", "bump"}, std::string("none"));
    g.kappa0 = r.number("/geometry/curvature/kappa0", 0.0);
    g.kappa_center = r.number("/geometry/curvature/center", 0.0);
    g.kappa_width = r.number("/geometry/curvature/width", 1.0);
    if (g.topology == Topology::circle && g.kappa != "none")
      r.fail("/geometry/curvature", "a circle's curvature is fixed by its radius");
    if (g.kappa == "bump" && !(g.kappa_width > 0.0)) r.fail("/geometry/curvature/width", "width must be positive");
    auto& t = g.twist;
    t.kind = r.choice("/geometry/twist/kind", {"none", "constant", "step"}, std::string("none"));
    t.rate = r.number("/geometry/twist/rate", 0.0);
    t.total = r.number("/geometry/twist/total", 0.0);
    t.center = r.number("/geometry/twist/center", 0.0);
    t.width = r.number("/geometry/twist/width", 1.0);
    if (t.kind == "step" && !(t.width > 0.0)) r.fail("/geometry/twist/width", "width must be positive");
  } else {
    if (r.find("/geometry/curvature") || r.find("/geometry/twist"))
      r.fail("/geometry/table", "a profile table replaces the curvature and twist blocks");
    g.kappa = "table";
  }

  auto& p = s.potential;
  p.kind = r.choice("/potential/kind", {"harmonic", "width_family", "csv"});
  if (const json* om = r.find("/potential/omega")) {
    if (!om->is_array() || om->size() != 2 || !(*om)[0].is_number() || !(*om)[1].is_number())
      r.fail("/potential/omega", "omega must be a pair of numbers");
    p.omega1 = (*om)[0].get<double>();
    p.omega2 = (*om)[1].get<double>();
    if (!(p.omega1 > 0.0 && p.omega2 > 0.0)) r.fail("/potential/omega", "omega entries must be positive");
  }
  p.base = r.number("/potential/base", 1.0);
  p.amplitude = r.number("/potential/amplitude", 0.5);
  p.center = r.number("/potential/center", 0.5 * g.length);
  p.width = r.number("/potential/width", 1.0);
  p.csv = r.text("/potential/csv", std::string());
  p.reflection_symmetric = r.flag("/potential/reflection_symmetric", false);
  if (p.kind == "csv" && p.csv.empty()) r.fail("/potential", "kind 'csv' needs a 'csv' file");
  if (p.kind == "width_family" && !(p.base > 0.0 && p.base + p.amplitude > 0.0 && p.width > 0.0))
    r.fail("/potential", "width family needs base > 0, base + amplitude > 0 and width > 0");

  s.M = r.integer("/grids/M");
  s.N = r.integer("/grids/N");
  s.r_max = r.number("/grids/r_max", 5.0);
  s.fiber_dim = static_cast<int>(r.integer("/grids/fiber_dim", 2));
  if (s.M < 8) r.fail("/grids/M", "M must be at least 8");
  if (s.N < 16) r.fail("/grids/N", "N must be at least 16");
  if (!(s.r_max > 0.0)) r.fail("/grids/r_max", "r_max must be positive");
  if (s.fiber_dim != 1 && s.fiber_dim != 2) r.fail("/grids/fiber_dim", "fiber_dim must be 1 or 2");

  const json* eps = r.find("/eps");
  if (!eps) r.fail("", "missing required array 'eps'");
  if (!eps->is_array()) r.fail("/eps", "eps must be an array of numbers");
  for (std::size_t i = 0; i < eps->size(); ++i) {
    const std::string ptr = "/eps/" + std::to_string(i);
    if (!(*eps)[i].is_number()) r.fail(ptr, "eps entries must be numbers");
    const double e = (*eps)[i].get<double>();
    if (!(e > 0.0 && e < 1.0)) r.fail(ptr, "eps entries must lie in (0, 1)");
    if (!s.eps.empty() && !(e < s.eps.back())) r.fail(ptr, "eps list must be strictly decreasing");
    s.eps.push_back(e);
  }
  if (s.eps.size() < 3) r.fail("/eps", "convergence fits need at least 3 eps values");

  s.levels = static_cast<int>(r.integer("/levels", 3));
  s.band = static_cast<int>(r.integer("/band", 0));
  if (s.levels < 1) r.fail("/levels", "levels must be positive");
  if (s.band < 0) r.fail("/band", "band must be non-negative");

  s.include_quartic = r.flag("/flags/include_quartic", true);
  s.run_reference = r.flag("/flags/run_reference", true);
  s.run_dynamics = r.flag("/flags/run_dynamics", false);
  s.twist_prediction = r.flag("/flags/twist_prediction", false);
  s.ho_prediction = r.flag("/flags/ho_prediction", false);

  const Index fiber = s.fiber_dim == 2 ? s.N * s.N : s.N;
  if (s.run_reference && s.M * fiber > kMaxTubeUnknowns)
    r.fail("/grids", "tube grid exceeds " + std::to_string(kMaxTubeUnknowns) + " unknowns");
  if (s.run_dynamics && (s.fiber_dim != 1 || g.topology != Topology::line || g.kappa != "none"))
    r.fail("/flags/run_dynamics", "dynamics runs on a straight line with a one-dimensional fiber");

  auto& d = s.dynamics;
  d.dt = r.number("/dynamics/dt", d.dt);
  d.time_factor = r.number("/dynamics/time_factor", d.time_factor);
  d.offset = r.number("/dynamics/offset", d.offset);
  d.width_factor = r.number("/dynamics/width_factor", d.width_factor);
  d.samples = static_cast<int>(r.integer("/dynamics/samples", d.samples));
  if (!(d.dt > 0.0) || !(d.time_factor > 0.0) || !(d.width_factor > 0.0) || d.samples < 1)
    r.fail("/dynamics", "dt, time_factor, width_factor and samples must be positive");

  if (const json* ex = r.find("/expect")) {
    if (!ex->is_array()) r.fail("/expect", "expect must be an array");
    for (std::size_t i = 0; i < ex->size(); ++i) {
      const std::string ptr = "/expect/" + std::to_string(i);
      r.only(ptr, {"quantity", "min_order", "max_order", "levels"});
      Expectation e;
      e.quantity = r.choice(ptr + "/quantity", {"eigenvalue_error", "quasimode_residual", "twist_error", "ho_error", "dynamics_error"});
      e.min_order = r.number(ptr + "/min_order");
      e.max_order = r.number(ptr + "/max_order", e.max_order);
      if (!(e.max_order >= e.min_order)) r.fail(ptr + "/max_order", "max_order must not be below min_order");
      if (e.quantity == "dynamics_error" && !s.run_dynamics)
        r.fail(ptr + "/quantity", "dynamics_error needs flags.run_dynamics");
      if ((e.quantity == "eigenvalue_error" || e.quantity == "quasimode_residual" || e.quantity == "twist_error" ||
           e.quantity == "ho_error") && !s.run_reference)
        r.fail(ptr + "/quantity", e.quantity + " needs flags.run_reference");
      if (e.quantity == "twist_error" && !s.twist_prediction) r.fail(ptr + "/quantity", "twist_error needs flags.twist_prediction");
      if (e.quantity == "ho_error" && !s.ho_prediction) r.fail(ptr + "/quantity", "ho_error needs flags.ho_prediction");
      if (const json* lv = r.find(ptr + "/levels")) {
        if (!lv->is_array()) r.fail(ptr + "/levels", "levels must be an array of integers");
        for (std::size_t j = 0; j < lv->size(); ++j) {
          const std::string lp = ptr + "/levels/" + std::to_string(j);
          if (!(*lv)[j].is_number_integer()) r.fail(lp, "levels must be integers");
          const int l = (*lv)[j].get<int>();
          if (l < 0 || l >= s.levels) r.fail(lp, "level out of range");
          e.levels.push_back(l);
        }
      }
      s.expect.push_back(e);
    }
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_scenario(buf.str(), dir.empty() ? std::string(".") : dir.string());
}

ScenarioModel build_model(const Scenario& s) {
  ScenarioModel m;
  const auto& g = s.geometry;
  auto resolve = [&](const std::string& f) {
    const std::filesystem::path p(f);
    return p.is_absolute() ? p.string() : (std::filesystem::path(s.base_dir) / p).string();
  };
  if (g.kappa == "table") {
    auto [curve, twist] = curve_from_table(read_profile_csv(resolve(g.table)), g.topology, g.length);
    m.curve = std::move(curve);
    m.twist = std::move(twist);
    m.xgrid = g.topology == Topology::circle ? Grid1D::periodic(g.length, s.M) : Grid1D::dirichlet(g.length, s.M);
  } else {
    if (g.topology == Topology::circle) {
      std::tie(m.curve, m.xgrid) = make_circle(g.radius, s.M);
    } else {
      Profile k1 = nullptr;
      if (g.kappa == "constant") {
        const double k0 = g.kappa0;
        k1 = [k0](double) { return k0; };
      } else if (g.kappa == "bump") {
        k1 = sech2_bump(g.kappa0, g.kappa_center, g.kappa_width);
      }
      std::tie(m.curve, m.xgrid) = make_line(g.length, s.M, k1);
    }
    const auto& t = g.twist;
    if (t.kind == "constant") m.twist = TwistProfile::constant_rate(t.rate);
    else if (t.kind == "step") m.twist = TwistProfile::smooth_step(t.total, t.center, t.width);
    else m.twist = TwistProfile::none();
  }

  const auto& p = s.potential;
  if (p.kind == "width_family") {
    const double b = p.base, a = p.amplitude, c = p.center, w = p.width;
    m.potential = PotentialFamily::shape_family([b, a, c, w](double x, double n1, double n2) {
      const double t = std::tanh((x - c) / w);
      const double om = b + a * t * t;
      return om * om * (n1 * n1 + n2 * n2);
    });
  } else {
    auto base = p.kind == "csv" ? read_potential_csv(resolve(p.csv)) : PotentialFamily::harmonic(p.omega1, p.omega2);
    m.potential = m.twist.is_trivial(m.xgrid) ? PotentialFamily::constant(std::move(base), p.reflection_symmetric)
                                              : PotentialFamily::twisted(std::move(base), m.twist, p.reflection_symmetric);
  }
  m.grid = CrossSectionGrid::make(s.r_max, s.N, s.fiber_dim);
  return m;
}

}  // namespace waveband
