#include "hyplens/scenario.hpp"

#include "hyplens/mollify.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hyplens {

namespace {

using nlohmann::json;

/// JSON node with its field path for diagnostics.
struct Node {
  const json& j;
  std::string at;

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(at, msg); }

  bool has(const char* key) const { return j.is_object() && j.contains(key); }
  Node operator[](const char* key) const {
    if (!has(key)) fail(std::string("missing field '") + key + "'");
    return {j.at(key), at + "." + key};
  }
  Node operator[](size_t i) const { return {j.at(i), at + "[" + std::to_string(i) + "]"}; }
  size_t size() const {
    if (!j.is_array()) fail("expected an array");
    return j.size();
  }
  double num() const {
    if (!j.is_number()) fail("expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }
  int integer() const {
    if (!j.is_number_integer()) fail("expected an integer");
    return j.get<int>();
  }
  std::string str() const {
    if (!j.is_string()) fail("expected a string");
    return j.get<std::string>();
  }
  bool boolean() const {
    if (!j.is_boolean()) fail("expected true or false");
    return j.get<bool>();
  }
  double num_or(const char* key, double d) const { return has(key) ? (*this)[key].num() : d; }
  int int_or(const char* key, int d) const { return has(key) ? (*this)[key].integer() : d; }
  cplx complex() const {
    if (j.is_number()) return {num(), 0.0};
    if (j.is_array() && j.size() == 2) return {(*this)[size_t{0}].num(), (*this)[size_t{1}].num()};
    fail("expected a number or [re, im]");
  }
  void only(std::initializer_list<const char*> keys) const {
    if (!j.is_object()) fail("expected an object");
    for (const auto& [k, v] : j.items())
      if (std::none_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; }))
        fail("unknown field '" + k + "'");
  }
};

template <class F>
auto wrap(const Node& n, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    n.fail(e.what());
  }
}

Point point(const Node& n, int dim) {
  Point p{0.0, 0.0};
  if (n.size() != static_cast<size_t>(dim)) n.fail("expected " + std::to_string(dim) + " coordinates");
  for (int k = 0; k < dim; ++k) p[k] = n[k].num();
  return p;
}

Profile profile(const Node& n, int dim) {
  n.only({"type", "axis", "base", "other", "x0", "x1", "width", "spacing", "count", "center", "value"});
  static const std::vector<std::pair<std::string, Profile::Type>> names = {
      {"constant", Profile::Type::constant}, {"step", Profile::Type::step},   {"ramp", Profile::Type::ramp},
      {"tanh", Profile::Type::tanh},         {"gaussian", Profile::Type::gaussian}, {"bump", Profile::Type::bump},
      {"kink2", Profile::Type::kink2},       {"sin_eps", Profile::Type::sin_eps},   {"lattice", Profile::Type::lattice}};
  Profile p;
  const std::string type = n["type"].str();
  auto it = std::find_if(names.begin(), names.end(), [&](const auto& e) { return e.first == type; });
  if (it == names.end()) n["type"].fail("unknown profile type '" + type + "'");
  p.type = it->second;
  p.axis = n.int_or("axis", 0);
  if (p.axis < 0 || p.axis >= dim) n["axis"].fail("axis out of range");
  p.base = n.num_or("base", n.num_or("value", 0.0));
  p.other = n.num_or("other", 0.0);
  p.x0 = n.num_or("x0", 0.0);
  p.x1 = n.num_or("x1", 0.0);
  p.width = n.num_or("width", 1.0);
  p.spacing = n.num_or("spacing", 1.0);
  p.count = n.int_or("count", 1);
  if (n.has("center")) p.center = point(n["center"], dim);
  if (!(p.width > 0.0)) n["width"].fail("must be > 0");
  if (p.type == Profile::Type::ramp && !(p.x1 > p.x0)) n.fail("ramp needs x1 > x0");
  if (p.count < 1) n["count"].fail("must be >= 1");
  return p;
}

TimeFactor time_factor(const Node& n) {
  n.only({"type", "base", "amp", "omega", "t0", "weight"});
  TimeFactor f;
  const std::string type = n["type"].str();
  if (type == "constant")
    f.type = TimeFactor::Type::constant;
  else if (type == "sin")
    f.type = TimeFactor::Type::sin;
  else if (type == "delta")
    f.type = TimeFactor::Type::delta;
  else
    n["type"].fail("unknown time factor '" + type + "' (expected constant|sin|delta)");
  f.base = n.num_or("base", n.num_or("weight", 1.0));
  f.amp = n.num_or("amp", 0.0);
  f.omega = n.num_or("omega", 0.0);
  f.t0 = n.num_or("t0", 0.0);
  return f;
}

ScaleLaw law(const Node& n) {
  n.only({"kind", "power"});
  return wrap(n, [&] { return parse_law(n["kind"].str(), n.num_or("power", 1.0)); });
}

CMat matrix(const Node& n, int m) {
  if (n.size() != static_cast<size_t>(m)) n.fail("expected " + std::to_string(m) + " rows");
  CMat a(m, m);
  for (int r = 0; r < m; ++r) {
    const Node row = n[r];
    if (row.size() != static_cast<size_t>(m)) row.fail("expected " + std::to_string(m) + " entries");
    for (int c = 0; c < m; ++c) a(r, c) = row[c].complex();
  }
  return a;
}

CVec vector(const Node& n, int m) {
  if (n.size() != static_cast<size_t>(m)) n.fail("expected " + std::to_string(m) + " entries");
  CVec v(m);
  for (int r = 0; r < m; ++r) v(r) = n[r].complex();
  return v;
}

Profile profile_constant() {
  Profile p;
  p.type = Profile::Type::constant;
  p.base = 1.0;
  return p;
}

CoefficientField coefficient(const Node& n, int m, int dim) {
  n.only({"terms", "time", "law", "far_field", "matrix"});
  CoefficientField c = CoefficientField::zero(m);
  if (n.has("matrix")) c.terms.push_back({profile_constant(), matrix(n["matrix"], m)});
  if (n.has("terms")) {
    const Node terms = n["terms"];
    for (size_t i = 0; i < terms.size(); ++i) {
      const Node t = terms[i];
      t.only({"profile", "matrix"});
      c.terms.push_back({profile(t["profile"], dim), matrix(t["matrix"], m)});
    }
  }
  if (n.has("time")) c.time = time_factor(n["time"]);
  if (n.has("law")) c.law = law(n["law"]);
  if (n.has("far_field")) {
    const Node f = n["far_field"];
    f.only({"C", "R_A"});
    c.far_field = FarFieldBound{f["C"].num(), f.num_or("R_A", 0.0)};
    if (c.far_field->C < 0.0 || c.far_field->R_A < 0.0) f.fail("bounds must be >= 0");
  }
  return c;
}

DataField data(const Node& n, int m, int dim) {
  n.only({"terms", "deltas", "eps_power", "time", "law"});
  DataField d;
  d.m = m;
  if (n.has("terms")) {
    const Node terms = n["terms"];
    for (size_t i = 0; i < terms.size(); ++i) {
      const Node t = terms[i];
      t.only({"profile", "vector"});
      d.terms.push_back({profile(t["profile"], dim), vector(t["vector"], m)});
    }
  }
  if (n.has("deltas")) {
    const Node ds = n["deltas"];
    for (size_t i = 0; i < ds.size(); ++i) {
      const Node t = ds[i];
      t.only({"center", "vector"});
      d.deltas.push_back({point(t["center"], dim), vector(t["vector"], m)});
    }
  }
  d.eps_power = n.num_or("eps_power", 0.0);
  if (n.has("time")) d.time = time_factor(n["time"]);
  if (n.has("law")) d.law = law(n["law"]);
  return d;
}

Numerics numerics(const Node& n) {
  n.only({"scheme", "cells", "max_cells", "max_cells_2d", "half_width", "cfl", "eps", "track_order", "certify",
          "lens", "seed", "battery", "solve_eps"});
  Numerics out;
  if (n.has("scheme")) out.scheme = wrap(n["scheme"], [&] { return parse_scheme(n["scheme"].str()); });
  out.cells = n.int_or("cells", out.cells);
  out.max_cells = n.int_or("max_cells", out.max_cells);
  out.max_cells_2d = n.int_or("max_cells_2d", out.max_cells_2d);
  if (out.cells < 16) n["cells"].fail("need at least 16 cells");
  out.half_width = n.num_or("half_width", 0.0);
  if (out.half_width < 0.0) n["half_width"].fail("must be >= 0");
  out.cfl = n.num_or("cfl", out.cfl);
  if (!(out.cfl > 0.0 && out.cfl <= 0.9)) n["cfl"].fail("must lie in (0, 0.9]");
  if (n.has("eps")) {
    const Node e = n["eps"];
    if (e.j.is_array()) {
      for (size_t i = 0; i < e.size(); ++i) out.eps.push_back(e[i].num());
    } else {
      e.only({"k_min", "k_max"});
      const int lo = e["k_min"].integer(), hi = e["k_max"].integer();
      if (lo < 1 || hi < lo) e.fail("need 1 <= k_min <= k_max");
      out.eps = eps_grid(lo, hi);
    }
  } else {
    out.eps = eps_grid(2, 8);
  }
  for (double v : out.eps)
    if (!(v > 0.0 && v < 1.0)) n["eps"].fail("every eps must lie in (0, 1)");
  std::sort(out.eps.begin(), out.eps.end(), std::greater<>());
  if (std::adjacent_find(out.eps.begin(), out.eps.end()) != out.eps.end()) n["eps"].fail("duplicate eps");
  out.track_order = n.int_or("track_order", out.track_order);
  if (out.track_order < 0 || out.track_order > 2) n["track_order"].fail("must be 0, 1 or 2");
  if (n.has("certify")) {
    const Node c = n["certify"];
    out.certify_strip = false;
    for (size_t i = 0; i < c.size(); ++i) {
      const std::string what = c[i].str();
      if (what == "strip")
        out.certify_strip = true;
      else if (what == "lens") {
        if (!out.lens) out.lens = LensConfig{};
      } else
        c[i].fail("unknown certificate '" + what + "' (expected strip|lens)");
    }
  }
  if (n.has("lens")) {
    const Node l = n["lens"];
    l.only({"R1", "R2"});
    out.lens = LensConfig{l["R1"].num(), l.num_or("R2", 0.0)};
    if (!(out.lens->R1 > 0.0)) l["R1"].fail("must be > 0");
  }
  if (n.has("seed")) {
    const int s = n["seed"].integer();
    if (s < 0) n["seed"].fail("must be >= 0");
    out.seed = static_cast<unsigned>(s);
  }
  out.battery = n.int_or("battery", out.battery);
  out.solve_eps = n.num_or("solve_eps", 0.0);
  return out;
}

std::string line_col(const std::string& text, size_t byte) {
  size_t line = 1, col = 1;
  for (size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

std::optional<Lens> Scenario::lens() const {
  if (!num.lens) return std::nullopt;
  double R2 = num.lens->R2;
  if (R2 <= 0.0) {
    double C = 0.0;
    for (const auto& a : spec->A) C = std::max(C, a.far_field ? a.far_field->C : a.sup_bound());
    R2 = min_outer_radius(spec->T, spec->n, C, num.lens->R1);
  }
  return Lens::make(spec->n, spec->T, num.lens->R1, R2);
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::string msg = e.what();
    if (auto pos = msg.find("] "); pos != std::string::npos) msg = msg.substr(pos + 2);
    if (msg.rfind("parse error at line", 0) == 0)
      if (auto pos = msg.find(": "); pos != std::string::npos) msg = msg.substr(pos + 2);
    throw ConfigError(origin + ": " + line_col(text, e.byte == 0 ? 0 : e.byte - 1), msg);
  }
  const Node root{j, "$"};
  root.only({"schema_version", "name", "n", "m", "T", "theorem", "data_class", "law", "mollifier_moments", "A", "B",
             "F", "G", "numerics", "description"});
  Scenario s;
  s.path = origin;
  s.schema_version = root["schema_version"].integer();
  if (s.schema_version != kSchemaVersion)
    root["schema_version"].fail("unsupported schema version " + std::to_string(s.schema_version) + " (this build reads " +
                                std::to_string(kSchemaVersion) + ")");
  s.name = root["name"].str();
  auto spec = std::make_shared<SystemSpec>();
  spec->name = s.name;
  spec->n = root["n"].integer();
  if (spec->n != 1 && spec->n != 2) root["n"].fail("must be 1 or 2");
  spec->m = root["m"].integer();
  if (spec->m < 1 || spec->m > 8) root["m"].fail("must lie in 1..8");
  spec->T = root["T"].num();
  if (!(spec->T > 0.0)) root["T"].fail("must be > 0");
  if (root.has("theorem")) s.theorem = wrap(root["theorem"], [&] { return parse_theorem(root["theorem"].str()); });
  if (root.has("data_class"))
    spec->data_class = wrap(root["data_class"], [&] { return parse_data_class(root["data_class"].str()); });
  if (root.has("law")) s.law = law(root["law"]);
  s.moments = root.int_or("mollifier_moments", 1);
  if (s.moments != 1 && s.moments != 2) root["mollifier_moments"].fail("must be 1 or 2");
  const Node A = root["A"];
  if (A.size() != static_cast<size_t>(spec->n)) A.fail("need exactly n principal coefficients");
  for (size_t i = 0; i < A.size(); ++i) spec->A.push_back(coefficient(A[i], spec->m, spec->n));
  spec->B = root.has("B") ? coefficient(root["B"], spec->m, spec->n) : CoefficientField::zero(spec->m);
  if (root.has("F")) {
    spec->F = data(root["F"], spec->m, spec->n);
  } else {
    spec->F.m = spec->m;
  }
  spec->G = data(root["G"], spec->m, spec->n);
  if (root.has("numerics")) {
    s.num = numerics(root["numerics"]);
  } else {
    const json empty = json::object();
    s.num = numerics(Node{empty, "$.numerics"});
  }
  wrap(root, [&] {
    spec->check_shapes();
    return 0;
  });
  s.spec = spec;
  if (s.num.lens) {
    try {
      s.lens();
    } catch (const std::exception& e) {
      throw ConfigError("$.numerics.lens", e.what());
    }
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open scenario file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

}  // namespace hyplens
