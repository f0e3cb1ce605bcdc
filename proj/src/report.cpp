#include "hyplens/report.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hyplens {

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

/// JSON has no NaN/inf; those become strings.
ojson num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double from_num(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "nan") return std::nan("");
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  throw std::invalid_argument("bad number '" + s + "'");
}

ojson cert_obj(const EnergyCertificate& c) {
  ojson o;
  o["flavor"] = c.flavor;
  o["order"] = c.order;
  o["eps"] = num(c.eps);
  o["constant"] = num(c.constant);
  o["t"] = num(c.t);
  o["lhs"] = num(c.lhs);
  o["rhs"] = num(c.rhs);
  o["slack"] = num(c.slack);
  o["tol"] = num(c.tol);
  o["pass"] = c.pass;
  o["dx"] = num(c.dx);
  o["dt"] = num(c.dt);
  o["note"] = c.note;
  return o;
}

EnergyCertificate cert_from(const json& o) {
  EnergyCertificate c;
  c.flavor = o.at("flavor").get<std::string>();
  c.order = o.at("order").get<int>();
  c.eps = from_num(o.at("eps"));
  c.constant = from_num(o.at("constant"));
  c.t = from_num(o.at("t"));
  c.lhs = from_num(o.at("lhs"));
  c.rhs = from_num(o.at("rhs"));
  c.slack = from_num(o.at("slack"));
  c.tol = from_num(o.at("tol"));
  c.pass = o.at("pass").get<bool>();
  c.dx = from_num(o.at("dx"));
  c.dt = from_num(o.at("dt"));
  c.note = o.at("note").get<std::string>();
  return c;
}

std::string hex(const unsigned char* d, unsigned len) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += digits[d[i] >> 4];
    s += digits[d[i] & 15];
  }
  return s;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

std::string sweep_csv(const SweepReport& rep) {
  std::ostringstream os;
  os << "eps,sigma,status,cells,dx,dt";
  const auto cols = rep.columns();
  for (const auto& c : cols) os << ',' << c;
  os << ",strip_slack,strip_pass,lens_slack,lens_pass,pairing_max,cause\n";
  for (const auto& r : rep.rows) {
    os << format_double(r.eps) << ',' << format_double(r.sigma) << ',' << (r.ok ? "ok" : "failed") << ','
       << rep.grid.N << ',' << format_double(rep.grid.dx) << ',' << format_double(rep.grid.dt);
    for (double v : rep.values(r)) os << ',' << format_double(v);
    std::string strip_s = "", strip_p = "", lens_s = "", lens_p = "";
    for (const auto& c : r.certs) {
      (c.flavor == "lens" ? lens_s : strip_s) = format_double(c.slack);
      (c.flavor == "lens" ? lens_p : strip_p) = c.pass ? "1" : "0";
    }
    double pmax = 0.0;
    for (double p : r.pairings) pmax = std::max(pmax, p);
    std::string cause = r.cause;
    for (char& ch : cause)
      if (ch == ',' || ch == '\n' || ch == '"') ch = ';';
    os << ',' << strip_s << ',' << strip_p << ',' << lens_s << ',' << lens_p << ','
       << (r.pairings.empty() ? std::string() : format_double(pmax)) << ',' << cause << '\n';
  }
  return os.str();
}

std::string sweep_summary_json(const SweepReport& rep) {
  ojson o;
  o["scenario"] = rep.scenario;
  o["seed"] = rep.seed;
  o["grid"] = {{"n", rep.grid.n}, {"cells", rep.grid.N}, {"half_width", num(rep.grid.L)}, {"dx", num(rep.grid.dx)},
               {"dt", num(rep.grid.dt)}, {"steps", rep.grid.steps}};
  ojson eps = ojson::array(), failed = ojson::array();
  for (const auto& r : rep.rows) {
    eps.push_back(num(r.eps));
    if (!r.ok) failed.push_back({{"eps", num(r.eps)}, {"cause", r.cause}});
  }
  o["eps"] = eps;
  o["failed_rows"] = failed;
  o["valid_rows"] = rep.valid_rows().size();
  ojson fits = ojson::object();
  for (const auto& c : rep.columns()) {
    const auto& f = rep.fits.at(c);
    const auto& k = rep.classes.at(c);
    fits[c] = {{"N", num(f.N)},           {"raw_slope", num(f.raw_slope)}, {"r2", num(f.r2)},
               {"used", f.used},          {"indeterminate", f.indeterminate}, {"class", k.label()},
               {"res_const", num(k.res_const)}, {"res_log", num(k.res_log)},     {"res_pow", num(k.res_pow)}};
  }
  o["fits"] = fits;
  ojson d = ojson::array();
  for (double v : rep.cauchy.distances) d.push_back(num(v));
  o["cauchy"] = {{"verdict", rep.cauchy.cauchy ? "cauchy" : "not_cauchy"},
                 {"distances", d},
                 {"ratio", num(rep.cauchy.ratio)},
                 {"tail", num(rep.cauchy.tail)},
                 {"limit_eps", num(rep.cauchy.limit_eps)},
                 {"reason", rep.cauchy.reason}};
  ojson fin = ojson::array();
  for (double v : rep.weak.final) fin.push_back(num(v));
  ojson battery = ojson::array();
  for (const auto& b : rep.battery) {
    ojson x = ojson::array();
    for (int k = 0; k < b.n; ++k) x.push_back(num(b.x0[k]));
    battery.push_back({{"t0", num(b.t0)}, {"rt", num(b.rt)}, {"x0", x}, {"rx", num(b.rx)}});
  }
  o["weak"] = {{"run", rep.weak.run},        {"pass", rep.weak.pass},          {"pairings", fin},
               {"scale", num(rep.weak.scale)}, {"tolerance", num(rep.weak.tolerance)}, {"worst", num(rep.weak.worst)},
               {"worst_field", rep.weak.worst_field}, {"note", rep.weak.note}, {"battery", battery}};
  o["uniformity"] = {{"N_r0_l0", num(rep.uniformity.N00)},
                     {"max_N", num(rep.uniformity.max_N)},
                     {"bounded", rep.uniformity.bounded}};
  o["coupling"] = {{"slope", num(rep.coupling_slope)},
                   {"trend", rep.coupling_slope < 0.0 ? "decreasing" : "not_decreasing"}};
  return o.dump(2) + "\n";
}

std::string certificate_json(const EnergyCertificate& c) { return cert_obj(c).dump(); }

std::string certificates_jsonl(const std::vector<EnergyCertificate>& certs) {
  std::string s;
  for (const auto& c : certs) s += certificate_json(c) + "\n";
  return s;
}

std::string plot_data(const SweepReport& rep, const std::string& column) {
  std::ostringstream os;
  os << "# log(1/eps)  log(" << column << ")\n";
  for (const auto& [e, v] : rep.series(column))
    if (v > 0.0 && std::isfinite(v)) os << format_double(std::log(1.0 / e)) << ' ' << format_double(std::log(v)) << '\n';
  return os.str();
}

std::string validation_json(const ValidationReport& rep, const std::string& scenario) {
  ojson o;
  o["scenario"] = scenario;
  o["theorem"] = to_string(rep.theorem);
  o["structural_ok"] = rep.structural_ok;
  o["structural_message"] = rep.structural_message;
  ojson checks = ojson::array();
  for (const auto& c : rep.checks)
    checks.push_back({{"id", c.id}, {"statement", c.statement}, {"status", to_string(c.status)}, {"evidence", c.evidence}});
  o["checks"] = checks;
  o["suggestion"] = rep.suggestion;
  o["all_pass"] = rep.all_pass();
  return o.dump(2) + "\n";
}

std::string row_json(const SweepRow& r) {
  ojson o;
  o["eps"] = num(r.eps);
  o["sigma"] = num(r.sigma);
  o["ok"] = r.ok;
  o["cause"] = r.cause;
  const Ledger& L = r.ledger;
  ojson dA = ojson::array(), As = ojson::array(), times = ojson::array(), prof = ojson::array();
  for (double v : L.dA_sup) dA.push_back(num(v));
  for (double v : L.A_sup) As.push_back(num(v));
  for (double v : L.times) times.push_back(num(v));
  for (double v : L.div_profile) prof.push_back(num(v));
  o["ledger"] = {{"div_linf", num(L.div_linf)}, {"div_l1inf", num(L.div_l1inf)}, {"dA_sup", dA},
                 {"A_sup", As},                 {"B_sup", num(L.B_sup)},         {"B_herm_sup", num(L.B_herm_sup)},
                 {"G_l2", num(L.G_l2)},         {"G_linf", num(L.G_linf)},       {"F_l2", num(L.F_l2)},
                 {"times", times},              {"div_profile", prof}};
  o["alpha"] = num(r.alpha);
  o["beta_int"] = num(r.beta_int);
  o["coupling"] = num(r.coupling);
  ojson norms = ojson::object();
  for (const auto& [k, v] : r.norms) norms[k] = num(v);
  o["norms"] = norms;
  ojson certs = ojson::array();
  for (const auto& c : r.certs) certs.push_back(cert_obj(c));
  o["certs"] = certs;
  ojson pr = ojson::array();
  for (double v : r.pairings) pr.push_back(num(v));
  o["pairings"] = pr;
  o["snapshots"] = r.snapshots.size();
  o["seconds"] = r.seconds;
  return o.dump(2) + "\n";
}

SweepRow row_from_json(const std::string& text) {
  const json o = json::parse(text);
  SweepRow r;
  r.eps = from_num(o.at("eps"));
  r.sigma = from_num(o.at("sigma"));
  r.ok = o.at("ok").get<bool>();
  r.cause = o.at("cause").get<std::string>();
  const json& L = o.at("ledger");
  r.ledger.div_linf = from_num(L.at("div_linf"));
  r.ledger.div_l1inf = from_num(L.at("div_l1inf"));
  for (const auto& v : L.at("dA_sup")) r.ledger.dA_sup.push_back(from_num(v));
  for (const auto& v : L.at("A_sup")) r.ledger.A_sup.push_back(from_num(v));
  r.ledger.B_sup = from_num(L.at("B_sup"));
  r.ledger.B_herm_sup = from_num(L.at("B_herm_sup"));
  r.ledger.G_l2 = from_num(L.at("G_l2"));
  r.ledger.G_linf = from_num(L.at("G_linf"));
  r.ledger.F_l2 = from_num(L.at("F_l2"));
  for (const auto& v : L.at("times")) r.ledger.times.push_back(from_num(v));
  for (const auto& v : L.at("div_profile")) r.ledger.div_profile.push_back(from_num(v));
  r.alpha = from_num(o.at("alpha"));
  r.beta_int = from_num(o.at("beta_int"));
  r.coupling = from_num(o.at("coupling"));
  for (const auto& [k, v] : o.at("norms").items()) r.norms[k] = from_num(v);
  for (const auto& c : o.at("certs")) r.certs.push_back(cert_from(c));
  for (const auto& v : o.at("pairings")) r.pairings.push_back(from_num(v));
  r.seconds = o.at("seconds").get<double>();
  return r;
}

void write_fields(const std::string& path, const std::vector<GridField>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& f : frames)
    for (const auto& v : f) {
      const double re = v.real(), im = v.imag();
      out.write(reinterpret_cast<const char*>(&re), sizeof re);
      out.write(reinterpret_cast<const char*>(&im), sizeof im);
    }
}

std::vector<GridField> read_fields(const std::string& path, size_t frames, size_t values) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<GridField> out(frames, GridField(values));
  for (auto& f : out)
    for (auto& v : f) {
      double re = 0.0, im = 0.0;
      in.read(reinterpret_cast<char*>(&re), sizeof re);
      in.read(reinterpret_cast<char*>(&im), sizeof im);
      v = {re, im};
    }
  if (!in) throw std::runtime_error(path + " is truncated");
  return out;
}

std::string field_sidecar(const Grid& g, int comps, const std::vector<double>& times) {
  ojson o;
  o["dtype"] = "float64";
  o["byte_order"] = "little";
  o["complex"] = "interleaved re, im";
  o["layout"] = "row-major: frame, node (axis 0 slowest), component";
  o["n"] = g.n;
  o["cells_per_axis"] = g.N;
  o["half_width"] = num(g.L);
  o["dx"] = num(g.dx);
  o["node_coordinate"] = "-L + (i + 0.5) dx";
  o["components"] = comps;
  ojson t = ojson::array();
  for (double v : times) t.push_back(num(v));
  o["times"] = t;
  return o.dump(2) + "\n";
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  return hex(md, len);
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  return hex(md, len);
}

}  // namespace hyplens
