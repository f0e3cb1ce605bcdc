#include "hyplens/energy.hpp"
#include "hyplens/report.hpp"
#include "hyplens/scenario.hpp"
#include "hyplens/sweep.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#ifndef HYPLENS_VERSION
#define HYPLENS_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace hyplens;
using ojson = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kFail = 1, kUsage = 2, kPartial = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

/// Single writer for the output directory; tracks every file for the manifest.
class OutputDir {
 public:
  explicit OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  const fs::path& root() const { return root_; }

  void write(const std::string& rel, const std::string& content) {
    const fs::path p = root_ / rel;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
    out.close();
    track(rel);
  }

  void track(const std::string& rel) {
    if (std::find(files_.begin(), files_.end(), rel) == files_.end()) files_.push_back(rel);
  }

  ojson file_list() const {
    std::vector<std::string> sorted = files_;
    std::sort(sorted.begin(), sorted.end());
    ojson arr = ojson::array();
    for (const auto& rel : sorted) {
      const fs::path p = root_ / rel;
      arr.push_back({{"path", rel}, {"sha256", sha256_file(p.string())}, {"bytes", fs::file_size(p)}});
    }
    return arr;
  }

 private:
  fs::path root_;
  std::vector<std::string> files_;
};

struct Run {
  std::string command;
  std::string scenario_path;
  std::string scenario_sha;
  std::vector<std::string> args;
  unsigned seed = 0;
  Clock::time_point start = Clock::now();
  ojson phases = ojson::object();
  ojson extra = ojson::object();

  void phase(const std::string& name, Clock::time_point since) {
    phases[name] = std::chrono::duration<double>(Clock::now() - since).count();
  }

  void write_manifest(OutputDir& out, int exit_code) {
    ojson m;
    m["tool"] = "hyplens";
    m["tool_version"] = HYPLENS_VERSION;
    m["schema_version"] = kSchemaVersion;
    m["command"] = command;
    m["scenario"] = scenario_path;
    m["scenario_sha256"] = scenario_sha;
    m["output_directory"] = out.root().string();
    m["seed"] = seed;
    m["args"] = args;
    m["exit_code"] = exit_code;
    m["wall_seconds"] = std::chrono::duration<double>(Clock::now() - start).count();
    m["phases"] = phases;
    for (const auto& [k, v] : extra.items()) m[k] = v;
    m["files"] = out.file_list();
    std::ofstream f(out.root() / "manifest.json");
    f << m.dump(2) << "\n";
  }
};

struct Common {
  std::string scenario;
  std::string out;
  std::optional<unsigned> seed;
  std::optional<int> grid;
  std::optional<std::string> scheme;
};

Scenario load(const Common& c, Run& run) {
  Scenario sc = load_scenario(c.scenario);
  if (c.seed) sc.num.seed = *c.seed;
  if (c.grid) sc.num.cells = *c.grid;
  if (c.scheme) {
    try {
      sc.num.scheme = parse_scheme(*c.scheme);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  run.scenario_path = c.scenario;
  run.scenario_sha = sha256_file(c.scenario);
  run.seed = sc.num.seed;
  return sc;
}

std::string default_out(const Scenario& sc, const std::string& cmd) { return "runs/" + sc.name + "-" + cmd; }

std::string row_stem(double eps) { return "rows/eps_" + format_double(eps); }

ojson plan_json(const SweepPlan& p) {
  return {{"cells", p.grid.N}, {"half_width", format_double(p.grid.L)}, {"dt", format_double(p.grid.dt)},
          {"steps", p.grid.steps}};
}

void print_validation(const ValidationReport& v) {
  if (!v.structural_ok) std::cout << "structural defect: " << v.structural_message << "\n";
  for (const auto& c : v.checks) std::cout << "  [" << to_string(c.status) << "] " << c.id << ": " << c.evidence << "\n";
  if (!v.suggestion.empty()) std::cout << "suggestion: " << v.suggestion << "\n";
}

int cmd_validate(const Common& c, Run& run) {
  const Scenario sc = load(c, run);
  OutputDir out(c.out.empty() ? default_out(sc, "validate") : c.out);
  const auto t0 = Clock::now();
  const ValidationReport v = validate_hypotheses(*sc.spec, sc.theorem, sc.law, sc.num.seed);
  run.phase("validate", t0);
  out.write("validation.json", validation_json(v, sc.name));
  print_validation(v);
  const int code = v.structural_ok && v.all_pass() ? kOk : kFail;
  std::cout << (code == kOk ? "all hypotheses of " : "hypotheses of ") << to_string(sc.theorem)
            << (code == kOk ? " hold" : " fail") << "\n";
  run.write_manifest(out, code);
  return code;
}

double single_eps(const Scenario& sc, std::optional<double> eps) {
  if (eps) return *eps;
  if (sc.num.solve_eps > 0.0) return sc.num.solve_eps;
  return sc.num.eps.back();
}

int cmd_solve(const Common& c, std::optional<double> eps_flag, Run& run) {
  const Scenario sc = load(c, run);
  OutputDir out(c.out.empty() ? default_out(sc, "solve") : c.out);
  const double eps = single_eps(sc, eps_flag);
  auto t0 = Clock::now();
  const SweepPlan plan = plan_sweep(sc, {eps});
  int code = kOk;
  try {
    const RegularizedSystem reg = regularize(sc.spec, Mollifier::make(sc.spec->n, sc.moments), sc.law, eps, plan.grid);
    run.phase("regularize", t0);
    t0 = Clock::now();
    SolveOptions opt;
    opt.scheme = sc.num.scheme;
    opt.snapshot_times = plan.snapshot_times;
    const SolutionTrace tr = solve(reg, opt);
    run.phase("solve", t0);
    std::ostringstream norms;
    norms << "t,l2\n";
    for (size_t k = 0; k < tr.step_times.size(); ++k)
      norms << format_double(tr.step_times[k]) << ',' << format_double(tr.step_l2[k]) << '\n';
    out.write("norms.csv", norms.str());
    write_fields((out.root() / "snapshots.bin").string(), tr.snapshots);
    out.track("snapshots.bin");
    out.write("snapshots.json", field_sidecar(plan.grid, tr.m, tr.snapshot_times));
    ojson s;
    s["scenario"] = sc.name;
    s["eps"] = eps;
    s["sigma"] = reg.sigma;
    s["scheme"] = to_string(tr.scheme);
    s["cfl"] = tr.cfl;
    s["grid"] = plan_json(plan);
    s["residual_l2"] = tr.residual_l2;
    s["final_l2"] = tr.step_l2.back();
    s["ledger"] = nlohmann::ordered_json::parse(row_json([&] {
                    SweepRow r;
                    r.eps = eps;
                    r.ok = true;
                    r.ledger = reg.ledger;
                    return r;
                  }()))["ledger"];
    out.write("solve.json", s.dump(2) + "\n");
    std::cout << "solved " << sc.name << " at eps = " << eps << ": " << plan.grid.N << " cells, " << plan.grid.steps
              << " steps, |U(T)| = " << tr.step_l2.back() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "solve failed: " << e.what() << "\n";
    out.write("error.txt", std::string(e.what()) + "\n");
    code = kPartial;
  }
  run.write_manifest(out, code);
  return code;
}

int cmd_certify(const Common& c, std::optional<double> eps_flag, Run& run) {
  Scenario sc = load(c, run);
  OutputDir out(c.out.empty() ? default_out(sc, "certify") : c.out);
  const double eps = single_eps(sc, eps_flag);
  if (!sc.num.lens) sc.num.lens = LensConfig{std::max(sc.spec->G.support_radius(sc.spec->n), 0.1), 0.0};
  const SweepPlan plan = plan_sweep(sc, {eps});
  int code = kOk;
  try {
    auto t0 = Clock::now();
    const RegularizedSystem reg = regularize(sc.spec, Mollifier::make(sc.spec->n, sc.moments), sc.law, eps, plan.grid);
    SolveOptions opt;
    opt.scheme = sc.num.scheme;
    opt.snapshot_times = plan.snapshot_times;
    const SolutionTrace tr = solve(reg, opt);
    run.phase("solve", t0);
    t0 = Clock::now();
    std::vector<EnergyCertificate> certs;
    for (size_t k = 1; k < plan.snapshot_times.size(); ++k) certs.push_back(certify_strip(tr, reg, plan.snapshot_times[k]));
    certs.push_back(certify_lens(tr, reg, *sc.lens()));
    run.phase("certify", t0);
    out.write("certs.jsonl", certificates_jsonl(certs));
    for (const auto& ct : certs) {
      std::cout << "  " << ct.flavor << (ct.flavor == "strip" ? " t=" + format_double(ct.t) : "") << ": lhs "
                << ct.lhs << " rhs " << ct.rhs << " slack " << ct.slack << (ct.pass ? " pass" : " FAIL") << "\n";
      if (!ct.pass) code = kFail;
    }
  } catch (const std::exception& e) {
    std::cerr << "certify failed: " << e.what() << "\n";
    out.write("error.txt", std::string(e.what()) + "\n");
    code = kPartial;
  }
  run.write_manifest(out, code);
  return code;
}

std::vector<double> sweep_eps(const Scenario& sc, std::optional<double> eps_min, std::optional<double> eps_max) {
  std::vector<double> out;
  for (double e : sc.num.eps)
    if ((!eps_min || e >= *eps_min * (1 - 1e-12)) && (!eps_max || e <= *eps_max * (1 + 1e-12))) out.push_back(e);
  if (eps_min || eps_max) {
    if (eps_min && eps_max && *eps_min > *eps_max) throw UsageError("--eps-min exceeds --eps-max");
    // flags outside the configured list extend it geometrically
    const double hi = eps_max.value_or(sc.num.eps.front()), lo = eps_min.value_or(sc.num.eps.back());
    out.clear();
    for (int k = 1; k < 60; ++k) {
      const double e = std::ldexp(1.0, -k);
      if (e <= hi * (1 + 1e-12) && e >= lo * (1 - 1e-12)) out.push_back(e);
    }
  }
  if (out.empty()) throw UsageError("no eps values between --eps-min and --eps-max");
  return out;
}

std::vector<SweepRow> resume_rows(const fs::path& dir, const std::string& sha, const SweepPlan& plan,
                                  const std::vector<double>& eps, size_t values) {
  std::vector<SweepRow> rows;
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) return rows;
  ojson m;
  try {
    std::ifstream in(mpath);
    m = ojson::parse(in);
  } catch (const std::exception&) {
    return rows;
  }
  if (m.value("command", "") != "sweep" || m.value("scenario_sha256", "") != sha || !m.contains("plan") ||
      m["plan"] != plan_json(plan) || !m.contains("completed_eps"))
    return rows;
  for (const auto& e : m["completed_eps"]) {
    const double v = e.get<double>();
    if (std::find(eps.begin(), eps.end(), v) == eps.end()) continue;
    const fs::path js = dir / (row_stem(v) + ".json"), bin = dir / (row_stem(v) + ".bin");
    try {
      std::ifstream in(js);
      std::stringstream ss;
      ss << in.rdbuf();
      SweepRow r = row_from_json(ss.str());
      if (r.ok) r.snapshots = read_fields(bin.string(), plan.snapshot_times.size(), values);
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
    }
  }
  return rows;
}

int cmd_sweep(const Common& c, std::optional<double> eps_min, std::optional<double> eps_max, int jobs, Run& run) {
  const Scenario sc = load(c, run);
  const std::vector<double> eps = sweep_eps(sc, eps_min, eps_max);
  OutputDir out(c.out.empty() ? default_out(sc, "sweep") : c.out);

  auto t0 = Clock::now();
  const ValidationReport v = validate_hypotheses(*sc.spec, sc.theorem, sc.law, sc.num.seed);
  run.phase("validate", t0);
  out.write("validation.json", validation_json(v, sc.name));
  if (!v.structural_ok) {
    std::cerr << "refusing to sweep: " << v.structural_message << "\n";
    run.write_manifest(out, kFail);
    return kFail;
  }
  if (!v.all_pass()) std::cerr << "warning: hypotheses of " << to_string(sc.theorem) << " not all satisfied\n";

  const SweepPlan plan = plan_sweep(sc, eps);
  const size_t values = static_cast<size_t>(plan.grid.nodes()) * sc.spec->m;
  SweepOptions opt;
  opt.jobs = jobs;
  opt.completed = resume_rows(out.root(), run.scenario_sha, plan, eps, values);
  run.extra["plan"] = plan_json(plan);
  ojson completed = ojson::array();
  for (const auto& r : opt.completed) {
    completed.push_back(r.eps);
    out.track(row_stem(r.eps) + ".json");
    if (r.ok) out.track(row_stem(r.eps) + ".bin");
  }
  if (!opt.completed.empty()) std::cout << "resuming: " << opt.completed.size() << " eps rows reused\n";
  opt.on_row = [&](const SweepRow& r) {
    out.write(row_stem(r.eps) + ".json", row_json(r));
    if (r.ok) {
      write_fields((out.root() / (row_stem(r.eps) + ".bin")).string(), r.snapshots);
      out.track(row_stem(r.eps) + ".bin");
      completed.push_back(r.eps);
    }
    std::cout << "  eps " << format_double(r.eps) << (r.ok ? " done" : " FAILED: " + r.cause) << "\n" << std::flush;
    run.extra["completed_eps"] = completed;
    run.write_manifest(out, kPartial);
  };
  t0 = Clock::now();
  SweepReport rep = run_sweep(sc, eps, opt);
  run.phase("sweep", t0);

  out.write("report.csv", sweep_csv(rep));
  out.write("summary.json", sweep_summary_json(rep));
  std::vector<EnergyCertificate> certs;
  for (const auto& r : rep.rows) certs.insert(certs.end(), r.certs.begin(), r.certs.end());
  out.write("certs.jsonl", certificates_jsonl(certs));
  ojson verdict = {{"verdict", rep.cauchy.cauchy ? "cauchy" : "not_cauchy"}, {"reason", rep.cauchy.reason}};
  out.write("cauchy.json", verdict.dump(2) + "\n");
  if (!rep.cauchy.limit.empty()) {
    write_fields((out.root() / "limit.bin").string(), rep.cauchy.limit);
    out.track("limit.bin");
    out.write("limit.json", field_sidecar(rep.grid, sc.spec->m, rep.snapshot_times));
  }
  std::string gp = "# gnuplot: growth of every tracked norm against log(1/eps)\n"
                   "set xlabel 'log(1/eps)'\nset ylabel 'log(norm)'\nset key left top\nplot ";
  bool first = true;
  for (const auto& col : rep.columns()) {
    out.write("plots/" + col + ".dat", plot_data(rep, col));
    if (col.rfind("norm_", 0) == 0) {
      gp += std::string(first ? "" : ", \\\n     ") + "'" + col + ".dat' using 1:2 with linespoints title '" + col + "'";
      first = false;
    }
  }
  out.write("plots/plot.gp", gp + "\n");

  bool certs_ok = true;
  for (const auto& ct : certs) certs_ok = certs_ok && ct.pass;
  const int code = !rep.all_ok() ? kPartial : (certs_ok ? kOk : kFail);
  run.extra["completed_eps"] = completed;
  run.write_manifest(out, code);

  std::cout << sc.name << ": " << rep.rows.size() << " eps rows on " << rep.grid.N << " cells; cauchy verdict: "
            << (rep.cauchy.cauchy ? "cauchy" : "not cauchy") << "\n";
  for (const auto& k : rep.norm_keys)
    std::cout << "  " << k << ": N = " << rep.fits[k].N << " (raw " << rep.fits[k].raw_slope << ", "
              << rep.classes[k].label() << ")\n";
  return code;
}

int env_jobs() {
  const char* s = std::getenv("HYPLENS_JOBS");
  if (!s || !*s) return 1;
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (*end != '\0' || v < 1 || v > 1024) throw UsageError(std::string("HYPLENS_JOBS must be a positive integer, got '") + s + "'");
  return static_cast<int>(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyplens: regularized symmetric hyperbolic systems with rough coefficients"};
  app.require_subcommand(1);
  app.set_version_flag("--version", HYPLENS_VERSION);

  Common common;
  std::optional<double> eps, eps_min, eps_max;
  int jobs = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("scenario", common.scenario, "scenario JSON file")->required();
    sub->add_option("--out", common.out, "output directory (default runs/<name>-<command>)");
    sub->add_option("--seed", common.seed, "seed overriding the scenario's")->check(CLI::NonNegativeNumber);
    sub->add_option("--grid", common.grid, "cells per axis before auto-refinement")->check(CLI::Range(16, 1 << 20));
    sub->add_option("--scheme", common.scheme, "lax_friedrichs | upwind_split | lax_wendroff");
  };
  auto* v = app.add_subcommand("validate", "check the hypotheses of the requested theorem");
  add_common(v);
  auto* s = app.add_subcommand("solve", "solve the regularized problem at one eps");
  add_common(s);
  s->add_option("--eps", eps, "regularization parameter in (0, 1)")->check(CLI::Range(1e-300, 1.0 - 1e-16));
  auto* c = app.add_subcommand("certify", "solve at one eps and check the strip and lens energy inequalities");
  add_common(c);
  c->add_option("--eps", eps, "regularization parameter in (0, 1)")->check(CLI::Range(1e-300, 1.0 - 1e-16));
  auto* w = app.add_subcommand("sweep", "run the eps sweep with fits, Cauchy and weak-limit checks");
  add_common(w);
  w->add_option("--eps-min", eps_min, "smallest eps (grid 2^-k)")->check(CLI::Range(1e-300, 1.0 - 1e-16));
  w->add_option("--eps-max", eps_max, "largest eps (grid 2^-k)")->check(CLI::Range(1e-300, 1.0 - 1e-16));
  w->add_option("--jobs", jobs, "parallel eps jobs (default $HYPLENS_JOBS or 1)")->check(CLI::Range(1, 1024));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsage;
  }

  Run run;
  run.args.assign(argv + 1, argv + argc);
  try {
    if (v->parsed()) return run.command = "validate", cmd_validate(common, run);
    if (s->parsed()) return run.command = "solve", cmd_solve(common, eps, run);
    if (c->parsed()) return run.command = "certify", cmd_certify(common, eps, run);
    run.command = "sweep";
    if (jobs == 0) jobs = env_jobs();
    return cmd_sweep(common, eps_min, eps_max, jobs, run);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPartial;
  }
}
