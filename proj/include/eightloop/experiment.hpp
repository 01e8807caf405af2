#pragma once

// Scenario documents and their execution. A scenario is parsed completely,
// including every command parameter, before any computation starts; unknown
// keys are configuration errors.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "eightloop/abelian_integrals.hpp"
#include "eightloop/dynamics.hpp"
#include "eightloop/error.hpp"
#include "eightloop/io.hpp"
#include "eightloop/melnikov.hpp"
#include "eightloop/series.hpp"
#include "eightloop/sweep.hpp"

#ifndef EIGHTLOOP_VERSION
#define EIGHTLOOP_VERSION "0.0.0"
#endif

namespace eightloop {

inline constexpr std::string_view kToolVersion = EIGHTLOOP_VERSION;

/// Exit statuses of run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

inline constexpr std::array<std::string_view, 7> kCommands = {
    "integrals", "pf-check", "series-fit", "melnikov-zeros", "simulate", "convergence", "cyclicity-sweep"};

struct Scenario {
  std::string command;
  Json parameters = Json::object();
  std::uint64_t seed = 0;
  std::string output_dir = "out";
};

namespace detail {

/// Typed, consumption-tracking view of one JSON object.
class ParamReader {
 public:
  ParamReader(const Json& obj, std::string context) : obj_(obj), ctx_(std::move(context)) {
    if (!obj_.is_object()) fail("must be a JSON object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const Json* v = take(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_number()) fail("'" + key + "' must be a number");
    return v->get<double>();
  }

  long integer(const std::string& key, std::optional<long> fallback = std::nullopt) {
    const Json* v = take(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_number_integer()) fail("'" + key + "' must be an integer");
    return v->get<long>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const Json* v = take(key, true);
    if (!v) return fallback;
    if (!v->is_boolean()) fail("'" + key + "' must be true or false");
    return v->get<bool>();
  }

  std::string choice(const std::string& key, std::string fallback, const std::vector<std::string_view>& allowed) {
    const Json* v = take(key, true);
    if (!v) return fallback;
    if (!v->is_string()) fail("'" + key + "' must be a string");
    const auto s = v->get<std::string>();
    for (auto a : allowed) {
      if (s == a) return s;
    }
    fail("'" + key + "' has unsupported value '" + s + "'");
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) {
    const Json* v = take(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_array()) fail("'" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number()) fail("'" + key + "' must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::pair<double, double> range(const std::string& key, std::optional<std::pair<double, double>> fallback) {
    std::optional<std::vector<double>> fb;
    if (fallback) fb = std::vector<double>{fallback->first, fallback->second};
    const auto v = numbers(key, fb);
    if (v.size() != 2 || !(v[0] < v[1])) fail("'" + key + "' must be [lo, hi] with lo < hi");
    return {v[0], v[1]};
  }

  /// The value under `key` without type checks, or null when absent.
  const Json* raw(const std::string& key) { return take(key, true); }

  /// Nested object, or an empty one when absent.
  ParamReader object(const std::string& key) {
    static const Json empty = Json::object();
    const Json* v = take(key, true);
    return ParamReader(v ? *v : empty, ctx_ + "." + key);
  }

  [[noreturn]] void fail(const std::string& what) const { throw Error(ErrorCode::ConfigError, ctx_ + ": " + what); }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!used_.count(key)) fail("unknown key '" + key + "'");
    }
  }

 private:
  const Json* take(const std::string& key, bool optional) {
    used_.insert(key);
    if (!obj_.contains(key)) {
      if (!optional) fail("missing required key '" + key + "'");
      return nullptr;
    }
    return &obj_.at(key);
  }

  const Json& obj_;
  std::string ctx_;
  std::set<std::string> used_;
};

struct Grid {
  std::pair<double, double> range{1e-4, 3.0};
  int n = 50;
  GridSpacing spacing = GridSpacing::Logarithmic;
  std::vector<double> points() const { return make_grid(range, n, spacing); }
};

inline GridSpacing read_spacing(ParamReader& r, GridSpacing fallback) {
  const std::string s = r.choice("spacing", fallback == GridSpacing::Logarithmic ? "log" : "linear", {"log", "linear"});
  return s == "log" ? GridSpacing::Logarithmic : GridSpacing::Linear;
}

inline Grid read_grid(ParamReader& r, Grid fallback) {
  Grid g;
  g.range = r.range("h_range", fallback.range);
  g.n = static_cast<int>(r.integer("n", fallback.n));
  g.spacing = read_spacing(r, fallback.spacing);
  if (g.n < 2) r.fail("'n' must be >= 2");
  if (!(g.range.first > 0.0)) r.fail("'h_range' must lie in h > 0");
  return g;
}

inline QuadratureConfig read_quadrature(ParamReader& parent, QuadratureConfig fallback = {}) {
  ParamReader r = parent.object("quadrature");
  QuadratureConfig c;
  c.abs_tol = r.number("abs_tol", fallback.abs_tol);
  c.rel_tol = r.number("rel_tol", fallback.rel_tol);
  c.max_subdivisions = static_cast<int>(r.integer("max_subdivisions", fallback.max_subdivisions));
  r.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return c;
}

inline IntegratorConfig read_integrator(ParamReader& parent) {
  ParamReader r = parent.object("integrator");
  IntegratorConfig c;
  c.rel_tol = r.number("rel_tol", c.rel_tol);
  c.abs_tol = r.number("abs_tol", c.abs_tol);
  c.max_time = r.number("max_time", c.max_time);
  c.max_steps = r.integer("max_steps", c.max_steps);
  r.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return c;
}

inline PerturbationParams read_lambda(ParamReader& r, const std::string& key) {
  const auto v = r.numbers(key, std::vector<double>{0.0, 0.0, 0.0, 0.0});
  if (v.size() != 4) r.fail("'" + key + "' must hold four numbers");
  return {v[0], v[1], v[2], v[3]};
}

inline MelnikovSpec read_spec(ParamReader& parent) {
  ParamReader r = parent.object("spec");
  const int k = static_cast<int>(r.integer("k", 1));
  if (k < 1) r.fail("'k' must be >= 1");
  const double l1 = r.number("lam1k", 0.0);
  const double l4 = r.number("lam4k", 0.0);
  auto lam2 = r.numbers("lam2", std::vector<double>{});
  auto lam3 = r.numbers("lam3", std::vector<double>{});
  r.finish();
  return MelnikovSpec::make(k, l1, l4, std::move(lam2), std::move(lam3));
}

inline ArcSpec read_arc(ParamReader& parent) {
  ParamReader r = parent.object("arc");
  ArcSpec a;
  const char* names[] = {"lambda1", "lambda2", "lambda3", "lambda4"};
  for (int p = 0; p < 4; ++p) a.coeff_table[static_cast<std::size_t>(p)] = r.numbers(names[p], std::vector<double>{});
  r.finish();
  return a;
}

// Typed parameter sets, one per command.

struct IntegralsCmd {
  Grid grid;
  QuadratureConfig quadrature;
};
struct PfCheckCmd {
  Grid grid;
  QuadratureConfig quadrature;
  double tolerance = 1e-7;
};
struct SeriesFitCmd {
  FitOptions fit;
  int n_samples = 24;
  QuadratureConfig quadrature;
  bool log_fit = true;
};
struct MelnikovZerosCmd {
  MelnikovSpec spec;
  std::pair<double, double> interval{1e-3, 0.5};
  int grid_n = 400;
  double refine_tol = 1e-12;
  ZeroCountOptions zero;
  std::string backend = "quadrature";
  QuadratureConfig quadrature;
};
struct SimulateCmd {
  PhasePoint p0{};
  PerturbationParams lambda{};
  double t_end = 10.0;
  int n_out = 1001;
  IntegratorConfig integrator;
  std::optional<Grid> displacement_grid;
  std::optional<Grid> cycle_grid;
  double refine_tol = 1e-9;
};
struct ConvergenceCmd {
  ArcSpec arc;
  std::vector<double> h_probe;
  std::vector<double> eps_seq;
  double scale = kContourNormalization;
  std::optional<int> order;
  IntegratorConfig integrator;
  QuadratureConfig quadrature;
};
struct SweepCmd {
  ArcFamily family = ArcFamily::M1Nonzero;
  double eps = 1e-3;
  std::pair<double, double> window{1e-3, 0.2};
  int n_samples = 200;
  SweepOptions options;
  IntegratorConfig integrator;
};

using Command = std::variant<IntegralsCmd, PfCheckCmd, SeriesFitCmd, MelnikovZerosCmd, SimulateCmd, ConvergenceCmd,
                             SweepCmd>;

inline Command parse_command(const std::string& name, const Json& params) {
  ParamReader r(params, "parameters");
  Command cmd;
  if (name == "integrals") {
    IntegralsCmd c;
    c.grid = read_grid(r, {});
    c.quadrature = read_quadrature(r);
    cmd = c;
  } else if (name == "pf-check") {
    PfCheckCmd c;
    c.grid = read_grid(r, {});
    c.quadrature = read_quadrature(r, {1e-14, 1e-13, 200});
    c.tolerance = r.number("tolerance", c.tolerance);
    cmd = c;
  } else if (name == "series-fit") {
    SeriesFitCmd c;
    c.fit.window = r.range("window", c.fit.window);
    c.fit.analytic_degree = static_cast<int>(r.integer("analytic_degree", c.fit.analytic_degree));
    c.fit.max_condition = r.number("max_condition", c.fit.max_condition);
    c.n_samples = static_cast<int>(r.integer("n_samples", c.n_samples));
    c.quadrature = read_quadrature(r, {1e-15, 1e-14, 400});
    c.log_fit = r.boolean("log_fit", c.log_fit);
    if (c.fit.analytic_degree < 3) r.fail("'analytic_degree' must be >= 3");
    cmd = c;
  } else if (name == "melnikov-zeros") {
    MelnikovZerosCmd c;
    c.spec = read_spec(r);
    c.interval = r.range("interval", c.interval);
    c.grid_n = static_cast<int>(r.integer("grid_n", c.grid_n));
    c.refine_tol = r.number("refine_tol", c.refine_tol);
    c.zero.spacing = read_spacing(r, GridSpacing::Linear);
    c.zero.suspect_threshold = r.number("suspect_threshold", c.zero.suspect_threshold);
    c.backend = r.choice("backend", c.backend, {"quadrature", "series", "tilde"});
    c.quadrature = read_quadrature(r);
    if (c.grid_n < 32) r.fail("'grid_n' must be >= 32");
    cmd = c;
  } else if (name == "simulate") {
    SimulateCmd c;
    const auto p0 = r.numbers("p0", std::vector<double>{2.0, 0.0});
    if (p0.size() != 2) r.fail("'p0' must be [x, y]");
    c.p0 = {p0[0], p0[1]};
    c.lambda = read_lambda(r, "lambda");
    c.t_end = r.number("t_end", c.t_end);
    c.n_out = static_cast<int>(r.integer("n_out", c.n_out));
    c.integrator = read_integrator(r);
    if (r.has("displacement")) {
      ParamReader d = r.object("displacement");
      c.displacement_grid = read_grid(d, {{0.01, 0.5}, 50, GridSpacing::Logarithmic});
      d.finish();
    }
    if (r.has("limit_cycles")) {
      ParamReader d = r.object("limit_cycles");
      c.cycle_grid = read_grid(d, {{1e-3, 0.5}, 48, GridSpacing::Logarithmic});
      c.refine_tol = d.number("refine_tol", c.refine_tol);
      d.finish();
    }
    if (!(c.t_end > 0.0) || c.n_out < 2) r.fail("'t_end' must be positive and 'n_out' >= 2");
    cmd = c;
  } else if (name == "convergence") {
    ConvergenceCmd c;
    c.arc = read_arc(r);
    c.h_probe = r.numbers("h_probe", std::vector<double>{0.1, 0.2, 0.4});
    c.eps_seq = r.numbers("eps_seq", std::vector<double>{1e-2, 3e-3, 1e-3, 3e-4, 1e-4});
    c.scale = r.number("scale", c.scale);
    if (r.has("order")) c.order = static_cast<int>(r.integer("order"));
    c.integrator = read_integrator(r);
    c.quadrature = read_quadrature(r);
    cmd = c;
  } else if (name == "cyclicity-sweep") {
    SweepCmd c;
    c.family = parse_arc_family(r.choice("family", "m1-nonzero", {"m1-nonzero", "m1-zero", "zero"}));
    c.eps = r.number("eps", c.eps);
    c.window = r.range("h_window", c.window);
    c.n_samples = static_cast<int>(r.integer("n_samples", c.n_samples));
    c.options.grid_n = static_cast<int>(r.integer("grid_n", c.options.grid_n));
    c.options.cycle.refine_tol = r.number("refine_tol", c.options.cycle.refine_tol);
    c.options.cycle.noise_floor = r.number("noise_floor", c.options.cycle.noise_floor);
    c.options.recheck_factor = r.number("recheck_factor", c.options.recheck_factor);
    c.integrator = read_integrator(r);
    if (!(c.eps > 0.0) || c.n_samples < 0 || c.options.grid_n < 2) r.fail("invalid sweep size parameters");
    if (!(c.window.first >= kReturnMapFloor)) r.fail("'h_window' must start at or above 1e-3");
    cmd = c;
  } else {
    throw Error(ErrorCode::ConfigError, "unknown command '" + name + "'");
  }
  r.finish();
  return cmd;
}

}  // namespace detail

inline Json to_json(const Scenario& s) {
  return Json{{"command", s.command}, {"parameters", s.parameters}, {"seed", s.seed}, {"output_dir", s.output_dir}};
}

inline Scenario parse_scenario(const Json& j) {
  detail::ParamReader r(j, "scenario");
  Scenario s;
  s.command = r.choice("command", "", std::vector<std::string_view>(kCommands.begin(), kCommands.end()));
  if (s.command.empty()) r.fail("missing required key 'command'");
  if (const Json* p = r.raw("parameters")) {
    if (!p->is_object()) r.fail("'parameters' must be an object");
    s.parameters = *p;
  }
  const long seed = r.integer("seed", 0);
  if (seed < 0) r.fail("'seed' must be non-negative");
  s.seed = static_cast<std::uint64_t>(seed);
  if (const Json* o = r.raw("output_dir")) {
    if (!o->is_string()) r.fail("'output_dir' must be a string");
    s.output_dir = o->get<std::string>();
  }
  r.finish();
  detail::parse_command(s.command, s.parameters);
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& p) {
  std::string text;
  try {
    text = read_file(p);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigError, "config " + p.string() + " is not JSON: " + e.what());
  }
  return parse_scenario(j);
}

/// Hash of the fields that determine the outputs (the output directory does not).
inline std::string scenario_hash(const Scenario& s) {
  const Json key{{"command", s.command}, {"parameters", s.parameters}, {"seed", s.seed}};
  return hex64(fnv1a(key.dump()));
}

struct RunOptions {
  int threads = 1;
  std::optional<std::filesystem::path> constants;
};

struct RunManifest {
  std::string scenario_hash;
  std::string version{kToolVersion};
  std::string command;
  std::uint64_t seed = 0;
  Json constants = nullptr;  // provenance of the fitted constants, if any were used
  std::vector<std::string> outputs;
  int exit_code = 0;
  std::string status = "ok";
  std::string message;
  double wall_time_s = 0.0;
};

inline Json to_json(const RunManifest& m) {
  return Json{{"scenario_hash", m.scenario_hash}, {"version", m.version}, {"command", m.command},
              {"seed", m.seed},   {"constants", m.constants},     {"outputs", m.outputs},
              {"exit_code", m.exit_code}, {"status", m.status},   {"message", m.message},
              {"wall_time_s", m.wall_time_s}};
}

struct RunResult {
  int exit_code = kExitOk;
  std::string message;
  RunManifest manifest;
};

namespace detail {

class RunContext {
 public:
  RunContext(const Scenario& s, const RunOptions& o, RunManifest& m)
      : scenario(s), options(o), manifest(m), dir(s.output_dir) {}

  std::vector<std::string> comments() const {
    return {"seed=" + std::to_string(scenario.seed), "scenario_hash=" + manifest.scenario_hash,
            "version=" + manifest.version};
  }

  std::string header_comments() const {
    std::string out;
    for (const auto& c : comments()) out += "# " + c + "\n";
    return out;
  }

  void save_text(const std::string& name, const std::string& text) {
    write_file(dir / name, text);
    manifest.outputs.push_back(name);
  }
  void save_json(const std::string& name, Json j) {
    j["seed"] = scenario.seed;
    j["scenario_hash"] = manifest.scenario_hash;
    save_text(name, j.dump(2) + "\n");
  }
  void save_csv(const std::string& name, const CsvWriter& w) { save_text(name, w.str()); }

  /// Loads the --constants file; records provenance in the manifest.
  FittedConstants constants() {
    if (!options.constants) throw Error(ErrorCode::MissingInput, "this command needs --constants <path>");
    const std::string text = read_file(*options.constants);
    FittedConstants c;
    try {
      c = constants_from_json(Json::parse(text));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::ConfigError, std::string("constants file is not JSON: ") + e.what());
    }
    manifest.constants = Json{{"path", options.constants->string()}, {"file_hash", hex64(fnv1a(text))},
                              {"kappa", c.kappa},  {"a1", c.a1}, {"a2", c.a2}, {"b2", c.b2}};
    return c;
  }

  const Scenario& scenario;
  const RunOptions& options;
  RunManifest& manifest;
  std::filesystem::path dir;
  bool numerical_failure = false;
  std::string failure_message;
};

inline void execute(RunContext& ctx, const IntegralsCmd& c) {
  CsvWriter w({"h", "I0", "I1", "I2", "I0p", "I2p", "I4p", "I0pp", "err_I0", "err_I2", "err_I4p", "converged"},
              ctx.comments());
  const auto hs = c.grid.points();
  for (double h : hs) {
    const IntegralTriple t = integral_triple(h, c.quadrature);
    w.row({h, t.I0, t.I1, t.I2, t.I0p, t.I2p, t.I4p, t.I0pp, t.err.I0, t.err.I2, t.err.I4p,
           t.converged ? 1.0 : 0.0});
    if (!t.converged && !ctx.numerical_failure) {
      ctx.numerical_failure = true;
      ctx.failure_message = "quadrature tolerance not met at h=" + format_double(h);
    }
  }
  ctx.save_csv("integrals.csv", w);
  PlotInputs in;
  in.h = hs;
  in.quadrature = c.quadrature;
  ctx.save_text("integrals.dat", ctx.header_comments() + emit_plot_data(PlotKind::Integrals, in));
}

inline void execute(RunContext& ctx, const PfCheckCmd& c) {
  CsvWriter w({"h", "r1", "r2", "r3", "r4", "max"}, ctx.comments());
  double worst = 0.0;
  double worst_h = 0.0;
  for (double h : c.grid.points()) {
    const PFResiduals r = pf_residuals(integral_triple(h, c.quadrature));
    w.row({h, r.r1, r.r2, r.r3, r.r4, r.max()});
    if (r.max() > worst) {
      worst = r.max();
      worst_h = h;
    }
  }
  ctx.save_csv("pf_residuals.csv", w);
  const bool pass = worst < c.tolerance;
  ctx.save_json("pf_summary.json", {{"max_residual", worst}, {"at_h", worst_h}, {"tolerance", c.tolerance},
                                    {"pass", pass}});
  if (!pass) {
    ctx.numerical_failure = true;
    ctx.failure_message = "Picard-Fuchs residual " + format_double(worst) + " above tolerance";
  }
}

inline void execute(RunContext& ctx, const SeriesFitCmd& c) {
  const auto samples = sample_triples(c.fit.window, c.n_samples, c.quadrature);
  const FittedConstants fc = fit_constants(samples, c.fit);
  ctx.save_json("constants.json", to_json(fc));

  std::vector<LogFit> fits;
  if (c.log_fit) {
    for (SeriesIntegral w : kSeriesIntegrals) fits.push_back(fit_log_coefficients(w));
  }
  Json audit = Json::array();
  for (const auto& chk : audit_printed_coefficients(fc, fits)) {
    audit.push_back({{"integral", std::string(to_string(chk.which))},
                     {"term", chk.term},
                     {"printed", chk.printed},
                     {"exact", chk.exact},
                     {"quadrature", std::isfinite(chk.quadrature) ? Json(chk.quadrature) : Json(nullptr)},
                     {"agrees", chk.agrees}});
  }
  ctx.save_json("coefficient_audit.json", {{"checks", audit}});

  CsvWriter w({"h", "I0_series", "I0_quad", "I2_series", "I2_quad", "I4p_series", "I4p_quad"}, ctx.comments());
  for (double h : make_grid({0.01, 0.2}, 20, GridSpacing::Linear)) {
    const IntegralBasis q = QuadratureBackend{c.quadrature}(h);
    w.row({h, series_eval(SeriesIntegral::I0, h, fc), q.I0, series_eval(SeriesIntegral::I2, h, fc), q.I2,
           series_eval(SeriesIntegral::I4p, h, fc), q.I4p});
  }
  ctx.save_csv("series_vs_quadrature.csv", w);
}

inline void execute(RunContext& ctx, const MelnikovZerosCmd& c) {
  std::optional<FittedConstants> fc;
  if (c.backend == "series" || ctx.options.constants) fc = ctx.constants();
  std::function<double(double)> f;
  if (c.backend == "quadrature") {
    const QuadratureBackend q{c.quadrature};
    f = [&c, q](double h) { return mk(h, c.spec, q); };
  } else if (c.backend == "series") {
    const SeriesBackend s{*fc};
    f = [&c, s](double h) { return mk(h, c.spec, s); };
  } else {
    f = [&c](double h) { return mk_tilde(h, c.spec); };
  }
  const ZeroCount z = count_zeros(f, c.interval, c.grid_n, c.refine_tol, c.zero);
  Json doc = to_json(z);
  doc["backend"] = c.backend;
  doc["k"] = c.spec.k;
  doc["cross"] = c.spec.k == 1 ? 0.0 : c.spec.cross();
  if (fc) {
    const LeadingCoeffs lc = leading_coeffs(c.spec, *fc);
    doc["leading_coeffs"] = {{"c0", lc.c0}, {"c1", lc.c1}, {"c2", lc.c2}};
  }
  ctx.save_json("zeros.json", doc);

  std::ostringstream plot;
  plot << ctx.header_comments() << "# h M_k(h) backend=" << c.backend << '\n';
  for (double h : make_grid(c.interval, 200, c.zero.spacing)) plot << format_double(h) << ' ' << format_double(f(h)) << '\n';
  ctx.save_text("melnikov.dat", plot.str());
}

inline void execute(RunContext& ctx, const SimulateCmd& c) {
  const IntegratorConfig cfg = c.integrator;
  const Trajectory traj = integrate(c.p0, c.lambda, c.t_end, cfg);
  const double h0 = energy(c.p0);
  double drift = 0.0;
  for (int i = 0; i < c.n_out; ++i) {
    drift = std::max(drift, std::abs(energy(traj.at(c.t_end * i / (c.n_out - 1))) - h0));
  }
  ctx.save_text("trajectory.csv", trajectory_csv(traj, c.n_out, ctx.comments()));
  Json summary{{"h0", h0}, {"t_end", c.t_end}, {"steps", traj.size()}, {"max_energy_drift", drift},
               {"lambda", c.lambda.as_array()}};

  if (c.displacement_grid) {
    CsvWriter w({"h", "h_out", "displacement", "flow_time", "crossings"}, ctx.comments());
    std::ostringstream plot;
    plot << ctx.header_comments() << "# h P(h)-h\n";
    Json failures = Json::array();
    for (double h : c.displacement_grid->points()) {
      try {
        const ReturnMapSample s = return_map(h, c.lambda, cfg);
        w.row({h, s.h_out, s.h_out - s.h_in, s.flow_time, static_cast<double>(s.crossings)});
        plot << format_double(h) << ' ' << format_double(s.h_out - s.h_in) << '\n';
      } catch (const Error& e) {
        failures.push_back(to_json(SampleFailure{h, e.code(), e.what()}));
      }
    }
    ctx.save_csv("return_map.csv", w);
    ctx.save_text("displacement.dat", plot.str());
    summary["return_map_failures"] = failures;
  }
  if (c.cycle_grid) {
    LimitCycleOptions lo;
    lo.spacing = c.cycle_grid->spacing;
    lo.refine_tol = c.refine_tol;
    const LimitCycleScan scan = find_limit_cycles(c.lambda, c.cycle_grid->range, c.cycle_grid->n, cfg, lo);
    Json recs = Json::array();
    for (const auto& r : scan.records) recs.push_back(to_json(r));
    Json fails = Json::array();
    for (const auto& f : scan.failures) fails.push_back(to_json(f));
    ctx.save_json("limit_cycles.json", {{"records", recs}, {"failures", fails}});
  }
  ctx.save_json("simulate_summary.json", summary);
}

inline void execute(RunContext& ctx, const ConvergenceCmd& c) {
  const auto rows = melnikov_convergence(c.arc, c.h_probe, c.eps_seq, c.integrator, c.scale, c.order, c.quadrature);
  CsvWriter w({"eps", "h", "k", "scaled_displacement", "M_k", "ratio"}, ctx.comments());
  for (const auto& r : rows) w.row({r.eps, r.h, static_cast<double>(r.k), r.scaled_displacement, r.mk, r.ratio});
  ctx.save_csv("convergence.csv", w);
}

inline void execute(RunContext& ctx, const SweepCmd& c) {
  SweepOptions opt = c.options;
  opt.seed = ctx.scenario.seed;
  opt.threads = ctx.options.threads;
  const SweepReport rep = cyclicity_sweep(c.family, c.eps, c.window, c.n_samples, c.integrator, opt);
  std::string lines;
  for (const auto& s : rep.samples) lines += sweep_line(rep, s, ctx.scenario.seed) + "\n";
  ctx.save_text("sweep.jsonl", lines);
  ctx.save_json("sweep_summary.json", sweep_summary(rep));
  PlotInputs in;
  in.sweep = &rep;
  ctx.save_text("sweep_histogram.dat", ctx.header_comments() + emit_plot_data(PlotKind::SweepHistogram, in));
}

}  // namespace detail

/// Executes a scenario. Always writes manifest.json when the output
/// directory can be created; partial outputs are kept on numerical failure.
inline RunResult run(const Scenario& scenario, const RunOptions& options = {}) {
  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  RunManifest& m = result.manifest;
  m.command = scenario.command;
  m.seed = scenario.seed;
  m.scenario_hash = scenario_hash(scenario);

  auto finish = [&](int code, std::string status, std::string message) {
    result.exit_code = code;
    result.message = message;
    m.exit_code = code;
    m.status = std::move(status);
    m.message = std::move(message);
    m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
      write_json(std::filesystem::path(scenario.output_dir) / "manifest.json", to_json(m));
    } catch (const Error&) {
      // The directory itself is unusable; the exit code carries the failure.
    }
  };

  detail::Command cmd;
  try {
    cmd = detail::parse_command(scenario.command, scenario.parameters);
    if (options.threads < 1) throw Error(ErrorCode::ConfigError, "--threads must be >= 1");
    if (options.constants && !std::filesystem::exists(*options.constants)) {
      throw Error(ErrorCode::MissingInput, "constants file " + options.constants->string() + " does not exist");
    }
    std::error_code ec;
    std::filesystem::create_directories(scenario.output_dir, ec);
    if (ec) throw Error(ErrorCode::ConfigError, "cannot create output directory " + scenario.output_dir);
  } catch (const Error& e) {
    finish(kExitConfig, "config-error", e.what());
    return result;
  }

  detail::RunContext ctx(scenario, options, m);
  try {
    std::visit([&ctx](const auto& c) { detail::execute(ctx, c); }, cmd);
  } catch (const Error& e) {
    const bool config = e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::MissingInput;
    finish(config ? kExitConfig : kExitNumerical, config ? "config-error" : "numerical-failure", e.what());
    return result;
  } catch (const std::exception& e) {
    finish(kExitNumerical, "numerical-failure", e.what());
    return result;
  }
  if (ctx.numerical_failure) {
    finish(kExitNumerical, "numerical-failure", ctx.failure_message);
  } else {
    finish(kExitOk, "ok", "");
  }
  return result;
}

}  // namespace eightloop
