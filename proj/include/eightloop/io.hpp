#pragma once

// Serialisation: JSON documents for constants, zero counts and sweep lines;
// CSV tables; whitespace-separated plot columns.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "eightloop/abelian_integrals.hpp"
#include "eightloop/dynamics.hpp"
#include "eightloop/error.hpp"
#include "eightloop/melnikov.hpp"
#include "eightloop/series.hpp"
#include "eightloop/sweep.hpp"

namespace eightloop {

using Json = nlohmann::ordered_json;

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::NumericalFailure, "cannot write " + p.string());
  out << text;
}

inline void write_json(const std::filesystem::path& p, const Json& j) { write_file(p, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Documents

inline Json to_json(const FittedConstants& c) {
  return Json{{"a1", c.a1},
              {"a2", c.a2},
              {"b2", c.b2},
              {"residual", c.residual},
              {"window", {c.window.first, c.window.second}},
              {"kappa", c.kappa},
              {"a3", c.a3},
              {"b3", c.b3},
              {"i4p_h2", c.i4p_h2},
              {"i4p_h3", c.i4p_h3},
              {"condition", c.condition}};
}

inline FittedConstants constants_from_json(const Json& j) {
  FittedConstants c;
  try {
    for (const char* key : {"a1", "a2", "b2", "residual", "window", "kappa"}) {
      if (!j.contains(key)) throw Error(ErrorCode::ConfigError, std::string("constants file lacks '") + key + "'");
    }
    c.a1 = j.at("a1").get<double>();
    c.a2 = j.at("a2").get<double>();
    c.b2 = j.at("b2").get<double>();
    c.residual = j.at("residual").get<double>();
    c.window = {j.at("window").at(0).get<double>(), j.at("window").at(1).get<double>()};
    c.kappa = j.at("kappa").get<double>();
    c.a3 = j.value("a3", 0.0);
    c.b3 = j.value("b3", 0.0);
    // Files written without the extra terms fall back to the exact h^2 relation of I4'.
    c.i4p_h2 = j.value("i4p_h2", 4.0 * c.a1 + 5.0 * c.b2 - 16.0);
    c.i4p_h3 = j.value("i4p_h3", 0.0);
    c.condition = j.value("condition", 0.0);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed constants file: ") + e.what());
  }
  return c;
}

inline FittedConstants load_constants(const std::filesystem::path& p) {
  Json j;
  try {
    j = Json::parse(read_file(p));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigError, "constants file " + p.string() + " is not JSON: " + e.what());
  }
  return constants_from_json(j);
}

inline Json to_json(const ZeroCount& z) {
  Json zeros = Json::array();
  for (const auto& b : z.zeros) zeros.push_back({{"h", b.h}, {"bracket_width", b.width()}});
  return Json{{"interval", {z.interval.first, z.interval.second}},
              {"zeros", zeros},
              {"count", z.count},
              {"suspects", z.suspects},
              {"caveat", z.caveat}};
}

inline Json to_json(const LimitCycleRecord& r) {
  return Json{{"h_star", r.h_star},
              {"bracket", {r.bracket.first, r.bracket.second}},
              {"stability", r.stability},
              {"slope", r.slope},
              {"epsilon", std::isfinite(r.epsilon) ? Json(r.epsilon) : Json(nullptr)}};
}

inline Json to_json(const SampleFailure& f) {
  return Json{{"h", std::isfinite(f.h) ? Json(f.h) : Json(nullptr)},
              {"code", std::string(to_string(f.code))},
              {"message", f.message}};
}

inline Json to_json(const ArcSpec& a) {
  Json j = Json::object();
  const char* names[] = {"lambda1", "lambda2", "lambda3", "lambda4"};
  for (int p = 0; p < 4; ++p) j[names[p]] = a.coeff_table[static_cast<std::size_t>(p)];
  return j;
}

/// One sweep sample as a single JSON line.
inline std::string sweep_line(const SweepReport& rep, const SweepSample& s, std::uint64_t seed) {
  Json cycles = Json::array();
  for (const auto& c : s.cycles) cycles.push_back(to_json(c));
  Json failures = Json::array();
  for (const auto& f : s.failures) failures.push_back(to_json(f));
  const Json j{{"index", s.index},   {"family", std::string(to_string(rep.family))},
               {"seed", seed},       {"eps", rep.eps},
               {"arc", to_json(s.arc)}, {"count", s.count},
               {"bound", rep.bound}, {"anomaly", s.anomaly},
               {"confirmed", s.confirmed}, {"cycles", cycles},
               {"failures", failures}};
  return j.dump();
}

inline Json sweep_summary(const SweepReport& rep) {
  Json hist = Json::object();
  for (const auto& [count, n] : rep.histogram) hist[std::to_string(count)] = n;
  return Json{{"family", std::string(to_string(rep.family))},
              {"eps", rep.eps},
              {"window", {rep.window.first, rep.window.second}},
              {"n_samples", rep.samples.size()},
              {"bound", rep.bound},
              {"max_count", rep.max_count},
              {"histogram", hist},
              {"anomalies", rep.anomalies},
              {"confirmed_anomalies", rep.confirmed_anomalies},
              {"failed_samples", rep.failed_samples},
              {"within_bound", rep.confirmed_anomalies == 0}};
}

// ---------------------------------------------------------------------------
// Tables

/// Comma-separated table at 17 significant digits, with an optional leading
/// comment block of "# key=value" lines.
class CsvWriter {
 public:
  CsvWriter(std::vector<std::string> header, std::vector<std::string> comments = {})
      : width_(header.size()) {
    for (const auto& c : comments) text_ << "# " << c << '\n';
    for (std::size_t i = 0; i < header.size(); ++i) text_ << (i ? "," : "") << header[i];
    text_ << '\n';
  }

  void row(const std::vector<double>& values) {
    if (values.size() != width_) throw Error(ErrorCode::NumericalFailure, "CSV row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) text_ << (i ? "," : "") << format_double(values[i]);
    text_ << '\n';
  }

  std::string str() const { return text_.str(); }
  void save(const std::filesystem::path& p) const { write_file(p, str()); }

 private:
  std::size_t width_;
  std::ostringstream text_;
};

inline std::string trajectory_csv(const Trajectory& traj, int n_out, const std::vector<std::string>& comments = {}) {
  CsvWriter w({"t", "x", "y", "H"}, comments);
  const double t_end = traj.t_end();
  for (int i = 0; i < n_out; ++i) {
    const double t = n_out == 1 ? 0.0 : t_end * i / (n_out - 1);
    const PhasePoint p = traj.at(t);
    w.row({t, p.x, p.y, energy(p)});
  }
  return w.str();
}

// ---------------------------------------------------------------------------
// Plot data

enum class PlotKind { Integrals, Melnikov, Displacement, SweepHistogram };

constexpr std::string_view to_string(PlotKind k) noexcept {
  switch (k) {
    case PlotKind::Integrals: return "integrals";
    case PlotKind::Melnikov: return "melnikov";
    case PlotKind::Displacement: return "displacement";
    case PlotKind::SweepHistogram: return "sweep-histogram";
  }
  return "?";
}

/// Only the inputs relevant to the requested kind need be set.
struct PlotInputs {
  std::vector<double> h;
  QuadratureConfig quadrature{};
  std::optional<MelnikovSpec> spec;
  std::optional<PerturbationParams> lambda;
  IntegratorConfig integrator{};
  const SweepReport* sweep = nullptr;
};

/// Whitespace-separated columns with a "#" header line.
inline std::string emit_plot_data(PlotKind kind, const PlotInputs& in) {
  std::ostringstream out;
  auto need_grid = [&] {
    if (in.h.empty()) throw Error(ErrorCode::MissingInput, std::string(to_string(kind)) + " plot needs an h grid");
  };
  auto line = [&out](std::initializer_list<double> cols) {
    bool first = true;
    for (double c : cols) {
      out << (first ? "" : " ") << format_double(c);
      first = false;
    }
    out << '\n';
  };
  switch (kind) {
    case PlotKind::Integrals: {
      need_grid();
      out << "# h I0 I2 I4p\n";
      const QuadratureBackend q{in.quadrature};
      for (double h : in.h) {
        const IntegralBasis b = q(h);
        line({h, b.I0, b.I2, b.I4p});
      }
      break;
    }
    case PlotKind::Melnikov: {
      need_grid();
      if (!in.spec) throw Error(ErrorCode::MissingInput, "melnikov plot needs a spec");
      out << "# h M_k(h) k=" << in.spec->k << '\n';
      const QuadratureBackend q{in.quadrature};
      for (double h : in.h) line({h, mk(h, *in.spec, q)});
      break;
    }
    case PlotKind::Displacement: {
      need_grid();
      if (!in.lambda) throw Error(ErrorCode::MissingInput, "displacement plot needs lambda");
      out << "# h P(h)-h\n";
      for (double h : in.h) line({h, displacement(h, *in.lambda, in.integrator)});
      break;
    }
    case PlotKind::SweepHistogram: {
      if (!in.sweep) throw Error(ErrorCode::MissingInput, "sweep-histogram plot needs a sweep report");
      out << "# count samples\n";
      for (const auto& [count, n] : in.sweep->histogram) out << count << ' ' << n << '\n';
      break;
    }
  }
  return out.str();
}

}  // namespace eightloop
