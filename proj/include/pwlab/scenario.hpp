// Scenario configs, JSON/CSV artifacts and the per-command runners behind the
// pwlab CLI.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pwlab/dynamics.hpp"
#include "pwlab/functionals.hpp"
#include "pwlab/ground_state.hpp"
#include "pwlab/lab.hpp"
#include "pwlab/parallel.hpp"
#include "pwlab/spectral_domain.hpp"

namespace pwlab {

using json = nlohmann::ordered_json;

enum class InitialKind { ScaledGroundState, Coefficients, File };

struct InitialSpec {
  InitialKind kind = InitialKind::ScaledGroundState;
  double lambda = 0.8;    // u = lambda Q
  double velocity = 0.0;  // u_t = velocity Q
  std::vector<double> u;  // sine coefficients, zero padded to n_modes
  std::vector<double> ut;
  std::string path;       // JSON file with "u" and "ut" coefficient arrays

  bool operator==(const InitialSpec&) const = default;
};

struct GroundStateSettings {
  std::string file;  // load Q from here instead of solving when set
  double tol = 1e-10;
  int max_iters = 10000;
  int certify_trials = 1000;
  std::uint64_t seed = 20240611;

  bool operator==(const GroundStateSettings&) const = default;
};

struct SweepSettings {
  std::vector<double> lambdas{0.2, 0.4, 0.6, 0.8, 0.95, 1.05, 1.2, 1.4};
  std::vector<double> alphas{0.0, 1.0, 4.0};

  bool operator==(const SweepSettings&) const = default;
};

struct StabilizeSettings {
  std::vector<double> observability_lambdas{0.3, 0.5, 0.7, 0.8};
  double t0 = 0.0;
  double T = 10.0;
  double ratio_bound = 10.0;
  double lyapunov_eps = 0.01;
  double min_r_squared = 0.95;

  bool operator==(const StabilizeSettings&) const = default;
};

struct Tolerances {
  double energy_rel = 1e-4;  // energy-equality budget relative to E(0) at t = 10, dt = 0.01
  double decay = 1e-5;       // E(t_end) / E(0) for decaying runs
  double bounds = 1e-8;      // functional inequalities
  double virial_ratio_lo = 3.0;
  double virial_ratio_hi = 5.0;

  bool operator==(const Tolerances&) const = default;
};

struct Outputs {
  bool csv = true;
  bool per_run_csv = false;

  bool operator==(const Outputs&) const = default;
};

struct ScenarioConfig {
  DomainSpec domain;
  DampingSpec damping{DampingKind::Constant, 1.0, 0.0, 0.0};
  InitialSpec initial;
  double dt = 0.01;
  double t_end = 40.0;
  int sample_every = 10;
  double nonlinearity = 1.0;
  GroundStateSettings ground_state;
  SweepSettings sweep;
  StabilizeSettings stabilize;
  Tolerances tolerances;
  Outputs outputs;

  bool operator==(const ScenarioConfig& o) const {
    const auto& a = domain;
    const auto& b = o.domain;
    return a.geometry == b.geometry && a.extent == b.extent && a.n_modes == b.n_modes &&
           a.beta == b.beta && a.dealias == b.dealias && damping == o.damping &&
           initial == o.initial && dt == o.dt && t_end == o.t_end &&
           sample_every == o.sample_every && nonlinearity == o.nonlinearity &&
           ground_state == o.ground_state && sweep == o.sweep && stabilize == o.stabilize &&
           tolerances == o.tolerances && outputs == o.outputs;
  }
};

// ---------------------------------------------------------------------------
// Config parsing.

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    ensure(j_.is_object(), Errc::ConfigError, where("") + "expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.emplace_back(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ConfigError, where(key) + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.emplace_back(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string where(const std::string& key) const {
    const std::string full = key.empty() ? path_ : (path_.empty() ? key : path_ + "." + key);
    return "config field '" + (full.empty() ? std::string("<root>") : full) + "': ";
  }

  std::string sub(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end())
        throw Error(Errc::ConfigError,
                    "unknown key '" + k + "'" + (path_.empty() ? "" : " in '" + path_ + "'"));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

inline Geometry parse_geometry(const std::string& s) {
  if (s == "interval") return Geometry::Interval;
  if (s == "radial_ball" || s == "ball") return Geometry::RadialBall;
  throw Error(Errc::ConfigError, "config field 'geometry': unknown geometry '" + s + "'");
}

inline DampingKind parse_damping_kind(const std::string& s) {
  if (s == "zero") return DampingKind::Zero;
  if (s == "constant") return DampingKind::Constant;
  if (s == "indicator") return DampingKind::Indicator;
  if (s == "smooth") return DampingKind::Smooth;
  throw Error(Errc::ConfigError, "config field 'damping.kind': unknown kind '" + s + "'");
}

inline std::string damping_kind_name(DampingKind k) {
  switch (k) {
    case DampingKind::Zero: return "zero";
    case DampingKind::Constant: return "constant";
    case DampingKind::Indicator: return "indicator";
    case DampingKind::Smooth: return "smooth";
  }
  return "?";
}

inline InitialKind parse_initial_kind(const std::string& s) {
  if (s == "scaled_ground_state") return InitialKind::ScaledGroundState;
  if (s == "coefficients") return InitialKind::Coefficients;
  if (s == "file") return InitialKind::File;
  throw Error(Errc::ConfigError, "config field 'initial.kind': unknown kind '" + s + "'");
}

inline std::string initial_kind_name(InitialKind k) {
  switch (k) {
    case InitialKind::ScaledGroundState: return "scaled_ground_state";
    case InitialKind::Coefficients: return "coefficients";
    case InitialKind::File: return "file";
  }
  return "?";
}

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

inline ScenarioConfig config_from_json(const json& j) {
  ScenarioConfig c;
  detail::ConfigReader root(j, "");
  std::string geometry = to_string(c.domain.geometry);
  root.get("geometry", geometry);
  c.domain.geometry = detail::parse_geometry(geometry);
  root.get("extent", c.domain.extent);
  root.get("n_modes", c.domain.n_modes);
  root.get("beta", c.domain.beta);
  root.get("dealias", c.domain.dealias);
  root.get("dt", c.dt);
  root.get("t_end", c.t_end);
  root.get("sample_every", c.sample_every);
  root.get("nonlinearity", c.nonlinearity);

  if (const json* dj = root.child("damping")) {
    detail::ConfigReader r(*dj, root.sub("damping"));
    std::string kind = detail::damping_kind_name(c.damping.kind);
    r.get("kind", kind);
    c.damping.kind = detail::parse_damping_kind(kind);
    r.get("alpha", c.damping.alpha);
    r.get("a", c.damping.a);
    r.get("b", c.damping.b);
    r.finish();
  }
  if (const json* ij = root.child("initial")) {
    detail::ConfigReader r(*ij, root.sub("initial"));
    std::string kind = detail::initial_kind_name(c.initial.kind);
    r.get("kind", kind);
    c.initial.kind = detail::parse_initial_kind(kind);
    r.get("lambda", c.initial.lambda);
    r.get("velocity", c.initial.velocity);
    r.get("u", c.initial.u);
    r.get("ut", c.initial.ut);
    r.get("path", c.initial.path);
    r.finish();
  }
  if (const json* gj = root.child("ground_state")) {
    detail::ConfigReader r(*gj, root.sub("ground_state"));
    r.get("file", c.ground_state.file);
    r.get("tol", c.ground_state.tol);
    r.get("max_iters", c.ground_state.max_iters);
    r.get("certify_trials", c.ground_state.certify_trials);
    r.get("seed", c.ground_state.seed);
    r.finish();
  }
  if (const json* sj = root.child("sweep")) {
    detail::ConfigReader r(*sj, root.sub("sweep"));
    r.get("lambdas", c.sweep.lambdas);
    r.get("alphas", c.sweep.alphas);
    r.finish();
  }
  if (const json* sj = root.child("stabilize")) {
    detail::ConfigReader r(*sj, root.sub("stabilize"));
    r.get("observability_lambdas", c.stabilize.observability_lambdas);
    r.get("t0", c.stabilize.t0);
    r.get("T", c.stabilize.T);
    r.get("ratio_bound", c.stabilize.ratio_bound);
    r.get("lyapunov_eps", c.stabilize.lyapunov_eps);
    r.get("min_r_squared", c.stabilize.min_r_squared);
    r.finish();
  }
  if (const json* tj = root.child("tolerances")) {
    detail::ConfigReader r(*tj, root.sub("tolerances"));
    r.get("energy_rel", c.tolerances.energy_rel);
    r.get("decay", c.tolerances.decay);
    r.get("bounds", c.tolerances.bounds);
    r.get("virial_ratio_lo", c.tolerances.virial_ratio_lo);
    r.get("virial_ratio_hi", c.tolerances.virial_ratio_hi);
    r.finish();
  }
  if (const json* oj = root.child("outputs")) {
    detail::ConfigReader r(*oj, root.sub("outputs"));
    r.get("csv", c.outputs.csv);
    r.get("per_run_csv", c.outputs.per_run_csv);
    r.finish();
  }
  root.finish();

  ensure(c.dt > 0.0, Errc::ConfigError, "config field 'dt': must be positive");
  ensure(c.t_end >= 0.0, Errc::ConfigError, "config field 't_end': must be nonnegative");
  ensure(c.sample_every >= 1, Errc::ConfigError, "config field 'sample_every': must be >= 1");
  return c;
}

inline json config_to_json(const ScenarioConfig& c) {
  json j;
  j["geometry"] = to_string(c.domain.geometry);
  j["extent"] = c.domain.extent;
  j["n_modes"] = c.domain.n_modes;
  j["beta"] = c.domain.beta;
  j["dealias"] = c.domain.dealias;
  j["damping"] = {{"kind", detail::damping_kind_name(c.damping.kind)},
                  {"alpha", c.damping.alpha},
                  {"a", c.damping.a},
                  {"b", c.damping.b}};
  j["initial"] = {{"kind", detail::initial_kind_name(c.initial.kind)},
                  {"lambda", c.initial.lambda},
                  {"velocity", c.initial.velocity},
                  {"u", c.initial.u},
                  {"ut", c.initial.ut},
                  {"path", c.initial.path}};
  j["dt"] = c.dt;
  j["t_end"] = c.t_end;
  j["sample_every"] = c.sample_every;
  j["nonlinearity"] = c.nonlinearity;
  j["ground_state"] = {{"file", c.ground_state.file},
                       {"tol", c.ground_state.tol},
                       {"max_iters", c.ground_state.max_iters},
                       {"certify_trials", c.ground_state.certify_trials},
                       {"seed", c.ground_state.seed}};
  j["sweep"] = {{"lambdas", c.sweep.lambdas}, {"alphas", c.sweep.alphas}};
  j["stabilize"] = {{"observability_lambdas", c.stabilize.observability_lambdas},
                    {"t0", c.stabilize.t0},
                    {"T", c.stabilize.T},
                    {"ratio_bound", c.stabilize.ratio_bound},
                    {"lyapunov_eps", c.stabilize.lyapunov_eps},
                    {"min_r_squared", c.stabilize.min_r_squared}};
  j["tolerances"] = {{"energy_rel", c.tolerances.energy_rel},
                     {"decay", c.tolerances.decay},
                     {"bounds", c.tolerances.bounds},
                     {"virial_ratio_lo", c.tolerances.virial_ratio_lo},
                     {"virial_ratio_hi", c.tolerances.virial_ratio_hi}};
  j["outputs"] = {{"csv", c.outputs.csv}, {"per_run_csv", c.outputs.per_run_csv}};
  return j;
}

/// Parses config text; syntax errors report line and column.
inline ScenarioConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(Errc::ConfigError, "config syntax error at line " + std::to_string(line) +
                                       ", column " + std::to_string(col) + ": " + e.what());
  }
  return config_from_json(j);
}

inline std::string serialize_config(const ScenarioConfig& c) { return config_to_json(c).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Files.

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  ensure(static_cast<bool>(in), Errc::IoError, "cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Writes through a temporary file in the same directory and renames it.
inline void write_file_atomic(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    ensure(static_cast<bool>(out), Errc::IoError, "cannot write " + tmp.string());
    out << content;
    out.flush();
    ensure(static_cast<bool>(out), Errc::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  ensure(!ec, Errc::IoError, "rename to " + p.string() + " failed: " + ec.message());
}

inline ScenarioConfig load_config(const std::filesystem::path& p) { return parse_config(read_file(p)); }

// ---------------------------------------------------------------------------
// Ground-state files: coefficients stored as %.17g strings.

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json ground_state_to_json(const Domain& d, const GroundState& gs) {
  json j;
  j["geometry"] = to_string(d.spec().geometry);
  j["L_or_R"] = d.extent();
  j["beta"] = d.beta();
  j["n_modes"] = d.n_modes();
  j["d"] = gs.d_level;
  j["residual"] = gs.residual;
  json coeffs = json::array();
  for (double c : gs.coeffs.coeffs) coeffs.push_back(format_g17(c));
  j["coeffs"] = std::move(coeffs);
  return j;
}

inline GroundState ground_state_from_json(const Domain& d, const json& j) {
  try {
    ensure(j.at("geometry").get<std::string>() == to_string(d.spec().geometry), Errc::ConfigError,
           "ground-state file geometry does not match the config");
    ensure(j.at("L_or_R").get<double>() == d.extent() && j.at("beta").get<double>() == d.beta() &&
               j.at("n_modes").get<std::size_t>() == d.n_modes(),
           Errc::ConfigError, "ground-state file domain does not match the config");
    SpectralCoeffs c;
    for (const auto& v : j.at("coeffs")) c.coeffs.push_back(std::stod(v.get<std::string>()));
    d.check_modes(c);
    auto gs = detail::finish_ground_state(d, std::move(c), 0);
    return gs;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, std::string("ground-state file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Reports.

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
};

struct RunReport {
  std::string command;
  std::vector<Check> checks;
  std::vector<std::string> verdicts;
  std::vector<std::string> files;
  std::string error;  // set when a module error stopped the run
  double wall_time = 0.0;

  bool all_passed() const {
    if (!error.empty() || checks.empty()) return false;
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }

  void check(std::string name, bool passed, double value, double tolerance) {
    checks.push_back({std::move(name), passed, value, tolerance});
  }
};

namespace detail {

// JSON has no representation for inf/nan; report them as strings.
inline json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

}  // namespace detail

inline json report_to_json(const RunReport& r, const ScenarioConfig& c) {
  json j;
  j["command"] = r.command;
  j["passed"] = r.all_passed();
  j["wall_time_s"] = r.wall_time;
  if (!r.error.empty()) j["error"] = r.error;
  j["verdicts"] = r.verdicts;
  j["files"] = r.files;
  json checks = json::array();
  for (const auto& ch : r.checks)
    checks.push_back({{"name", ch.name},
                      {"passed", ch.passed},
                      {"value", detail::number_or_string(ch.value)},
                      {"tolerance", detail::number_or_string(ch.tolerance)}});
  j["checks"] = std::move(checks);
  j["config"] = config_to_json(c);
  return j;
}

// ---------------------------------------------------------------------------
// Scenario runners.

namespace detail {

inline std::string fmt(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

inline std::string pad3(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

struct Context {
  const ScenarioConfig& cfg;
  std::filesystem::path out_dir;
  RunReport& report;
  Domain domain;
  GroundState gs;
  WellConstants wc;

  void emit(const std::string& name, const std::string& content) {
    const auto p = out_dir / name;
    write_file_atomic(p, content);
    report.files.push_back(p.string());
  }

  DynamicsOptions options() const {
    DynamicsOptions o;
    o.dt = cfg.dt;
    o.nonlinearity = cfg.nonlinearity;
    o.sample_every = cfg.sample_every;
    o.reference_h01 = std::sqrt(wc.q_h01_norm_sq);
    return o;
  }

  // Budget scales like dt^2 t from the reference point (dt = 0.01, t = 10).
  double energy_budget(double e0, double t) const {
    const double r = cfg.dt / 0.01;
    return cfg.tolerances.energy_rel * std::abs(e0) * r * r * std::max(t, 1.0) / 10.0;
  }
};

inline GroundState obtain_ground_state(const Domain& d, const ScenarioConfig& cfg) {
  if (!cfg.ground_state.file.empty())
    return ground_state_from_json(d, json::parse(read_file(cfg.ground_state.file)));
  return petviashvili_solve(d, {cfg.ground_state.tol, cfg.ground_state.max_iters});
}

inline SpectralCoeffs padded(const Domain& d, std::vector<double> v, const char* what) {
  ensure(v.size() <= d.n_modes(), Errc::ConfigError,
         std::string("initial ") + what + " has more coefficients than n_modes");
  v.resize(d.n_modes(), 0.0);
  return SpectralCoeffs{std::move(v)};
}

inline std::pair<Field, Field> initial_fields(const Context& ctx, const InitialSpec& spec) {
  const Domain& d = ctx.domain;
  switch (spec.kind) {
    case InitialKind::ScaledGroundState:
      return {scaled(ctx.gs.q, spec.lambda), scaled(ctx.gs.q, spec.velocity)};
    case InitialKind::Coefficients:
      return {inverse_transform(d, padded(d, spec.u, "u")),
              inverse_transform(d, padded(d, spec.ut, "ut"))};
    case InitialKind::File: {
      json j;
      try {
        j = json::parse(read_file(spec.path));
        return {inverse_transform(d, padded(d, j.at("u").get<std::vector<double>>(), "u")),
                inverse_transform(d, padded(d, j.value("ut", std::vector<double>{}), "ut"))};
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ConfigError, "initial data file " + spec.path + ": " + e.what());
      }
    }
  }
  throw Error(Errc::ConfigError, "unknown initial data kind");
}

inline Classification classify_state(const Context& ctx, const State& s) {
  return classify(ctx.wc, {s.ledger.J, s.ledger.E, s.ledger.K});
}

// K keeps its initial sign at every sample.
inline bool sign_preserved(const Trajectory& tr) {
  if (tr.samples.empty()) return true;
  const bool positive = tr.samples.front().K >= 0.0;
  return std::all_of(tr.samples.begin(), tr.samples.end(),
                     [&](const TrajectorySample& s) { return (s.K >= 0.0) == positive; });
}

// Worst violation of 2E <= ||u||^2 + ||u_t||^2 <= 4E relative to E.
inline double equivalence_violation(const Trajectory& tr) {
  double worst = 0.0;
  for (const auto& s : tr.samples) {
    const double total = s.h01_sq + s.l2t_sq;
    const double scale = std::max(std::abs(s.E), 1e-300);
    worst = std::max({worst, (2.0 * s.E - total) / scale, (total - 4.0 * s.E) / scale});
  }
  return worst;
}

inline void check_ground_state(Context& ctx) {
  const auto& d = ctx.domain;
  const auto& gs = ctx.gs;
  auto& rep = ctx.report;
  const double h = h01_norm_sq(d, gs.coeffs), q = l4_norm_4(d, gs.coeffs);
  rep.check("ground_state.residual", gs.residual < 1e-10, gs.residual, 1e-10);
  if (ctx.cfg.ground_state.file.empty())
    rep.check("ground_state.iterations", gs.iterations < 2000, gs.iterations, 2000);
  rep.check("ground_state.nehari", std::abs(h - q) / h < 1e-8, std::abs(h - q) / h, 1e-8);
  const double pohozaev = std::abs(gs.d_level - 0.25 * q) / gs.d_level;
  rep.check("ground_state.level_identity", pohozaev < 1e-8, pohozaev, 1e-8);

  const auto shot = shooting_oracle(d);
  double dist = 0.0, top = 0.0;
  for (std::size_t i = 0; i < gs.q.size(); ++i) {
    dist = std::max(dist, std::abs(gs.q[i] - shot.state.q[i]));
    top = std::max(top, std::abs(gs.q[i]));
  }
  rep.check("ground_state.shooting_agreement", dist < 1e-6 * top, dist / top, 1e-6);
}

inline void certify(Context& ctx) {
  try {
    ctx.wc = certify_well_constants(ctx.domain, ctx.gs, ctx.cfg.ground_state.certify_trials,
                                    ctx.cfg.ground_state.seed);
    ctx.report.check("ground_state.mountain_pass_certificate", true,
                     ctx.cfg.ground_state.certify_trials, 1e-6);
  } catch (const Error& e) {
    if (e.code() != Errc::CertificationFailure) throw;
    ctx.wc = well_constants(ctx.domain, ctx.gs);
    ctx.report.check("ground_state.mountain_pass_certificate", false,
                     ctx.cfg.ground_state.certify_trials, 1e-6);
    ctx.report.verdicts.push_back(e.what());
  }
}

inline void run_ground_state(Context& ctx) {
  check_ground_state(ctx);
  certify(ctx);
  ctx.report.verdicts.push_back("d = " + fmt(ctx.gs.d_level));
  ctx.emit("ground_state.json", ground_state_to_json(ctx.domain, ctx.gs).dump(2) + "\n");
}

inline void run_check(Context& ctx) {
  const auto& d = ctx.domain;
  const auto& cfg = ctx.cfg;
  auto& rep = ctx.report;
  check_ground_state(ctx);
  certify(ctx);
  rep.check("dt_within_guard", cfg.dt <= dt_max(d), cfg.dt, dt_max(d));

  const auto [u, ut] = initial_fields(ctx, cfg.initial);
  const auto c = forward_transform(d, u);
  const auto e = energies(d, c, forward_transform(d, ut));
  const auto cls = classify(ctx.wc, e);
  rep.verdicts.push_back("initial data: " + to_string(cls.verdict) + " (E = " + fmt(e.E) +
                         ", K = " + fmt(e.K) + ", d = " + fmt(ctx.wc.d) + ")");
  if (h01_norm_sq(d, c) > 0.0) {
    const double slack = explicit_sobolev_check(d, ctx.wc, c);
    rep.check("initial.sobolev_slack", slack >= -cfg.tolerances.bounds, slack,
              -cfg.tolerances.bounds);
  }
  if (e.J < ctx.wc.d) {
    const auto b = lemma12_bounds(d, ctx.wc, ctx.wc.d - e.J, c, cfg.tolerances.bounds);
    rep.check("initial.coercivity_bounds", b.all_hold(),
              b.positive_branch ? b.positive_slack
                                : std::min(b.negative_level_slack, b.negative_ratio_slack),
              cfg.tolerances.bounds);
  }
}

inline void run_evolve(Context& ctx) {
  const auto& d = ctx.domain;
  const auto& cfg = ctx.cfg;
  auto& rep = ctx.report;
  const auto g = make_damping(d, cfg.damping);
  auto [u, ut] = initial_fields(ctx, cfg.initial);
  const auto s0 = make_state(d, g, std::move(u), std::move(ut), cfg.nonlinearity);
  const auto cls = classify_state(ctx, s0);
  const auto tr = evolve(d, g, s0, cfg.t_end, ctx.options());
  rep.verdicts.push_back("initial " + to_string(cls.verdict) + ", termination " +
                         to_string(tr.cause) +
                         (tr.cause == Termination::Completed ? "" : " at t = " + fmt(tr.t_detect)));
  if (cfg.outputs.csv) ctx.emit("trajectory.csv", trajectory_csv(tr));

  if (tr.cause == Termination::Completed) {
    const auto& last = tr.samples.back();
    const double budget = ctx.energy_budget(s0.ledger.E, last.t);
    double worst = 0.0;
    for (const auto& s : tr.samples) worst = std::max(worst, s.residual);
    rep.check("energy_equality", worst <= budget, worst, budget);
  }
  if (cfg.nonlinearity == 1.0 && cls.verdict != Verdict::AboveThreshold) {
    rep.check("K_sign_preserved", sign_preserved(tr), tr.samples.back().K, 0.0);
    if (cls.verdict == Verdict::KPlus) {
      rep.check("KPlus_completes", tr.cause == Termination::Completed, tr.final_state.t, cfg.t_end);
      const double v = equivalence_violation(tr);
      rep.check("energy_equivalence", v <= cfg.tolerances.bounds, v, cfg.tolerances.bounds);
    }
  }
}

struct SweepRun {
  double lambda = 0.0;
  double alpha = 0.0;
  Classification cls;
  Trajectory tr;
  double e0 = 0.0;
};

inline DampingSpec with_level(DampingSpec s, double alpha) {
  if (alpha <= 0.0) return {DampingKind::Zero, 0.0, 0.0, 0.0};
  if (s.kind == DampingKind::Zero) s.kind = DampingKind::Constant;
  s.alpha = alpha;
  return s;
}

inline std::vector<SweepRun> sweep(Context& ctx, const std::vector<double>& lambdas,
                                   const std::vector<double>& alphas) {
  const auto& d = ctx.domain;
  std::vector<SweepRun> runs;
  for (double a : alphas)
    for (double l : lambdas) runs.push_back({l, a, {}, {}, 0.0});
  std::vector<DampingProfile> profiles;
  for (double a : alphas) profiles.push_back(make_damping(d, with_level(ctx.cfg.damping, a)));
  const auto opts = ctx.options();
  parallel_for(runs.size(), [&](std::size_t i) {
    auto& run = runs[i];
    const auto& g = profiles[i / lambdas.size()];
    const auto s0 = make_state(d, g, scaled(ctx.gs.q, run.lambda), scaled(ctx.gs.q, 0.0),
                               ctx.cfg.nonlinearity);
    run.cls = classify_state(ctx, s0);
    run.e0 = s0.ledger.E;
    run.tr = evolve(d, g, s0, ctx.cfg.t_end, opts);
  });
  return runs;
}

inline std::string sweep_csv(const std::vector<SweepRun>& runs) {
  std::string out = "lambda,alpha,E0,K0,verdict,termination,t_final,E_final\n";
  for (const auto& r : runs) {
    const auto& first = r.tr.samples.front();
    const auto& last = r.tr.samples.back();
    out += fmt(r.lambda) + "," + fmt(r.alpha) + "," + fmt(first.E) + "," + fmt(first.K) + "," +
           to_string(r.cls.verdict) + "," + to_string(r.tr.cause) + "," + fmt(last.t) + "," +
           fmt(last.E) + "\n";
  }
  return out;
}

inline void run_dichotomy(Context& ctx) {
  const auto& cfg = ctx.cfg;
  auto& rep = ctx.report;
  const auto runs = sweep(ctx, cfg.sweep.lambdas, cfg.sweep.alphas);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    const std::string tag = "lambda=" + fmt(r.lambda) + ",alpha=" + fmt(r.alpha);
    rep.verdicts.push_back(tag + ": " + to_string(r.cls.verdict) + " -> " + to_string(r.tr.cause));
    if (cfg.outputs.per_run_csv) ctx.emit("run_" + pad3(i) + ".csv", trajectory_csv(r.tr));
    if (r.cls.verdict == Verdict::AboveThreshold) continue;
    rep.check(tag + ".K_sign_preserved", sign_preserved(r.tr), r.tr.samples.back().K, 0.0);
    if (r.cls.verdict == Verdict::KPlus) {
      const double ratio = r.tr.samples.back().E / r.e0;
      const bool decays = r.alpha > 0.0;
      rep.check(tag + ".completes", r.tr.cause == Termination::Completed, r.tr.final_state.t,
                cfg.t_end);
      if (decays) rep.check(tag + ".decays", ratio < cfg.tolerances.decay, ratio, cfg.tolerances.decay);
      const double v = equivalence_violation(r.tr);
      rep.check(tag + ".energy_equivalence", v <= cfg.tolerances.bounds, v, cfg.tolerances.bounds);
    } else {
      rep.check(tag + ".blows_up", r.tr.cause == Termination::BlowUp, r.tr.t_detect, cfg.t_end);
    }
  }
  if (cfg.outputs.csv) ctx.emit("dichotomy.csv", sweep_csv(runs));
}

inline std::vector<Trajectory> sweep_with_profile(const Context& ctx, const DampingProfile& g,
                                                  const std::vector<double>& lambdas,
                                                  double t_end) {
  std::vector<Trajectory> runs(lambdas.size());
  const auto opts = ctx.options();
  parallel_for(runs.size(), [&](std::size_t i) {
    const auto s0 = make_state(ctx.domain, g, scaled(ctx.gs.q, lambdas[i]), scaled(ctx.gs.q, 0.0),
                               ctx.cfg.nonlinearity);
    runs[i] = evolve(ctx.domain, g, s0, t_end, opts);
  });
  return runs;
}

inline void run_stabilize(Context& ctx) {
  const auto& d = ctx.domain;
  const auto& cfg = ctx.cfg;
  const auto& st = cfg.stabilize;
  auto& rep = ctx.report;
  const auto g = make_damping(d, cfg.damping);
  auto [u, ut] = initial_fields(ctx, cfg.initial);
  const auto s0 = make_state(d, g, std::move(u), std::move(ut), cfg.nonlinearity);
  const auto cls = classify_state(ctx, s0);
  rep.check("initial_is_KPlus", cls.verdict == Verdict::KPlus, cls.margin, 0.0);
  if (cls.verdict != Verdict::KPlus) return;

  const auto gcc = gcc_check_1d(d, g);
  rep.check("geometric_control", gcc.holds, gcc.L_control, d.extent() * 2.0);

  const auto tr = evolve(d, g, s0, cfg.t_end, ctx.options());
  if (cfg.outputs.csv) ctx.emit("trajectory.csv", trajectory_csv(tr));
  rep.check("completes", tr.cause == Termination::Completed, tr.final_state.t, cfg.t_end);
  if (tr.cause != Termination::Completed) return;

  double worst = 0.0;
  for (const auto& s : tr.samples) worst = std::max(worst, s.residual);
  const double budget = ctx.energy_budget(s0.ledger.E, cfg.t_end);
  rep.check("energy_equality", worst <= budget, worst, budget);

  const auto fit = fit_decay(tr);
  rep.verdicts.push_back("decay fit on [" + fmt(fit.t0) + ", " + fmt(fit.t1) +
                         "]: lambda = " + fmt(fit.lambda_fit) + ", C = " + fmt(fit.c_fit));
  rep.check("decay_rate_positive", fit.lambda_fit > 0.0, fit.lambda_fit, 0.0);
  rep.check("decay_fit_r_squared", fit.r_squared >= st.min_r_squared, fit.r_squared,
            st.min_r_squared);

  const auto eq = detect_equilibrium(d, ctx.gs, tr, cfg.t_end);
  rep.verdicts.push_back("equilibrium: " + to_string(eq.verdict));
  rep.check("converges_to_zero", eq.verdict == Equilibrium::Zero, eq.distance,
            0.05 * std::sqrt(ctx.wc.q_h01_norm_sq));

  bool sandwich = true;
  double min_eps0 = std::numeric_limits<double>::infinity();
  for (const auto& s : tr.samples) {
    if (!(s.E > 0.0)) continue;
    const auto ly = lyapunov_eps(s.E, s.u_ut, st.lyapunov_eps);
    sandwich = sandwich && ly.sandwich_ok;
    min_eps0 = std::min(min_eps0, ly.eps0);
  }
  rep.check("lyapunov_sandwich", sandwich, min_eps0, st.lyapunov_eps);

  if (!st.observability_lambdas.empty() && !g.vanishes) {
    const auto runs = sweep_with_profile(ctx, g, st.observability_lambdas, st.t0 + st.T);
    std::vector<double> ratios;
    std::string csv = "lambda,E0,dissipated,ratio\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto ob = observability_ratio(d, g, runs[i], st.t0, st.T);
      ratios.push_back(ob.ratio);
      csv += fmt(st.observability_lambdas[i]) + "," + fmt(ob.energy) + "," + fmt(ob.dissipated) +
             "," + fmt(ob.ratio) + "\n";
    }
    const auto spread = ratio_spread(ratios, st.ratio_bound);
    rep.check("observability_uniform", spread.bounded, spread.max_over_median, st.ratio_bound);
    if (cfg.outputs.csv) ctx.emit("observability.csv", csv);
  }
}

inline void run_blowup(Context& ctx) {
  const auto& d = ctx.domain;
  const auto& cfg = ctx.cfg;
  auto& rep = ctx.report;
  auto [u, ut] = initial_fields(ctx, cfg.initial);
  std::vector<double> alphas = cfg.sweep.alphas;
  if (alphas.empty()) alphas.push_back(cfg.damping.kind == DampingKind::Zero ? 0.0 : cfg.damping.alpha);

  std::vector<Trajectory> runs(alphas.size());
  std::vector<DampingProfile> profiles;
  for (double a : alphas) profiles.push_back(make_damping(d, with_level(cfg.damping, a)));
  const auto opts = ctx.options();
  const auto probe = make_state(d, profiles.front(), u, ut, cfg.nonlinearity);
  const auto cls = classify_state(ctx, probe);
  rep.check("initial_is_KMinus", cls.verdict == Verdict::KMinus, cls.margin, 0.0);
  if (cls.verdict != Verdict::KMinus) return;
  const double delta = ctx.wc.d - probe.ledger.E;

  parallel_for(runs.size(), [&](std::size_t i) {
    runs[i] = evolve(d, profiles[i], make_state(d, profiles[i], u, ut, cfg.nonlinearity),
                     cfg.t_end, opts);
  });

  std::string summary = "alpha,termination,t_detect,halvings\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& tr = runs[i];
    const std::string tag = "alpha=" + fmt(alphas[i]);
    summary += fmt(alphas[i]) + "," + to_string(tr.cause) + "," + fmt(tr.t_detect) + "," +
               std::to_string(tr.halvings) + "\n";
    rep.verdicts.push_back(tag + ": " + to_string(tr.cause) + " at t = " + fmt(tr.t_detect));
    if (cfg.outputs.per_run_csv || (cfg.outputs.csv && i == 0))
      ctx.emit(i == 0 ? "trajectory.csv" : "run_" + pad3(i) + ".csv", trajectory_csv(tr));
    rep.check(tag + ".blows_up", tr.cause == Termination::BlowUp, tr.t_detect, cfg.t_end);
    rep.check(tag + ".K_negative", sign_preserved(tr), tr.samples.back().K, 0.0);

    bool bounds = true;
    double slack = std::numeric_limits<double>::infinity();
    for (const auto& s : tr.samples) {
      const double ratio = (delta + std::sqrt(ctx.wc.d * delta)) / (ctx.wc.d + std::sqrt(ctx.wc.d * delta));
      const double level = (-4.0 * delta - 4.0 * std::sqrt(ctx.wc.d * delta)) - s.K;
      const double rat = -ratio * s.h01_sq - s.K;
      bounds = bounds && level >= -cfg.tolerances.bounds * ctx.wc.d &&
               rat >= -cfg.tolerances.bounds * s.h01_sq;
      slack = std::min({slack, level / ctx.wc.d, rat / s.h01_sq});
    }
    rep.check(tag + ".negative_branch_bounds", bounds, slack, -cfg.tolerances.bounds);

    if (tr.cause == Termination::BlowUp && tr.samples.size() >= 5) {
      const auto vs = virial_series(tr);
      rep.check(tag + ".virial_tail_convex", vs.tail_convex, vs.max_dev_Mpp, 0.0);
    }
  }
  if (cfg.outputs.csv) ctx.emit("blowup.csv", summary);

  // Self-convergence of the virial identities on the first half of the first run.
  const auto& first = runs.front();
  if (first.cause == Termination::BlowUp) {
    auto vopts = opts;
    vopts.sample_every = 1;
    const auto vc = virial_convergence(d, profiles.front(), probe, 0.5 * first.t_detect, vopts);
    const auto& t = cfg.tolerances;
    rep.check("virial_Mpp_convergence",
              vc.ratio_Mpp >= t.virial_ratio_lo && vc.ratio_Mpp <= t.virial_ratio_hi, vc.ratio_Mpp,
              t.virial_ratio_lo);
    rep.check("virial_Mp_convergence",
              vc.ratio_Mp >= t.virial_ratio_lo && vc.ratio_Mp <= t.virial_ratio_hi, vc.ratio_Mp,
              t.virial_ratio_lo);
  }
}

}  // namespace detail

enum class Command { GroundState, Evolve, Dichotomy, Stabilize, Blowup, Check };

inline std::optional<Command> parse_command(const std::string& s) {
  if (s == "ground-state") return Command::GroundState;
  if (s == "evolve") return Command::Evolve;
  if (s == "dichotomy") return Command::Dichotomy;
  if (s == "stabilize") return Command::Stabilize;
  if (s == "blowup") return Command::Blowup;
  if (s == "check") return Command::Check;
  return std::nullopt;
}

inline std::string to_string(Command c) {
  switch (c) {
    case Command::GroundState: return "ground-state";
    case Command::Evolve: return "evolve";
    case Command::Dichotomy: return "dichotomy";
    case Command::Stabilize: return "stabilize";
    case Command::Blowup: return "blowup";
    case Command::Check: return "check";
  }
  return "?";
}

/// Builds the domain, obtains Q, runs the command and writes its artifacts
/// plus report.json into out_dir. Module errors end up in the report.
inline RunReport run_scenario(const ScenarioConfig& cfg, Command cmd,
                              const std::filesystem::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  RunReport rep;
  rep.command = to_string(cmd);
  try {
    auto domain = build_domain(cfg.domain);
    auto gs = detail::obtain_ground_state(domain, cfg);
    auto wc = well_constants(domain, gs);
    detail::Context ctx{cfg, out_dir, rep, std::move(domain), std::move(gs), wc};
    switch (cmd) {
      case Command::GroundState: detail::run_ground_state(ctx); break;
      case Command::Evolve: detail::run_evolve(ctx); break;
      case Command::Dichotomy: detail::run_dichotomy(ctx); break;
      case Command::Stabilize: detail::run_stabilize(ctx); break;
      case Command::Blowup: detail::run_blowup(ctx); break;
      case Command::Check: detail::run_check(ctx); break;
    }
  } catch (const Error& e) {
    rep.error = std::string(to_string(e.code())) + ": " + e.what();
  } catch (const std::exception& e) {
    rep.error = e.what();
  }
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    const auto p = out_dir / "report.json";
    write_file_atomic(p, report_to_json(rep, cfg).dump(2) + "\n");
  } catch (const std::exception& e) {
    if (rep.error.empty()) rep.error = e.what();
  }
  return rep;
}

}  // namespace pwlab
