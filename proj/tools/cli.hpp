#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fractal_fp/fractal_fp.hpp"

namespace ffp::cli {

using json = nlohmann::json;

/// Every parameter a subcommand can read. Loaded from a JSON manifest first,
/// then overridden by whatever flags appear on the command line.
struct RunConfig {
  std::string command;
  std::string curve = "koch";
  std::vector<Point> vertices;  // non-empty means an explicit generator
  int level = 6;
  std::optional<double> alpha;
  bool two_sided = false;
  double scale = 1.0;
  double a0 = 0.0;
  double b0 = 1.0;

  double A = 0.25;
  std::string convention = "variance";
  std::vector<double> times;
  std::optional<double> t0;
  std::string solver = "analytic";
  std::size_t grid = 512;

  std::optional<double> a;
  std::optional<double> b;
  std::optional<int> max_level;
  std::size_t probe_trials = 0;
  std::uint64_t probe_seed = 1;

  double alpha_lo = 1.0;
  double alpha_hi = 2.0;
  double tol = 1e-4;

  double tau = 0.01;
  std::optional<double> y_prime;
  int n_max = 4;
  double velocity = 0.0;

  std::optional<double> t_max;
  double decades = 1.5;
  int periods = 0;
  std::size_t count = 16;

  std::string input = "-";
  std::string transform = "log";
  std::optional<double> fit_lo;
  std::optional<double> fit_hi;

  std::string output;
  std::string report;
};

inline std::string describe(const std::string& command) {
  static const std::map<std::string, std::string> text = {
      {"curve", "vertex table u,x0,x1 of the refined curve"},
      {"mass", "vertex-aligned mass sums per level"},
      {"dim", "bisection estimate of the mass dimension"},
      {"staircase", "cumulative mass S(u) at every knot"},
      {"diffuse", "density on the curve from the analytic, ck or fp solver"},
      {"moments", "transitional moments and Kramers-Moyal coefficients"},
      {"fig1", "log|theta| against log|log V| with a line fit"},
      {"msd", "mean squared displacement and its exponent"},
      {"fit", "least-squares power law from a two-column CSV"}};
  return text.at(command);
}

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names = {"curve", "mass",  "dim", "staircase", "diffuse",
                                                 "moments", "fig1", "msd", "fit"};
  return names;
}

namespace detail {

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? json(*v) : json(nullptr);
}

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& v) {
  if (!j.contains(key)) return;
  if (j[key].is_null())
    v.reset();
  else
    v = j[key].get<T>();
}

template <typename T>
void get(const json& j, const char* key, T& v) {
  if (j.contains(key)) v = j[key].get<T>();
}

inline std::vector<Point> vertices_from_json(const json& j) {
  const json& list = j.is_object() ? j.at("vertices") : j;
  if (!list.is_array()) throw PreconditionError("curve spec: vertices must be an array of [x, y] pairs");
  std::vector<Point> out;
  for (const auto& v : list) {
    if (!v.is_array() || v.size() != 2) throw PreconditionError("curve spec: every vertex needs two coordinates");
    out.push_back({v[0].get<double>(), v[1].get<double>()});
  }
  return out;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw PreconditionError(path + ": " + e.what());
  }
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  if (c.vertices.empty()) {
    j["curve"] = c.curve;
  } else {
    json list = json::array();
    for (const auto& p : c.vertices) list.push_back({p[0], p[1]});
    j["curve"] = {{"vertices", list}};
  }
  j["level"] = c.level;
  detail::put_optional(j, "alpha", c.alpha);
  j["two_sided"] = c.two_sided;
  j["scale"] = c.scale;
  j["a0"] = c.a0;
  j["b0"] = c.b0;
  j["A"] = c.A;
  j["convention"] = c.convention;
  j["t"] = c.times;
  detail::put_optional(j, "t0", c.t0);
  j["solver"] = c.solver;
  j["grid"] = c.grid;
  detail::put_optional(j, "a", c.a);
  detail::put_optional(j, "b", c.b);
  detail::put_optional(j, "max_level", c.max_level);
  j["probe_trials"] = c.probe_trials;
  j["probe_seed"] = c.probe_seed;
  j["alpha_lo"] = c.alpha_lo;
  j["alpha_hi"] = c.alpha_hi;
  j["tol"] = c.tol;
  j["tau"] = c.tau;
  detail::put_optional(j, "y_prime", c.y_prime);
  j["n_max"] = c.n_max;
  j["velocity"] = c.velocity;
  detail::put_optional(j, "t_max", c.t_max);
  j["decades"] = c.decades;
  j["periods"] = c.periods;
  j["count"] = c.count;
  j["input"] = c.input;
  j["transform"] = c.transform;
  detail::put_optional(j, "fit_lo", c.fit_lo);
  detail::put_optional(j, "fit_hi", c.fit_hi);
  return j;
}

/// Applies a manifest on top of `c`. Unknown keys are schema violations.
inline void apply_json(const json& j, RunConfig& c) {
  if (!j.is_object()) throw PreconditionError("config: top level must be a JSON object");
  static const std::set<std::string> known = {
      "command", "curve",    "curve_spec", "level",    "alpha",      "two_sided", "scale",   "a0",
      "b0",      "A",        "convention", "t",        "t0",         "solver",    "grid",    "a",
      "b",       "max_level", "probe_trials", "probe_seed", "alpha_lo", "alpha_hi", "tol", "tau",
      "y_prime", "n_max",    "velocity",   "t_max",    "decades",    "periods",   "count",   "input",
      "transform", "fit_lo", "fit_hi",     "output",   "report"};
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw PreconditionError("config: unknown key '" + key + "'");
  try {
    if (j.contains("command") && !j["command"].is_null()) {
      const auto cmd = j["command"].get<std::string>();
      if (!c.command.empty() && cmd != c.command)
        throw PreconditionError("config: manifest is for '" + cmd + "', not '" + c.command + "'");
    }
    if (j.contains("curve")) {
      const auto& cv = j["curve"];
      if (cv.is_string()) {
        c.curve = cv.get<std::string>();
        c.vertices.clear();
      } else {
        c.vertices = detail::vertices_from_json(cv);
        c.curve = "custom";
      }
    }
    if (j.contains("curve_spec")) {
      c.vertices = detail::vertices_from_json(detail::read_json_file(j["curve_spec"].get<std::string>()));
      c.curve = "custom";
    }
    detail::get(j, "level", c.level);
    detail::get_optional(j, "alpha", c.alpha);
    detail::get(j, "two_sided", c.two_sided);
    detail::get(j, "scale", c.scale);
    detail::get(j, "a0", c.a0);
    detail::get(j, "b0", c.b0);
    detail::get(j, "A", c.A);
    detail::get(j, "convention", c.convention);
    detail::get(j, "t", c.times);
    detail::get_optional(j, "t0", c.t0);
    detail::get(j, "solver", c.solver);
    detail::get(j, "grid", c.grid);
    detail::get_optional(j, "a", c.a);
    detail::get_optional(j, "b", c.b);
    detail::get_optional(j, "max_level", c.max_level);
    detail::get(j, "probe_trials", c.probe_trials);
    detail::get(j, "probe_seed", c.probe_seed);
    detail::get(j, "alpha_lo", c.alpha_lo);
    detail::get(j, "alpha_hi", c.alpha_hi);
    detail::get(j, "tol", c.tol);
    detail::get(j, "tau", c.tau);
    detail::get_optional(j, "y_prime", c.y_prime);
    detail::get(j, "n_max", c.n_max);
    detail::get(j, "velocity", c.velocity);
    detail::get_optional(j, "t_max", c.t_max);
    detail::get(j, "decades", c.decades);
    detail::get(j, "periods", c.periods);
    detail::get(j, "count", c.count);
    detail::get(j, "input", c.input);
    detail::get(j, "transform", c.transform);
    detail::get_optional(j, "fit_lo", c.fit_lo);
    detail::get_optional(j, "fit_hi", c.fit_hi);
    detail::get(j, "output", c.output);
    detail::get(j, "report", c.report);
  } catch (const json::exception& e) {
    throw PreconditionError(std::string("config: ") + e.what());
  }
}

inline GeneratorSpec resolve_generator(const RunConfig& c) {
  if (!c.vertices.empty()) return GeneratorSpec{c.vertices};
  if (c.curve == "koch") return GeneratorSpec::koch();
  if (c.curve == "segment") return GeneratorSpec::segment();
  if (c.curve == "quadratic-koch" || c.curve == "quadratic_koch") return GeneratorSpec::quadratic_koch();
  if (c.curve == "identity") return GeneratorSpec::identity();
  throw PreconditionError("unknown curve preset '" + c.curve + "' (koch, segment, quadratic-koch, identity)");
}

inline Convention resolve_convention(const std::string& name) {
  if (name == "variance") return Convention::variance;
  if (name == "heat_kernel" || name == "heat-kernel") return Convention::heat_kernel;
  throw PreconditionError("unknown convention '" + name + "' (variance, heat_kernel)");
}

/// Collects the CSV body, summary lines and warnings of one run.
class Session {
 public:
  Session(RunConfig cfg, std::ostream& out) : cfg_(std::move(cfg)), out_(out) {}

  RunConfig& config() { return cfg_; }
  const json& resolved() const { return resolved_; }
  const std::string& digest() const { return digest_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const json& outputs() const { return outputs_; }

  /// Freezes the configuration; the CSV header carries its digest.
  void resolve() {
    resolved_ = to_json(cfg_);
    digest_ = hex_digest(resolved_.dump());
  }

  void warn(std::string message) {
    if (std::find(warnings_.begin(), warnings_.end(), message) == warnings_.end())
      warnings_.push_back(std::move(message));
  }

  void columns(std::initializer_list<std::string_view> names) {
    csv_ << "# ffp " << cfg_.command << " config_digest=" << digest_ << " config=" << resolved_.dump() << '\n';
    bool first = true;
    for (auto n : names) {
      csv_ << (first ? "" : ",") << n;
      first = false;
    }
    csv_ << '\n';
  }

  void row(std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
      csv_ << (first ? "" : ",") << format_double(v);
      first = false;
    }
    csv_ << '\n';
  }

  void row_text(std::string_view text) { csv_ << text << '\n'; }

  void summary(const std::string& key, double value) { summary_.push_back(key + "=" + format_double(value)); }
  void summary(const std::string& key, const std::string& value) { summary_.push_back(key + "=" + value); }

  void flush() {
    const std::string body = csv_.str();
    const bool to_stdout = cfg_.output.empty() || cfg_.output == "-";
    if (to_stdout) {
      out_ << body;
    } else {
      std::ofstream f(cfg_.output, std::ios::binary | std::ios::trunc);
      if (!f) throw PreconditionError("cannot write " + cfg_.output);
      f << body;
    }
    outputs_.push_back({{"path", to_stdout ? "-" : cfg_.output}, {"digest", hex_digest(body)}});
    for (const auto& line : summary_) out_ << (to_stdout ? "# " : "") << line << '\n';
  }

 private:
  RunConfig cfg_;
  std::ostream& out_;
  json resolved_;
  std::string digest_;
  std::ostringstream csv_;
  std::vector<std::string> summary_;
  std::vector<std::string> warnings_;
  json outputs_ = json::array();
};

namespace detail {

inline FractalCurve make_curve(const RunConfig& c) {
  return build_curve(resolve_generator(c), c.level, c.a0, c.b0, {.scale = c.scale, .two_sided = c.two_sided});
}

/// Explicit alpha, or the similarity dimension of the generator.
inline double resolve_alpha(RunConfig& c) {
  if (!c.alpha) c.alpha = resolve_generator(c).similarity_dimension();
  require(*c.alpha >= 1.0 && *c.alpha <= 2.0, "alpha must lie in [1, 2] for a planar curve");
  return *c.alpha;
}

inline void cmd_curve(Session& s) {
  const auto curve = make_curve(s.config());
  s.resolve();
  s.columns({"u", "x0", "x1"});
  for (std::size_t k = 0; k < curve.knot_count(); ++k)
    s.row({curve.params()[k], curve.points()[k][0], curve.points()[k][1]});
  s.summary("vertices", static_cast<double>(curve.knot_count()));
}

inline void cmd_mass(Session& s) {
  auto& c = s.config();
  const auto curve = make_curve(c);
  const double alpha = resolve_alpha(c);
  if (!c.a) c.a = curve.a0();
  if (!c.b) c.b = curve.b0();
  if (!c.max_level) c.max_level = c.level;
  s.resolve();
  const auto est = mass(curve, alpha, *c.a, *c.b, *c.max_level);
  s.columns({"level", "sum"});
  for (const auto& lv : est.level_values) s.row({static_cast<double>(lv.level), lv.sum});
  if (est.snap_lo > 0.0 || est.snap_hi > 0.0)
    s.warn("mass: endpoints snapped outward to knots by " + format_double(est.snap_lo) + " and " +
           format_double(est.snap_hi));
  s.summary("alpha", alpha);
  s.summary("trend", std::string(to_string(est.trend)));
  s.summary("extrapolated", est.extrapolated);
  if (c.probe_trials > 0) {
    const auto probe = probe_subdivisions(curve, alpha, *c.max_level / 2, c.probe_trials, c.probe_seed);
    s.summary("probe_min_ratio", probe.min_ratio);
    if (probe.violated)
      s.warn("probe: a random vertex-aligned subdivision sums to " + format_double(probe.min_ratio) +
             " of the uniform sum");
  }
}

inline void cmd_dim(Session& s) {
  auto& c = s.config();
  const auto curve = make_curve(c);
  s.resolve();
  const auto est = estimate_dimension(curve, c.alpha_lo, c.alpha_hi, c.tol);
  s.columns({"alpha", "classification"});
  for (const auto& t : est.diagnostics) s.row_text(format_double(t.alpha) + "," + std::string(to_string(t.trend)));
  s.summary("alpha_hat", est.alpha_hat);
  s.summary("alpha_low", est.alpha_low);
  s.summary("alpha_high", est.alpha_high);
}

inline void cmd_staircase(Session& s) {
  auto& c = s.config();
  const auto curve = make_curve(c);
  const auto table = build_staircase(curve, resolve_alpha(c));
  s.resolve();
  s.columns({"u", "S"});
  for (std::size_t k = 0; k < table.knot_count(); ++k) s.row({table.params()[k], table.values()[k]});
  s.summary("S_lower", table.lower());
  s.summary("S_upper", table.upper());
}

inline void cmd_diffuse(Session& s) {
  auto& c = s.config();
  const auto curve = make_curve(c);
  const auto table = build_staircase(curve, resolve_alpha(c));
  const Convention conv = resolve_convention(c.convention);
  require(c.A > 0.0, "diffuse: A must be positive");
  require(c.grid >= 3, "diffuse: grid needs at least three points");
  if (c.times.empty()) c.times = {0.1, 0.2, 0.5};
  for (std::size_t i = 0; i < c.times.size(); ++i) {
    require(c.times[i] > 0.0, "diffuse: times must be positive");
    require(i == 0 || c.times[i] > c.times[i - 1], "diffuse: times must increase");
  }
  require(c.solver == "analytic" || c.solver == "ck" || c.solver == "fp",
          "diffuse: solver must be analytic, ck or fp");
  if (c.solver != "analytic" && !c.t0) c.t0 = 0.1 * c.times.front();
  if (c.t0) require(*c.t0 > 0.0 && *c.t0 < c.times.front(), "diffuse: t0 must lie in (0, first t)");
  s.resolve();

  // One-sided curves run on the mirrored line and report the y >= 0 half.
  const UniformGrid shown = conjugate_grid(table, c.grid);
  const bool mirrored = table.base_index() == 0;
  const UniformGrid solver_grid = mirrored ? make_grid(-table.upper(), table.upper(), 2 * c.grid - 1) : shown;
  const std::size_t offset = mirrored ? c.grid - 1 : 0;
  const double D = effective_diffusivity(c.A, conv);

  s.columns({"t", "u", "y", "x0", "x1", "V"});
  std::optional<DensitySnapshot> snap;
  if (c.solver != "analytic") snap = analytic_snapshot(solver_grid, *c.t0, c.A, conv);
  const std::vector<double> drift(solver_grid.size, 0.0), diffusion(solver_grid.size, D);
  for (double t : c.times) {
    std::vector<double> values(shown.size);
    if (c.solver == "analytic") {
      for (std::size_t i = 0; i < shown.size; ++i) values[i] = conjugate_density(shown.at(i), t, c.A, conv);
    } else {
      if (c.solver == "ck") {
        snap = evolve_chapman_kolmogorov(*snap, D, t);
        if (snap->escaped_mass > 1e-15)
          s.warn("ck: mass " + format_double(snap->escaped_mass) + " escaped the domain by t = " + format_double(t));
      } else {
        snap = evolve_fokker_planck(*snap, drift, diffusion, t);
      }
      for (std::size_t i = 0; i < shown.size; ++i) values[i] = snap->values[offset + i];
    }
    for (std::size_t i = 0; i < shown.size; ++i) {
      const double y = shown.at(i);
      const double u = table.parameter_at(y);
      const Point x = curve.locate(u);
      s.row({t, u, y, x[0], x[1], values[i]});
    }
  }
  s.summary("diffusivity", D);
  s.summary("grid_step", shown.step());
}

inline void cmd_moments(Session& s) {
  auto& c = s.config();
  const auto curve = make_curve(c);
  const auto table = build_staircase(curve, resolve_alpha(c));
  require(c.tau > 0.0, "moments: tau must be positive");
  if (!c.y_prime) c.y_prime = 0.5 * (table.lower() + table.upper());
  s.resolve();
  const auto kernel = c.velocity != 0.0 ? TransitionKernel::drifting(c.tau, c.velocity) : TransitionKernel::gaussian(c.tau);
  const auto m = transitional_moments(kernel, *c.y_prime, c.n_max, table);
  s.columns({"n", "M", "A"});
  for (int n = 0; n <= c.n_max; ++n) {
    const auto i = static_cast<std::size_t>(n);
    s.row({static_cast<double>(n), m.moments[i], m.coefficients[i]});
  }
  if (m.near_boundary) s.warn("moments: y' lies within 8*sqrt(tau) of a domain end");
  if (c.n_max >= 2) {
    s.summary("drift", m.drift());
    s.summary("diffusion", m.diffusion());
  }
}

inline void cmd_fig1(Session& s) {
  auto& c = s.config();
  const auto curve = make_curve(c);
  const auto table = build_staircase(curve, resolve_alpha(c));
  const Convention conv = resolve_convention(c.convention);
  if (c.times.empty()) c.times = {unit_prefactor_time(c.A)};
  require(c.times.size() == 1, "fig1: takes a single time");
  s.resolve();
  const auto pts = density_shape_data(c.times.front(), c.A, curve, table, conv);
  s.columns({"log_abs_theta", "log_abs_log_V"});
  for (const auto& [x, y] : pts) s.row({x, y});
  const auto fit = fit_power_law(pts);
  s.summary("slope", fit.slope);
  s.summary("intercept", fit.intercept);
  s.summary("r_squared", fit.r_squared);
  s.summary("points", static_cast<double>(fit.point_count));
}

inline void cmd_msd(Session& s) {
  auto& c = s.config();
  const auto curve = make_curve(c);
  const auto table = build_staircase(curve, resolve_alpha(c));
  const Convention conv = resolve_convention(c.convention);
  if (c.times.empty()) {
    if (!c.t_max) c.t_max = max_admissible_time(c.A, table, conv);
    c.times = c.periods > 0 ? log_periodic_times(curve, *c.t_max, c.periods, c.count)
                            : msd_times(*c.t_max, c.decades, c.count);
  }
  s.resolve();
  const auto series = msd_series(c.times, c.A, curve, table, conv);
  s.columns({"t", "msd"});
  for (std::size_t i = 0; i < series.times.size(); ++i) s.row({series.times[i], series.msd[i]});
  if (series.times.size() >= 5) {
    const auto fit = msd_exponent(series);
    s.summary("mu", fit.slope);
    s.summary("r_squared", fit.r_squared);
  } else {
    s.warn("msd: fewer than five times; exponent not fitted");
  }
}

inline std::vector<XY> read_two_columns(std::istream& in, const std::string& label) {
  std::vector<XY> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_allowed = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    double x = 0.0, y = 0.0;
    bool ok = comma != std::string::npos;
    if (ok) {
      try {
        std::size_t used = 0;
        x = std::stod(line.substr(0, comma), &used);
        const std::string rest = line.substr(comma + 1);
        y = std::stod(rest, &used);
        ok = rest.find(',') == std::string::npos;
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok) {
      if (header_allowed) {
        header_allowed = false;
        continue;
      }
      throw PreconditionError(label + ":" + std::to_string(line_no) + ": expected two numeric columns");
    }
    header_allowed = false;
    rows.emplace_back(x, y);
  }
  return rows;
}

inline void cmd_fit(Session& s, std::istream& in) {
  auto& c = s.config();
  require(c.transform == "log" || c.transform == "none", "fit: transform must be log or none");
  s.resolve();
  std::vector<XY> rows;
  if (c.input.empty() || c.input == "-") {
    rows = read_two_columns(in, "stdin");
  } else {
    std::ifstream f(c.input);
    if (!f) throw PreconditionError("cannot open " + c.input);
    rows = read_two_columns(f, c.input);
  }
  if (c.transform == "log") {
    for (auto& [x, y] : rows) {
      require(x > 0.0 && y > 0.0, "fit: log transform needs positive data");
      x = std::log(x);
      y = std::log(y);
    }
  }
  std::optional<XY> range;
  if (c.fit_lo || c.fit_hi)
    range = XY{c.fit_lo.value_or(-std::numeric_limits<double>::infinity()),
               c.fit_hi.value_or(std::numeric_limits<double>::infinity())};
  const auto fit = fit_power_law(rows, range);
  s.columns({"slope", "intercept", "r_squared", "points"});
  s.row({fit.slope, fit.intercept, fit.r_squared, static_cast<double>(fit.point_count)});
  s.summary("slope", fit.slope);
  s.summary("r_squared", fit.r_squared);
}

/// Finds `--config <path>` or `--config=<path>` ahead of the real parse so
/// the manifest can seed the defaults that flags then override.
inline std::optional<std::string> find_config_path(std::span<const std::string> args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw PreconditionError("--config needs a path");
      return args[i + 1];
    }
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

inline void add_options(CLI::App& sub, RunConfig& c, std::optional<std::string>& curve_flag,
                        std::string& curve_spec, std::string& config_dummy) {
  sub.add_option("--config", config_dummy, "JSON manifest; flags override its values");
  sub.add_option_function<std::string>("--curve", [&](const std::string& v) { curve_flag = v; },
                                       "preset: koch, segment, quadratic-koch, identity");
  sub.add_option("--curve-spec", curve_spec, "JSON file with a generator vertex list");
  sub.add_option("--level", c.level, "refinement level");
  sub.add_option_function<double>("--alpha", [&](const double& v) { c.alpha = v; }, "mass exponent");
  sub.add_flag("--two-sided", c.two_sided, "mirror the curve through its start");
  sub.add_option("--scale", c.scale, "Euclidean scale of the base chord");
  sub.add_option("--a0", c.a0, "parameter of the curve start");
  sub.add_option("--b0", c.b0, "parameter of the curve end");
  sub.add_option("-o,--output", c.output, "CSV destination (default stdout)");
  sub.add_option("--report", c.report, "write a JSON run report here");
}

inline void add_kinetic_options(CLI::App& sub, RunConfig& c) {
  sub.add_option("--A", c.A, "diffusion constant");
  sub.add_option("--convention", c.convention, "variance or heat_kernel");
  sub.add_option("--t", c.times, "comma-separated times")->delimiter(',');
}

}  // namespace detail

/// Runs one subcommand. `args` excludes the program name.
inline int run(std::span<const std::string> args, std::ostream& out, std::ostream& err, std::istream& in = std::cin) {
  const auto started = std::chrono::steady_clock::now();
  RunConfig cfg;
  std::optional<std::string> curve_flag;
  std::string curve_spec;
  std::string config_dummy;
  CLI::App app{"Fractal-curve calculus and diffusion toolkit", "ffp"};
  app.require_subcommand(1);
  std::map<std::string, CLI::App*> subs;
  try {
    if (!args.empty()) {
      const auto& first = args.front();
      if (std::find(commands().begin(), commands().end(), first) != commands().end()) cfg.command = first;
    }
    if (auto path = detail::find_config_path(args)) apply_json(detail::read_json_file(*path), cfg);

    for (const auto& name : commands()) {
      auto* sub = app.add_subcommand(name, describe(name));
      detail::add_options(*sub, cfg, curve_flag, curve_spec, config_dummy);
      subs[name] = sub;
    }
    for (const char* name : {"diffuse", "fig1", "msd"}) detail::add_kinetic_options(*subs[name], cfg);
    subs["mass"]->add_option_function<double>("--a", [&](const double& v) { cfg.a = v; }, "range start");
    subs["mass"]->add_option_function<double>("--b", [&](const double& v) { cfg.b = v; }, "range end");
    subs["mass"]->add_option_function<int>("--max-level", [&](const int& v) { cfg.max_level = v; },
                                                "deepest level; defaults to --level");
    subs["mass"]->add_option("--probe-trials", cfg.probe_trials, "random subdivisions to test");
    subs["mass"]->add_option("--probe-seed", cfg.probe_seed, "seed for the subdivision probe");
    subs["dim"]->add_option("--alpha-lo", cfg.alpha_lo, "lower end of the bracket");
    subs["dim"]->add_option("--alpha-hi", cfg.alpha_hi, "upper end of the bracket");
    subs["dim"]->add_option("--tol", cfg.tol, "bracket width to stop at");
    subs["diffuse"]->add_option("--solver", cfg.solver, "analytic, ck or fp");
    subs["diffuse"]->add_option("--grid", cfg.grid, "conjugate grid points");
    subs["diffuse"]->add_option_function<double>("--t0", [&](const double& v) { cfg.t0 = v; },
                                                  "start time of the stepped solvers");
    subs["moments"]->add_option("--tau", cfg.tau, "kernel time step");
    subs["moments"]->add_option_function<double>("--y-prime", [&](const double& v) { cfg.y_prime = v; },
                                                   "base point; defaults to the domain midpoint");
    subs["moments"]->add_option("--n-max", cfg.n_max, "highest moment order");
    subs["moments"]->add_option("--velocity", cfg.velocity, "kernel drift; 0 gives the pure gaussian");
    subs["msd"]->add_option_function<double>("--t-max", [&](const double& v) { cfg.t_max = v; },
                                               "last time of the window");
    subs["msd"]->add_option("--decades", cfg.decades, "window length in decades of t");
    subs["msd"]->add_option("--periods", cfg.periods, "whole log-periods instead of decades");
    subs["msd"]->add_option("--count", cfg.count, "number of log-spaced times");
    subs["fit"]->add_option("input,--input", cfg.input, "two-column CSV, '-' for stdin");
    subs["fit"]->add_option("--transform", cfg.transform, "log or none");
    subs["fit"]->add_option_function<double>("--fit-lo", [&](const double& v) { cfg.fit_lo = v; }, "smallest transformed x kept");
    subs["fit"]->add_option_function<double>("--fit-hi", [&](const double& v) { cfg.fit_hi = v; }, "largest transformed x kept");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "ffp: " << e.what() << '\n';
    return 2;
  } catch (const PreconditionError& e) {
    err << "ffp: " << e.what() << '\n';
    return 2;
  }

  for (const auto& [name, sub] : subs)
    if (sub->parsed()) cfg.command = name;

  try {
    if (curve_flag && !curve_spec.empty()) throw PreconditionError("--curve and --curve-spec are exclusive");
    if (curve_flag) {
      cfg.curve = *curve_flag;
      cfg.vertices.clear();
    }
    if (!curve_spec.empty()) {
      cfg.vertices = detail::vertices_from_json(detail::read_json_file(curve_spec));
      cfg.curve = "custom";
    }
    resolve_generator(cfg).validate();

    Session session(cfg, out);
    const auto& cmd = cfg.command;
    if (cmd == "curve") detail::cmd_curve(session);
    else if (cmd == "mass") detail::cmd_mass(session);
    else if (cmd == "dim") detail::cmd_dim(session);
    else if (cmd == "staircase") detail::cmd_staircase(session);
    else if (cmd == "diffuse") detail::cmd_diffuse(session);
    else if (cmd == "moments") detail::cmd_moments(session);
    else if (cmd == "fig1") detail::cmd_fig1(session);
    else if (cmd == "msd") detail::cmd_msd(session);
    else detail::cmd_fit(session, in);
    session.flush();

    for (const auto& w : session.warnings()) err << "ffp: warning: " << w << '\n';
    if (!session.config().report.empty()) {
      json report;
      report["command"] = std::vector<std::string>(args.begin(), args.end());
      report["config"] = session.resolved();
      report["config_digest"] = session.digest();
      report["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      report["warnings"] = session.warnings();
      report["outputs"] = session.outputs();
      std::ofstream f(session.config().report, std::ios::trunc);
      if (!f) throw PreconditionError("cannot write " + session.config().report);
      f << report.dump(2) << '\n';
    }
    return 0;
  } catch (const NumericalGuardError& e) {
    err << "ffp: numerical guard: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    // PreconditionError derives from std::invalid_argument
    err << "ffp: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    err << "ffp: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "ffp: internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace ffp::cli
