#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "facetflow/error.hpp"
#include "facetflow/scenario.hpp"

#ifndef FACETFLOW_VERSION
#define FACETFLOW_VERSION "0.0.0"
#endif

namespace facetflow {

const char* version() { return FACETFLOW_VERSION; }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty() || k.front() == '.' || k.back() == '.') return false;
  return std::all_of(k.begin(), k.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '.' || c == '-';
  });
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e && std::isfinite(out);
}

template <class T>
bool parse_int(const std::string& s, T& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return !s.empty() && ec == std::errc() && p == e;
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    // Collapse runs of whitespace so lists have one canonical spelling.
    std::string value;
    for (const auto& t : split_ws(line.substr(eq + 1))) value += (value.empty() ? "" : " ") + t;
    if (!valid_key(key))
      throw ConfigError("line " + std::to_string(no) + ": invalid key '" + key + "'");
    if (c.entries_.count(key))
      throw ConfigError("line " + std::to_string(no) + ": duplicate key '" + key + "'");
    c.entries_[key] = value;
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string Config::serialize() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

const std::string& Config::raw(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing key '" + key + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// Schema

namespace {

KeySpec str(std::string key, std::string fallback, std::vector<std::string> choices,
            std::string doc) {
  return {std::move(key), KeyType::string, std::move(fallback), std::move(choices), -1e300, 1e300,
          std::move(doc)};
}
KeySpec integer(std::string key, std::string fallback, double lo, double hi, std::string doc) {
  return {std::move(key), KeyType::integer, std::move(fallback), {}, lo, hi, std::move(doc)};
}
KeySpec real(std::string key, std::string fallback, double lo, double hi, std::string doc) {
  return {std::move(key), KeyType::real, std::move(fallback), {}, lo, hi, std::move(doc)};
}
KeySpec list(std::string key, std::string fallback, double lo, double hi, std::string doc) {
  return {std::move(key), KeyType::real_list, std::move(fallback), {}, lo, hi, std::move(doc)};
}

void append(std::vector<KeySpec>& to, const std::vector<KeySpec>& from) {
  to.insert(to.end(), from.begin(), from.end());
}

std::vector<KeySpec> common_keys() {
  return {
      str("scenario", "", scenario_kinds(), "scenario kind"),
      integer("grid.dim", "1", 1, 2, "torus dimension"),
      integer("grid.n", "256", 8, 4096, "nodes per axis"),
      str("anisotropy.model", "euclidean", {"euclidean", "elliptic", "l4"}, "base anisotropy W"),
      list("anisotropy.matrix", "1 0 1", -1e6, 1e6,
           "elliptic model: symmetric positive definite M as 'xx xy yy'"),
      {"seed", KeyType::u64, "1", {}, 0, 1.8446744073709552e19, "random seed"},
      str("output.dir", "facetflow-out", {}, "output directory (overridden by --out)"),
  };
}

std::vector<KeySpec> mollified_keys() {
  return {integer("anisotropy.m", "16", 1, 4096, "mollification index m of W_m")};
}

std::vector<KeySpec> speed_keys() {
  return {
      str("speed.law", "tv_flow", {"tv_flow", "graph_flow", "driven", "zero"},
          "speed F: tv_flow -xi, graph_flow -sqrt(1+|p|^2) xi, driven -xi-c, zero 0"),
      real("speed.driving", "0", -1e3, 1e3, "driving constant c of the driven law"),
  };
}

std::vector<KeySpec> initial_keys(const std::string& kind) {
  return {
      str("initial.kind", kind, {"constant", "tent", "sin", "smooth", "noise", "facet"},
          "initial data: constant value; tent slope*dist to the axes; sin amplitude*sin; "
          "smooth two-mode profile; noise mollified Gaussian; facet -min(cap, dist(x, B_radius))"),
      real("initial.value", "0", -1e6, 1e6, "constant value"),
      real("initial.slope", "0.5", 0, 1e3, "tent slope"),
      real("initial.amplitude", "0.1", 0, 1e3, "sin, smooth and noise amplitude"),
      real("initial.smoothing", "4", 0, 64, "noise mollifier radius in cells"),
      real("initial.radius", "0.125", 0, 0.5, "facet radius (half-length in 1D)"),
      real("initial.cap", "1", 0, 1e3, "facet depth cap"),
      list("initial.center", "0.5 0.5", 0, 1, "facet center"),
  };
}

std::vector<KeySpec> evolution_keys() {
  return {
      real("evolve.final_time", "0.004", 0, 10, "final time"),
      real("evolve.cfl", "0.9", -1e6, 1e6, "CFL safety factor; must lie in (0, 1)"),
      real("evolve.dt", "0", 0, 10, "fixed time step (0: from the CFL rule)"),
      real("evolve.snapshot_interval", "0", 0, 10, "snapshot spacing (0: initial and final)"),
      real("evolve.monitor_interval", "0", 0, 10, "monitor spacing (0: T/200)"),
      list("evolve.probe_times", "", 0, 10, "extra snapshot times"),
      real("evolve.lipschitz_rel", "1e-3", 0, 1, "relative Lipschitz growth allowed"),
  };
}

std::vector<KeySpec> schema_for(const std::string& kind) {
  std::vector<KeySpec> s = common_keys();
  if (kind == "anisotropy-check") {
    append(s, mollified_keys());
    append(s, speed_keys());
    s.push_back(integer("check.samples", "200", 10, 1e6, "random samples per property"));
  } else if (kind == "resolvent") {
    append(s, mollified_keys());
    append(s, initial_keys("tent"));
    s.push_back(real("resolvent.a", "0.005", 0, 10, "resolvent step a"));
    s.push_back(str("resolvent.algorithm", "singular", {"singular", "regularized"},
                    "singular: primal-dual on W; regularized: Newton on W_m"));
    s.push_back(real("resolvent.relative_gap", "1e-9", 0, 1, "relative duality-gap tolerance"));
    s.push_back(real("resolvent.restart", "-1", -1, 1,
                     "gap decay that restarts the step schedule (0 off, negative: 0.5 in 1D, off in 2D)"));
    s.push_back(integer("resolvent.max_iterations", "200000", 1, 1e9, "iteration cap per solve"));
  } else if (kind == "curvature") {
    append(s, initial_keys("smooth"));
    s.push_back(list("curvature.a", "1e-4 1e-5 1e-6", 0, 10, "decreasing resolvent steps"));
    s.push_back(real("curvature.tolerance", "0.05", 0, 10, "relative tolerance"));
    s.push_back(real("curvature.threshold", "0.25", 0, 1,
                     "smooth data: compare where |grad psi| >= threshold * Lip(psi)"));
    s.push_back(real("curvature.ball", "0", 0, 0.5,
                     "facet data: ball radius for the extrema (0: radius/2)"));
    s.push_back(real("curvature.expected", "", -1e12, 1e12,
                     "facet data: target value (default -dim/radius, euclidean only)"));
    s.push_back(real("resolvent.relative_gap", "1e-12", 0, 1, "relative duality-gap tolerance"));
    s.push_back(real("resolvent.restart", "-1", -1, 1,
                     "gap decay that restarts the step schedule (0 off, negative: 0.5 in 1D, off in 2D)"));
    s.push_back(integer("resolvent.max_iterations", "200000", 1, 1e9, "iteration cap per solve"));
  } else if (kind == "monotonicity") {
    s.push_back(real("monotonicity.inner", "0.1", 0, 0.5, "inner facet radius"));
    s.push_back(real("monotonicity.outer", "0.15", 0, 0.5, "outer facet radius"));
    s.push_back(real("monotonicity.separation", "0.04", 0, 0.5, "separation delta_sep"));
    s.push_back(real("monotonicity.cap", "0.1", 0, 10, "depth cap of both support functions"));
    s.push_back(list("monotonicity.center", "0.5 0.5", 0, 1, "common facet center"));
    s.push_back(list("curvature.a", "4e-4 2e-4", 0, 10, "decreasing resolvent steps"));
    s.push_back(real("curvature.tolerance", "0.02", 0, 10, "allowed margin relative to scale"));
  } else if (kind == "evolve") {
    append(s, mollified_keys());
    append(s, speed_keys());
    append(s, initial_keys("tent"));
    append(s, evolution_keys());
    s.push_back(list("evolve.m_list", "", 1, 4096, "m values for the refinement study"));
    s.push_back(real("evolve.facet_tolerance", "0.05", 0, 1,
                     "1D tent under tv_flow: relative tolerance of the peak law"));
  } else if (kind == "compare") {
    append(s, mollified_keys());
    append(s, speed_keys());
    append(s, evolution_keys());
    s.push_back(integer("compare.pairs", "20", 1, 10000, "number of ordered pairs"));
    s.push_back(real("compare.amplitude", "0.2", 0, 1e3, "noise amplitude"));
    s.push_back(real("compare.smoothing", "4", 0, 64, "noise mollifier radius in cells"));
    s.push_back(real("compare.tolerance", "0", 0, 10, "allowed crossing (0: 10h)"));
  } else if (kind == "barrier") {
    append(s, mollified_keys());
    append(s, speed_keys());
    append(s, initial_keys("tent"));
    s.push_back(real("barrier.eps", "0.05", 0, 10, "initial-trace epsilon"));
    s.push_back(list("barrier.xi", "0.3 0.5", 0, 1, "base point of the trace check"));
    s.push_back(list("barrier.center", "0.5 0.5", 0, 1, "base point of the residual audit"));
    s.push_back(real("barrier.horizon", "0.01", 0, 10, "evolution horizon"));
    s.push_back(real("barrier.tolerance", "1e-6", 0, 1, "allowed violation"));
  } else if (kind == "viscosity-test") {
    append(s, mollified_keys());
    append(s, speed_keys());
    append(s, initial_keys("tent"));
    append(s, evolution_keys());
    s.push_back(str("viscosity.mode", "conventional", {"conventional", "faceted"},
                    "conventional: smooth test function on a slope; faceted: at the peak facet"));
    s.push_back(real("viscosity.time", "0.001", 0, 10, "test time t_hat"));
    s.push_back(integer("viscosity.node", "-1", -1, 1e9, "test node (-1: N/4 or the peak)"));
    s.push_back(real("viscosity.penalty", "1000", 0, 1e9, "conventional: quadratic penalty"));
    s.push_back(real("viscosity.band", "0.002", 0, 1, "faceted: facet detection band"));
    s.push_back(real("viscosity.eta", "0", 0, 0.5, "faceted: general-position radius (0: 12h)"));
    s.push_back(real("viscosity.tolerance", "0", 0, 10,
                     "residual tolerance (0: 5h conventional, 1e-6 faceted)"));
  } else {
    throw ConfigError("unknown scenario kind '" + kind + "'");
  }
  return s;
}

}  // namespace

const std::vector<std::string>& scenario_kinds() {
  static const std::vector<std::string> kinds{"anisotropy-check", "resolvent", "curvature",
                                              "monotonicity",     "evolve",    "compare",
                                              "barrier",          "viscosity-test"};
  return kinds;
}

const std::vector<KeySpec>& scenario_schema(const std::string& kind) {
  static const std::map<std::string, std::vector<KeySpec>> all = [] {
    std::map<std::string, std::vector<KeySpec>> m;
    for (const auto& k : scenario_kinds()) m[k] = schema_for(k);
    return m;
  }();
  const auto it = all.find(kind);
  if (it == all.end()) throw ConfigError("unknown scenario kind '" + kind + "'");
  return it->second;
}

namespace {

void check_value(const KeySpec& spec, const std::string& v) {
  const auto fail = [&](const std::string& why) {
    throw ConfigError("key '" + spec.key + "': " + why + " (got '" + v + "')");
  };
  const auto in_range = [&](double x) {
    if (x < spec.min || x > spec.max)
      fail("value out of range [" + format_double(spec.min) + ", " + format_double(spec.max) + "]");
  };
  switch (spec.type) {
    case KeyType::string:
      if (v.empty()) fail("empty value");
      if (!spec.choices.empty() &&
          std::find(spec.choices.begin(), spec.choices.end(), v) == spec.choices.end())
        fail("unknown choice");
      break;
    case KeyType::integer: {
      long long x;
      if (!parse_int(v, x)) fail("expected an integer");
      in_range(double(x));
      break;
    }
    case KeyType::u64: {
      std::uint64_t x;
      if (!parse_int(v, x)) fail("expected an unsigned 64-bit integer");
      break;
    }
    case KeyType::real: {
      double x;
      if (!parse_real(v, x)) fail("expected a finite number");
      in_range(x);
      break;
    }
    case KeyType::real_list:
      for (const auto& t : split_ws(v)) {
        double x;
        if (!parse_real(t, x)) fail("expected a list of finite numbers");
        in_range(x);
      }
      break;
  }
}

std::vector<double> list_of(const Config& c, const std::string& key) {
  std::vector<double> out;
  for (const auto& t : split_ws(c.raw(key))) {
    double x = 0.0;
    parse_real(t, x);
    out.push_back(x);
  }
  return out;
}

double real_of(const Config& c, const std::string& key) {
  double x = 0.0;
  parse_real(c.raw(key), x);
  return x;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

// Cross-key rules that the per-key schema cannot express.
void check_semantics(const Config& c) {
  const std::string kind = c.raw("scenario");
  const int dim = std::stoi(c.raw("grid.dim"));
  const auto matrix = list_of(c, "anisotropy.matrix");
  require(matrix.size() == 3, "key 'anisotropy.matrix': expected three values 'xx xy yy'");
  if (c.raw("anisotropy.model") == "elliptic") {
    require(matrix[0] > 0 && matrix[0] * matrix[2] - matrix[1] * matrix[1] > 0,
            "key 'anisotropy.matrix': not positive definite");
  }
  for (const char* key : {"initial.center", "monotonicity.center", "barrier.center"}) {
    if (c.has(key))
      require(list_of(c, key).size() == 2, std::string("key '") + key + "': expected two values");
  }
  if (c.has("barrier.xi"))
    require(list_of(c, "barrier.xi").size() == 2, "key 'barrier.xi': expected two values");
  for (const char* key : {"curvature.a"}) {
    if (!c.has(key)) continue;
    const auto a = list_of(c, key);
    require(!a.empty(), std::string("key '") + key + "': empty list");
    for (std::size_t i = 0; i < a.size(); ++i) {
      require(a[i] > 0, std::string("key '") + key + "': steps must be positive");
      if (i > 0) require(a[i] < a[i - 1], std::string("key '") + key + "': must be decreasing");
    }
  }
  if (c.has("evolve.final_time")) {
    const double t = real_of(c, "evolve.final_time");
    require(t > 0, "key 'evolve.final_time': must be positive");
    for (double p : list_of(c, "evolve.probe_times"))
      require(p > 0 && p <= t, "key 'evolve.probe_times': times must lie in (0, T]");
  }
  if (c.has("evolve.m_list")) {
    const auto ms = list_of(c, "evolve.m_list");
    require(ms.empty() || ms.size() >= 2, "key 'evolve.m_list': needs at least two values");
    for (double m : ms)
      require(m == std::floor(m), "key 'evolve.m_list': values must be integers");
  }
  if (c.has("resolvent.a")) require(real_of(c, "resolvent.a") > 0, "key 'resolvent.a': must be positive");
  if (kind == "curvature" && c.raw("initial.kind") == "facet" && c.raw("curvature.expected").empty())
    require(c.raw("anisotropy.model") == "euclidean",
            "key 'curvature.expected': required for non-euclidean facets");
  if (kind == "monotonicity") {
    require(real_of(c, "monotonicity.inner") < real_of(c, "monotonicity.outer"),
            "key 'monotonicity.outer': must exceed monotonicity.inner");
  }
  if (kind == "viscosity-test") {
    require(dim == 1 && c.raw("initial.kind") == "tent",
            "viscosity-test needs grid.dim = 1 and initial.kind = tent");
    const double t = real_of(c, "viscosity.time");
    require(t > 0 && t < real_of(c, "evolve.final_time"), "key 'viscosity.time': must lie in (0, T)");
    if (c.raw("viscosity.mode") == "faceted")
      require(c.raw("speed.law") == "tv_flow", "faceted viscosity test needs speed.law = tv_flow");
    else
      require(c.raw("speed.law") == "tv_flow" || c.raw("speed.law") == "driven",
              "conventional viscosity test needs speed.law = tv_flow or driven");
  }
}

}  // namespace

Config validate(const Config& cfg) {
  if (!cfg.has("scenario")) throw ConfigError("missing key 'scenario'");
  const std::string kind = cfg.raw("scenario");
  const auto& schema = scenario_schema(kind);
  std::set<std::string> known;
  for (const auto& k : schema) known.insert(k.key);
  for (const auto& [k, v] : cfg.entries()) {
    if (!known.count(k))
      throw ConfigError("unknown key '" + k + "' for scenario '" + kind + "'");
  }
  Config out;
  for (const auto& spec : schema) {
    const std::string v = cfg.has(spec.key) ? cfg.raw(spec.key) : spec.fallback;
    // Keys without a default are optional; lists may be empty.
    if (!(v.empty() && (spec.fallback.empty() || spec.type == KeyType::real_list)))
      check_value(spec, v);
    out.set(spec.key, v);
  }
  check_semantics(out);
  return out;
}

// ---------------------------------------------------------------------------
// Formatting

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_grid(const GridFunction& u, double t) {
  const Grid& g = u.grid();
  const int n = g.resolution();
  std::string out = "FACETFLOW-GRID v1\nn=" + std::to_string(g.dim()) + " N=" + std::to_string(n) +
                    " t=" + format_double(t) + "\n";
  const int rows = g.dim() == 1 ? 1 : n;
  for (int j = 0; j < rows; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i) out += ' ';
      out += format_double(u.at(i, j));
    }
    out += '\n';
  }
  return out;
}

GridFile read_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read grid file '" + path + "'");
  std::string magic, line;
  std::getline(in, magic);
  if (magic != "FACETFLOW-GRID v1") throw ConfigError("'" + path + "': not a grid file");
  std::getline(in, line);
  int dim = 0, n = 0;
  char tbuf[64] = {0};
  if (std::sscanf(line.c_str(), "n=%d N=%d t=%63s", &dim, &n, tbuf) != 3 || dim < 1 || dim > 2 ||
      n < 1)
    throw ConfigError("'" + path + "': malformed grid header");
  double t = 0.0;
  if (!parse_real(tbuf, t)) throw ConfigError("'" + path + "': malformed time");
  GridFile f{GridFunction(Grid(dim, n)), t};
  const int rows = dim == 1 ? 1 : n;
  for (int j = 0; j < rows; ++j) {
    if (!std::getline(in, line)) throw ConfigError("'" + path + "': missing rows");
    const auto vals = split_ws(line);
    if (int(vals.size()) != n) throw ConfigError("'" + path + "': wrong row length");
    for (int i = 0; i < n; ++i) {
      double x = 0.0;
      const char* b = vals[i].data();
      const char* e = b + vals[i].size();
      auto [p, ec] = std::from_chars(b, e, x);
      if (ec != std::errc() || p != e) throw ConfigError("'" + path + "': bad value");
      f.u.at(i, j) = x;
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Catalog

const std::vector<ScenarioTemplate>& scenario_catalog() {
  static const std::vector<ScenarioTemplate> cat{
      {"anisotropy-elliptic-2d", "model identities of an elliptic anisotropy and its W_m",
       "scenario = anisotropy-check\ngrid.dim = 2\nanisotropy.model = elliptic\n"
       "anisotropy.matrix = 4 0 1\nanisotropy.m = 8\ncheck.samples = 200\n"},
      {"resolvent-tent-1d", "tent resolvent: facet half-length and peak drop vs closed form",
       "scenario = resolvent\ngrid.n = 512\ninitial.kind = tent\ninitial.slope = 0.5\n"
       "resolvent.a = 0.005\n"},
      {"resolvent-noise-2d", "resolvent of mollified noise on a 64x64 torus",
       "scenario = resolvent\ngrid.dim = 2\ngrid.n = 64\ninitial.kind = noise\n"
       "initial.amplitude = 0.1\nresolvent.a = 0.002\n"},
      {"smooth-curvature-2d", "difference quotient vs div grad W(grad psi) on smooth data",
       "scenario = curvature\ngrid.dim = 2\ngrid.n = 64\ninitial.kind = smooth\n"
       "initial.amplitude = 0.3\ncurvature.a = 1e-4 1e-5 1e-6\ncurvature.tolerance = 0.05\n"},
      {"facet-curvature-1d", "local-max facet of length 0.25: curvature -8",
       "scenario = curvature\ngrid.n = 256\ninitial.kind = facet\ninitial.radius = 0.125\n"
       "curvature.a = 4e-4 2e-4 1e-4\ncurvature.tolerance = 0.05\n"},
      {"disk-curvature-2d", "disk facet of radius 0.2: curvature -10",
       "scenario = curvature\ngrid.dim = 2\ngrid.n = 256\ninitial.kind = facet\n"
       "initial.radius = 0.2\ninitial.cap = 0.1\ncurvature.a = 1e-3\n"
       "curvature.tolerance = 0.1\nresolvent.relative_gap = 1e-8\nresolvent.restart = 0.5\n"},
      {"nested-facets-1d", "ordered curvature of nested 1D facets",
       "scenario = monotonicity\ngrid.n = 256\nmonotonicity.inner = 0.1\n"
       "monotonicity.outer = 0.15\nmonotonicity.separation = 0.04\n"},
      {"nested-disks-2d", "ordered curvature of nested disk facets",
       "scenario = monotonicity\ngrid.dim = 2\ngrid.n = 64\nmonotonicity.inner = 0.15\n"
       "monotonicity.outer = 0.25\nmonotonicity.separation = 0.04\ncurvature.a = 1e-3 5e-4\n"},
      {"evolve-tent-1d", "tv_flow tent: peak law and Lipschitz monitor",
       "scenario = evolve\ngrid.n = 512\nanisotropy.m = 32\ninitial.kind = tent\n"
       "initial.slope = 0.5\nevolve.final_time = 0.004\nevolve.probe_times = 0.001 0.004\n"},
      {"evolve-constant-1d", "constant data stays constant",
       "scenario = evolve\ngrid.n = 128\nanisotropy.m = 8\ninitial.kind = constant\n"
       "initial.value = 0.3\nevolve.final_time = 0.002\nevolve.snapshot_interval = 0.0005\n"},
      {"evolve-cfl-violation-1d", "c_cfl = 10 is rejected (exit 3)",
       "scenario = evolve\ngrid.n = 128\nanisotropy.m = 8\ninitial.kind = tent\n"
       "evolve.final_time = 0.002\nevolve.cfl = 10\n"},
      {"graph-flow-sin-1d", "graph-flow speed law on a sine profile",
       "scenario = evolve\ngrid.n = 256\nanisotropy.m = 8\nspeed.law = graph_flow\n"
       "initial.kind = sin\ninitial.amplitude = 0.1\nevolve.final_time = 0.01\n"},
      {"m-refinement-tent-1d", "sup |u_m - u_2m| decreasing in m for a tent",
       "scenario = evolve\ngrid.n = 128\nanisotropy.m = 4\ninitial.kind = tent\n"
       "evolve.final_time = 0.01\nevolve.m_list = 4 8 16 32\n"},
      {"m-refinement-sin-1d", "sup |u_m - u_2m| decreasing in m for a sine",
       "scenario = evolve\ngrid.n = 128\nanisotropy.m = 4\ninitial.kind = sin\n"
       "initial.amplitude = 0.1\nevolve.final_time = 0.01\nevolve.m_list = 4 8 16 32\n"},
      {"evolve-noise-2d", "2D evolution of mollified noise",
       "scenario = evolve\ngrid.dim = 2\ngrid.n = 48\nanisotropy.m = 4\ninitial.kind = noise\n"
       "initial.amplitude = 0.3\nevolve.final_time = 0.002\nevolve.snapshot_interval = 0.001\n"},
      {"compare-noise-1d", "ordered random pairs stay ordered",
       "scenario = compare\ngrid.n = 128\nanisotropy.m = 16\nevolve.final_time = 0.05\n"
       "compare.pairs = 20\n"},
      {"barrier-tent-1d", "initial trace and supersolution audit of the barrier",
       "scenario = barrier\ngrid.n = 128\nanisotropy.m = 16\ninitial.kind = tent\n"
       "barrier.eps = 0.05\nbarrier.xi = 0.3 0\nbarrier.center = 0.5 0\n"},
      {"viscosity-driven-1d", "conventional test function on a driven tent slope",
       "scenario = viscosity-test\ngrid.n = 256\nanisotropy.m = 32\nspeed.law = driven\n"
       "speed.driving = 0.5\nevolve.final_time = 0.002\nevolve.snapshot_interval = 0.0005\n"
       "viscosity.mode = conventional\nviscosity.time = 0.001\n"},
      {"viscosity-facet-1d", "faceted test function at the peak facet of a tent",
       "scenario = viscosity-test\ngrid.n = 256\nanisotropy.m = 32\nevolve.final_time = 0.004\n"
       "evolve.snapshot_interval = 0.0005\nviscosity.mode = faceted\nviscosity.time = 0.002\n"},
  };
  return cat;
}

}  // namespace facetflow
