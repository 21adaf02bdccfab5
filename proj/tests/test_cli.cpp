#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "facetflow/error.hpp"
#include "facetflow/scenario.hpp"

using namespace facetflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("facetflow_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json manifest(const fs::path& dir) {
  return nlohmann::json::parse(slurp(dir / "manifest.json"));
}

RunResult run_text(const std::string& text, const fs::path& dir, std::optional<std::uint64_t> seed = {}) {
  RunOptions o;
  o.out_dir = dir.string();
  o.quiet = true;
  o.seed = seed;
  return run_scenario(Config::parse(text), o);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> r;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) r.push_back(cell);
    if (!line.empty() && line.back() == ',') r.push_back("");
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_CASE("config parser") {
  const Config c = Config::parse(
      "# comment\n"
      "scenario = evolve   # trailing\n"
      "\n"
      "  evolve.probe_times =  0.001    0.004 \n"
      "output.dir=out\n");
  CHECK(c.raw("scenario") == "evolve");
  CHECK(c.raw("evolve.probe_times") == "0.001 0.004");
  CHECK(c.raw("output.dir") == "out");
  CHECK(c.serialize() ==
        "evolve.probe_times = 0.001 0.004\noutput.dir = out\nscenario = evolve\n");
  CHECK(Config::parse(c.serialize()).entries() == c.entries());

  CHECK_THROWS_WITH_AS(Config::parse("a = 1\nb\n"), doctest::Contains("line 2"), ConfigError);
  CHECK_THROWS_WITH_AS(Config::parse("a = 1\na = 2\n"), doctest::Contains("duplicate"), ConfigError);
  CHECK_THROWS_AS(Config::parse("Bad.Key = 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse(" = 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::load("/nonexistent/facetflow.cfg"), ConfigError);
  CHECK_THROWS_AS(c.raw("missing"), ConfigError);
}

TEST_CASE("schema validation") {
  const Config v = validate(Config::parse("scenario = evolve\n"));
  CHECK(v.raw("grid.n") == "256");
  CHECK(v.raw("evolve.cfl") == "0.9");
  CHECK(v.raw("evolve.probe_times").empty());
  for (const auto& k : scenario_schema("evolve")) CHECK(v.has(k.key));

  auto bad = [](const std::string& text, const std::string& needle) {
    CHECK_THROWS_WITH_AS(validate(Config::parse(text)), doctest::Contains(needle.c_str()), ConfigError);
  };
  bad("grid.n = 64\n", "scenario");
  bad("scenario = nope\n", "unknown scenario");
  bad("scenario = evolve\nresolvent.a = 0.1\n", "unknown key 'resolvent.a'");
  bad("scenario = evolve\ngrid.n = 12.5\n", "grid.n");
  bad("scenario = evolve\ngrid.n = 4\n", "out of range");
  bad("scenario = evolve\ngrid.dim = 3\n", "grid.dim");
  bad("scenario = evolve\nspeed.law = fast\n", "unknown choice");
  bad("scenario = evolve\nevolve.final_time = abc\n", "finite number");
  bad("scenario = evolve\nevolve.final_time = nan\n", "finite number");
  bad("scenario = evolve\nevolve.probe_times = 0.001 0.5\n", "probe_times");
  bad("scenario = evolve\nevolve.m_list = 4\n", "m_list");
  bad("scenario = curvature\ncurvature.a = 1e-4 1e-3\n", "decreasing");
  bad("scenario = resolvent\nanisotropy.model = elliptic\nanisotropy.matrix = 1 2 1\n",
      "positive definite");
  bad("scenario = resolvent\nseed = -1\n", "seed");
  bad("scenario = viscosity-test\ninitial.kind = sin\n", "tent");
  bad("scenario = curvature\ninitial.kind = facet\nanisotropy.model = l4\n", "curvature.expected");
  // The CFL factor is checked at run time (exit 3), not by the schema.
  CHECK_NOTHROW(validate(Config::parse("scenario = evolve\nevolve.cfl = 10\n")));
}

TEST_CASE("catalog") {
  const auto& cat = scenario_catalog();
  auto has = [&](const std::string& n) {
    return std::any_of(cat.begin(), cat.end(), [&](const ScenarioTemplate& t) { return t.name == n; });
  };
  CHECK(has("resolvent-tent-1d"));
  CHECK(has("disk-curvature-2d"));
  std::set<std::string> kinds;
  for (const auto& t : cat) {
    CAPTURE(t.name);
    const Config c = Config::parse(t.text);
    CHECK(Config::parse(c.serialize()).entries() == c.entries());
    const Config v = validate(c);
    CHECK(validate(Config::parse(v.serialize())).entries() == v.entries());
    CHECK_FALSE(declared_checks(v).empty());
    kinds.insert(c.raw("scenario"));
  }
  CHECK(kinds.size() == scenario_kinds().size());
}

TEST_CASE("shipped scenario files match the catalog") {
  const fs::path dir = fs::path(FACETFLOW_SOURCE_DIR) / "scenarios";
  for (const auto& t : scenario_catalog()) {
    CAPTURE(t.name);
    const fs::path f = dir / (t.name + ".cfg");
    REQUIRE(fs::exists(f));
    CHECK(Config::load(f.string()).entries() == Config::parse(t.text).entries());
  }
}

TEST_CASE("number and grid formats") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5e-300) == "-2.5e-300");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, int(u(rng)) % 30);
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }

  const fs::path dir = scratch("grid");
  fs::create_directories(dir);
  for (int dim : {1, 2}) {
    const Grid g(dim, 8);
    GridFunction f(g);
    for (std::size_t k = 0; k < g.size(); ++k) f[k] = u(rng) / 7.0;
    const std::string text = format_grid(f, 0.1);
    const std::string head = "FACETFLOW-GRID v1\nn=" + std::to_string(dim) + " N=8 t=0.10000000000000001\n";
    CHECK(text.rfind(head, 0) == 0);
    std::size_t lines = std::count(text.begin(), text.end(), '\n');
    CHECK(lines == 2u + (dim == 1 ? 1u : 8u));
    const fs::path p = dir / ("g" + std::to_string(dim) + ".grid");
    std::ofstream(p) << text;
    const GridFile back = read_grid(p.string());
    CHECK(back.u == f);
    CHECK(back.time == 0.1);
  }
  // Row-major: the second line of a 2D file holds row j = 1.
  const Grid g(2, 8);
  GridFunction f(g);
  for (std::size_t k = 0; k < g.size(); ++k) f[k] = double(k);
  std::string expect = "FACETFLOW-GRID v1\nn=2 N=8 t=0\n";
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 8; ++i) expect += std::to_string(8 * j + i) + (i == 7 ? "\n" : " ");
  CHECK(format_grid(f, 0) == expect);
  std::ofstream(dir / "bad.grid") << "FACETFLOW-GRID v1\nn=1 N=8 t=0\n1 2 3\n";
  CHECK_THROWS_AS(read_grid((dir / "bad.grid").string()), ConfigError);
}

TEST_CASE("run: constant data under tv_flow") {
  const fs::path dir = scratch("constant");
  const RunResult r = run_text(
      "scenario = evolve\ngrid.n = 64\nanisotropy.m = 8\ninitial.kind = constant\n"
      "initial.value = 0.3\nevolve.final_time = 0.002\nevolve.snapshot_interval = 0.001\n",
      dir);
  CHECK(r.exit_code == 0);
  CHECK(r.status == "passed");
  const auto rows = read_csv(dir / "series.csv");
  REQUIRE(rows.size() > 2);
  CHECK(rows[0] == std::vector<std::string>{"time", "min", "max", "mean", "lipschitz"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][1] == rows[1][1]);
    CHECK(rows[i][2] == rows[1][2]);
    CHECK(rows[i][4] == "0");
  }
  CHECK(read_grid((dir / "snapshots/u_0002.grid").string()).time == 0.002);
  const auto m = manifest(dir);
  CHECK(m["status"] == "passed");
  CHECK(m["checks"].size() == m["declared_checks"].size());
  CHECK(m["summary"]["failed"] == 0);
  CHECK(m["config"]["initial.value"] == "0.3");
  CHECK(m["version"] == version());
  CHECK(fs::exists(dir / "timing.json"));
  for (const auto& a : m["artifacts"]) CHECK(fs::exists(dir / a.get<std::string>()));
}

TEST_CASE("run: CFL violation exits 3 with a manifest") {
  const fs::path dir = scratch("cfl");
  const RunResult r = run_text(
      "scenario = evolve\ngrid.n = 64\nanisotropy.m = 8\nevolve.final_time = 0.002\nevolve.cfl = 10\n",
      dir);
  CHECK(r.exit_code == 3);
  CHECK(r.status == "cfl_violation");
  CHECK(r.error.find("CFL") != std::string::npos);
  const auto m = manifest(dir);
  CHECK(m["exit_code"] == 3);
  CHECK(m["error"].get<std::string>().find("c_cfl") != std::string::npos);
}

TEST_CASE("run: tent resolvent table") {
  const fs::path dir = scratch("tent");
  const RunResult r = run_text(
      "scenario = resolvent\ngrid.n = 512\ninitial.kind = tent\ninitial.slope = 0.5\nresolvent.a = 0.005\n",
      dir);
  CHECK(r.exit_code == 0);
  const auto rows = read_csv(dir / "resolvent.csv");
  CHECK(rows[0] == std::vector<std::string>{"quantity", "measured", "target", "tolerance"});
  bool ell = false, drop = false;
  for (const auto& row : rows) {
    if (row[0] == "facet_half_length") {
      ell = true;
      CHECK(std::stod(row[2]) == doctest::Approx(std::sqrt(2 * 0.005 / 0.5)).epsilon(1e-15));
      CHECK(std::abs(std::stod(row[1]) - std::stod(row[2])) <= 3.0 / 512);
    }
    if (row[0] == "peak_drop") {
      drop = true;
      CHECK(std::stod(row[2]) == doctest::Approx(std::sqrt(2 * 0.005 * 0.5)).epsilon(1e-15));
      CHECK(std::abs(std::stod(row[1]) - std::stod(row[2])) <= 3.0 * 0.5 / 512);
    }
  }
  CHECK(ell);
  CHECK(drop);
  const GridFile s = read_grid((dir / "psi_a.grid").string());
  CHECK(s.time == 0.005);
  CHECK(s.u.grid() == Grid(1, 512));
}

TEST_CASE("run: error mapping") {
  RunOptions quiet;
  quiet.quiet = true;
  quiet.out_dir = scratch("schema").string();
  const RunResult s = run_scenario(Config::parse("scenario = evolve\ngrid.n = x\n"), quiet);
  CHECK(s.exit_code == 2);
  CHECK_FALSE(fs::exists(fs::path(*quiet.out_dir) / "manifest.json"));
  CHECK(run_scenario_file("/nonexistent/x.cfg", quiet).exit_code == 2);

  // A failing check exits 4.
  const fs::path d4 = scratch("fail");
  const RunResult f = run_text(
      "scenario = evolve\ngrid.n = 128\nanisotropy.m = 16\nevolve.final_time = 0.002\n"
      "evolve.probe_times = 0.002\nevolve.facet_tolerance = 1e-9\n",
      d4);
  CHECK(f.exit_code == 4);
  const auto m = manifest(d4);
  CHECK(m["status"] == "check_failed");
  bool failed = false;
  for (const auto& c : m["checks"])
    if (c["name"] == "facet-law-1") failed = !c["passed"].get<bool>() && c["margin"].get<double>() < 0;
  CHECK(failed);

  // Parameters that are well-formed but infeasible: m below the barrier's m0.
  const fs::path d2 = scratch("infeasible");
  const RunResult p = run_text("scenario = barrier\ngrid.n = 64\nanisotropy.m = 2\nbarrier.xi = 0.3 0\n", d2);
  CHECK(p.exit_code == 2);
  CHECK(manifest(d2)["status"] == "invalid_parameters");
}

TEST_CASE("run: reproducible artifacts and seed override") {
  const std::string text =
      "scenario = evolve\ngrid.dim = 2\ngrid.n = 24\nanisotropy.m = 4\ninitial.kind = noise\n"
      "initial.amplitude = 0.3\nevolve.final_time = 0.001\nevolve.snapshot_interval = 0.0005\n";
  const fs::path a = scratch("rep_a"), b = scratch("rep_b"), c = scratch("rep_c");
  REQUIRE(run_text(text, a).exit_code == 0);
  REQUIRE(run_text(text, b).exit_code == 0);
  REQUIRE(run_text(text, c, 99).exit_code == 0);
  const auto files = manifest(a)["artifacts"];
  CHECK(files.size() >= 4);
  for (const auto& f : files) {
    const std::string name = f.get<std::string>();
    CHECK(slurp(a / name) == slurp(b / name));
  }
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  CHECK(slurp(a / "snapshots/u_0000.grid") != slurp(c / "snapshots/u_0000.grid"));
  CHECK(manifest(c)["seed"] == 99);
  CHECK(manifest(c)["config"]["seed"] == "99");
}
