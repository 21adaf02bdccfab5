#include <CLI11.hpp>

#include <iostream>

#include "facetflow/error.hpp"
#include "facetflow/scenario.hpp"

using namespace facetflow;

namespace {

const char* type_name(KeyType t) {
  switch (t) {
    case KeyType::string: return "string";
    case KeyType::integer: return "integer";
    case KeyType::u64: return "u64";
    case KeyType::real: return "real";
    case KeyType::real_list: return "list";
  }
  return "";
}

void print_catalog() {
  std::cout << "Scenario templates (copy one into a file and run it):\n\n";
  for (const auto& t : scenario_catalog()) {
    std::cout << "== " << t.name << ": " << t.description << "\n" << t.text << "\n";
  }
  std::cout << "Parameters by scenario kind (default in brackets):\n";
  for (const auto& kind : scenario_kinds()) {
    std::cout << "\n[" << kind << "]\n";
    for (const auto& k : scenario_schema(kind)) {
      std::cout << "  " << k.key << " (" << type_name(k.type) << ")";
      if (!k.fallback.empty()) std::cout << " [" << k.fallback << "]";
      std::cout << ": " << k.doc;
      if (!k.choices.empty() && k.key != "scenario") {
        std::cout << "; one of";
        for (const auto& c : k.choices) std::cout << " " << c;
      }
      std::cout << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"facetflow: anisotropic total variation flows on periodic grids"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  bool quiet = false;
  CLI::App* run = app.add_subcommand("run", "run a scenario config");
  run->add_option("config", config_path, "scenario config file")->required();
  CLI::Option* out_opt = run->add_option("--out", out_dir, "output directory");
  CLI::Option* seed_opt = run->add_option("--seed", seed, "random seed (overrides the config)");
  run->add_flag("--quiet", quiet, "suppress progress output");
  CLI::App* list = app.add_subcommand("list", "print scenario templates and parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (list->parsed()) {
    print_catalog();
    return 0;
  }

  RunOptions opt;
  if (*out_opt) opt.out_dir = out_dir;
  if (*seed_opt) opt.seed = seed;
  opt.quiet = quiet;
  const RunResult r = run_scenario_file(config_path, opt);
  if (r.exit_code != 0 && !r.error.empty()) std::cerr << "facetflow: " << r.error << "\n";
  return r.exit_code;
}
