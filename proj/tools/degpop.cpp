// degpop: batch front end for the degenerate age-structured solvers.
//
//   degpop <simulate|adjoint|certify|control|sweep> [--config FILE] [--out DIR] [flags]
//
// Outputs go to <root>/<command>, where <root> is --out, else $DEGPOP_OUT,
// else ./degpop_out.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "experiment.hpp"

namespace fs = std::filesystem;
using degpop::cli::ordered_json;

namespace {

ordered_json load_config(const std::string& path) {
  if (path.empty()) return ordered_json::object();
  std::ifstream is(path);
  if (!is) throw degpop::IoError("cannot open config", path);
  try {
    return ordered_json::parse(is, nullptr, true, true);
  } catch (const ordered_json::parse_error& e) {
    throw degpop::cli::ConfigError(std::string("config ") + path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Degenerate age-structured population model: solvers, certificates and null control"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output root (overrides $DEGPOP_OUT)");
  };

  std::optional<std::string> fields, inequality, variant;
  std::vector<double> s_values;
  std::optional<int> samples, max_iters;
  std::optional<std::uint64_t> seed;
  std::optional<double> delta, epsilon;

  auto* simulate = app.add_subcommand("simulate", "forward solve of the state system");
  auto* adjoint = app.add_subcommand("adjoint", "backward solve of the adjoint system");
  auto* certify = app.add_subcommand("certify", "evaluate both sides of an inequality on seeded samples");
  auto* control = app.add_subcommand("control", "penalized HUM null control on the ages (delta, A)");
  auto* sweep = app.add_subcommand("sweep", "cartesian sweep over listed config parameters");
  for (auto* sub : {simulate, adjoint, certify, control, sweep}) common(sub);
  for (auto* sub : {simulate, adjoint, control}) sub->add_option("--fields", fields, "trajectory | terminal");
  for (auto* sub : {simulate, adjoint, certify, control}) sub->add_option("--seed", seed, "random seed");
  certify->add_option("--inequality", inequality,
                      "carleman | carleman_nondeg | carleman_local | caccioppoli | observability");
  certify->add_option("--s", s_values, "Carleman parameter(s)");
  certify->add_option("--samples", samples, "number of seeded samples");
  certify->add_option("--variant", variant, "observability variant: oi | t_less_a");
  for (auto* sub : {certify, control}) sub->add_option("--delta", delta, "target age threshold");
  control->add_option("--epsilon", epsilon, "penalty of the HUM functional");
  control->add_option("--max-iters", max_iters, "iteration budget");

  CLI11_PARSE(app, argc, argv);
  const std::string name = app.get_subcommands().front()->get_name();

  fs::path root = "degpop_out";
  if (const char* env = std::getenv("DEGPOP_OUT"); env && *env) root = env;
  if (!out_dir.empty()) root = out_dir;
  const fs::path run_dir = root / name;

  try {
    ordered_json doc = load_config(config_path);
    if (!doc.is_object()) throw degpop::cli::ConfigError("config must be a JSON object");
    ordered_json& cmd = doc["command"];
    if (cmd.is_null()) cmd = ordered_json::object();
    if (!cmd.is_object()) throw degpop::cli::ConfigError("config.command must be an object");
    if (cmd.contains("name") && cmd["name"] != name)
      throw degpop::cli::ConfigError("config.command.name is '" + cmd["name"].dump() + "' but the subcommand is " +
                                     name);
    cmd["name"] = name;
    if (fields) cmd["fields"] = *fields;
    if (seed) cmd["seed"] = *seed;
    if (inequality) cmd["inequality"] = *inequality;
    if (!s_values.empty()) cmd["s"] = s_values;
    if (samples) cmd["samples"] = *samples;
    if (variant) cmd["variant"] = *variant;
    if (delta) cmd["delta"] = *delta;
    if (epsilon) cmd["epsilon"] = *epsilon;
    if (max_iters) cmd["max_iters"] = *max_iters;

    const auto config = degpop::cli::parse_config(doc);
    const int code = degpop::cli::run(config, run_dir);
    if (code != degpop::cli::kExitOk) {
      std::ifstream err(run_dir / "error.json");
      if (err) std::cerr << err.rdbuf();
    } else {
      std::cout << "wrote " << run_dir.string() << "\n";
    }
    return code;
  } catch (const std::exception& e) {
    const int code = degpop::cli::exit_code_for(e);
    std::cerr << "degpop: " << e.what() << "\n";
    try {
      degpop::cli::write_error(run_dir, e, code);
    } catch (...) {
    }
    return code;
  }
}
