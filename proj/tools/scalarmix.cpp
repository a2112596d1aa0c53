// scalarmix: run or validate an experiment config.
//
//   scalarmix run --config exp.json --out results/ [--threads K] [--seed S]
//   scalarmix validate --config exp.json
//
// Exit codes: 0 success, 2 invalid config, 3 numerical failure, 4 other error.
// On failure `run` writes error.json into the output directory.

#include "scalarmix/experiment.hpp"
#include "scalarmix/linalg.hpp"
#include "scalarmix/parallel.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using scalarmix::ConfigError;
using ordered_json = nlohmann::ordered_json;

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kOther = 4 };

void write_error(const std::filesystem::path& out, const ordered_json& record) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  std::ofstream f(out / "error.json");
  if (f) f << record.dump(2) << '\n';
}

int fail(const std::filesystem::path& out, int code, const std::string& kind, const std::string& message,
         ordered_json details = ordered_json::object()) {
  ordered_json record = {{"status", "error"}, {"kind", kind}, {"message", message}};
  for (auto& [k, v] : details.items()) record[k] = v;
  std::cerr << "scalarmix: " << message << '\n';
  if (!out.empty()) write_error(out, record);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stationary statistics of stochastically forced passive scalars on the 2-torus"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int threads = scalarmix::default_threads();
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run an experiment and write results");
  run->add_option("--config", config_path, "Experiment config (JSON, comments allowed)")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--threads", threads, "Worker thread cap")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Override the config seed");

  auto* validate = app.add_subcommand("validate", "Validate a config without running it");
  validate->add_option("--config", config_path, "Experiment config")->required();
  validate->add_option("--seed", seed, "Override the config seed");

  CLI11_PARSE(app, argc, argv);

  const std::filesystem::path out = run->parsed() ? std::filesystem::path(out_dir) : std::filesystem::path();
  nlohmann::json config;
  try {
    config = scalarmix::load_config(config_path);
  } catch (const ConfigError& e) {
    return fail(out, kConfig, "config", e.what(), {{"errors", e.errors()}});
  }
  if (seed && config.is_object()) config["seed"] = *seed;

  if (validate->parsed()) {
    const auto report = scalarmix::validate_config(config);
    std::cout << report.format();
    return report.ok() ? kOk : kConfig;
  }

  try {
    const auto spec = scalarmix::parse_spec(config);
    const auto result = scalarmix::run_experiment(spec, out, threads);
    for (const auto& f : result.files) std::cout << f.string() << '\n';
    return kOk;
  } catch (const ConfigError& e) {
    return fail(out, kConfig, "config", e.what(), {{"errors", e.errors()}});
  } catch (const scalarmix::SolverError& e) {
    return fail(out, kNumerical, "numerical", e.what(), {{"residual", e.residual()}});
  } catch (const scalarmix::SimulationError& e) {
    return fail(out, kNumerical, "numerical", e.what());
  } catch (const std::exception& e) {
    return fail(out, kOther, "runtime", e.what());
  }
}
