#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcsec/config.hpp"
#include "mcsec/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int do_run(const std::string& config_path, long seed_flag, bool have_seed,
           const std::vector<std::string>& overrides,
           const std::string& out_flag) {
  std::vector<mcsec::Diagnostic> issues;
  mcsec::ConfigFile raw;
  try {
    raw = mcsec::ConfigFile::parse_file(config_path, issues);
    for (const std::string& ov : overrides) raw.apply_override(ov);
  } catch (const mcsec::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  mcsec::ResolvedConfig cfg = mcsec::resolve_config(raw, issues);
  if (!issues.empty()) {
    for (const auto& d : issues)
      std::cerr << "config error: " << d.format() << "\n";
    return kExitConfig;
  }
  if (have_seed) cfg.seed = seed_flag;
  if (!out_flag.empty()) cfg.out_dir = out_flag;

  try {
    const std::vector<std::string> artifacts =
        mcsec::run_experiment(cfg, config_path);
    for (const std::string& a : artifacts)
      std::cout << "artifact " << cfg.out_dir << "/" << a << "\n";
    return kExitOk;
  } catch (const mcsec::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mcsec::TargetNotBracketedError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const mcsec::SingularMatrixError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const mcsec::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    // Bad dimension combinations surface here from SystemDims::validate.
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
}

int do_validate(const std::string& config_path) {
  std::vector<mcsec::Diagnostic> issues;
  mcsec::ConfigFile raw;
  try {
    raw = mcsec::ConfigFile::parse_file(config_path, issues);
  } catch (const mcsec::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  (void)mcsec::resolve_config(raw, issues);
  for (const auto& d : issues) std::cout << d.format() << "\n";
  std::cout << issues.size() << (issues.size() == 1 ? " issue" : " issues")
            << "\n";
  return issues.empty() ? kExitOk : kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "mcsec — robust secure multicast MIMO transceiver experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mcsec::build_version());

  std::string run_config;
  long seed = 0;
  bool have_seed = false;
  std::vector<std::string> overrides;
  std::string out_dir;

  CLI::App* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", run_config, "config file path")->required();
  run->add_option("--seed", seed, "override [run] seed")
      ->each([&](const std::string&) { have_seed = true; });
  run->add_option("--set", overrides,
                  "override one key: section.key=value (repeatable)");
  run->add_option("--out", out_dir, "override [run] out directory");

  std::string validate_config;
  CLI::App* validate =
      app.add_subcommand("validate", "schema-check a config and list issues");
  validate->add_option("config", validate_config, "config file path")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  if (run->parsed())
    return do_run(run_config, seed, have_seed, overrides, out_dir);
  return do_validate(validate_config);
}
