// Command-line front end.  Everything goes through the C API in ccr.h; this
// file owns no pricing logic.
#include <algorithm>
#include <cstdio>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "ccr.h"

namespace {

std::string preset_list() {
  std::string s;
  for (int i = 0; i < ccr_preset_count(); ++i) {
    if (i) s += ", ";
    s += ccr_preset_name(i);
  }
  return s;
}

// Exactly one of a config file and a preset name.
ccr_config* open_config(const std::string& path, const std::string& preset) {
  if (!path.empty() && !preset.empty()) {
    std::fprintf(stderr, "error: give either a config file or --preset, not both\n");
    return nullptr;
  }
  if (path.empty() && preset.empty()) {
    std::fprintf(stderr, "error: a config file or --preset is required\n");
    return nullptr;
  }
  ccr_config* config = path.empty() ? ccr_config_preset(preset.c_str())
                                    : ccr_config_load(path.c_str());
  if (!config) std::fprintf(stderr, "error: %s\n", ccr_last_error());
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterparty credit risk: close-out convention spreads and CVA"};
  app.set_version_flag("--version", ccr_version());
  app.require_subcommand(1);

  int threads = std::max(1u, std::thread::hardware_concurrency());
  std::string config_path;
  std::string preset;
  std::string out_dir = ".";

  CLI::App* run = app.add_subcommand(
      "run", "fit the configured spread sweep, write <basename>.csv and manifest");
  run->add_option("config", config_path, "run configuration (JSON file)");
  run->add_option("--preset", preset, "built-in configuration: " + preset_list());
  run->add_option("--out", out_dir, "output directory")->capture_default_str();
  run->add_option("--threads", threads, "worker threads")->capture_default_str();

  CLI::App* verify = app.add_subcommand(
      "verify", "run the invariant suites and the Monte Carlo cross-checks");
  verify->add_option("config", config_path, "run configuration (JSON file)");
  verify->add_option("--preset", preset, "built-in configuration: " + preset_list());
  verify->add_option("--threads", threads, "worker threads")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  ccr_config* config = open_config(config_path, preset);
  if (!config) return 2;

  int exit_code = 0;
  if (run->parsed()) {
    char* log = nullptr;
    const ccr_status status = ccr_run_to_directory(config, out_dir.c_str(), threads, &log);
    if (log) {
      std::fputs(log, stdout);
      ccr_string_free(log);
    }
    if (status != CCR_OK) exit_code = 1;
  } else {
    char* report = nullptr;
    int all_passed = 0;
    const ccr_status status = ccr_verify(config, threads, &report, &all_passed);
    if (report) {
      std::fputs(report, stdout);
      ccr_string_free(report);
    }
    if (status != CCR_OK) {
      std::fprintf(stderr, "error: %s\n", ccr_last_error());
      exit_code = 2;
    } else if (!all_passed) {
      exit_code = 1;
    }
  }
  ccr_config_free(config);
  return exit_code;
}
