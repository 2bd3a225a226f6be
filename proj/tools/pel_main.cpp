// Command-line front end. Talks to the library exclusively through the
// C interface in pel.h so it exercises the same surface as any external
// embedding.

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "pel.h"

namespace {

int report_failure(pel_status status) {
  std::fprintf(stderr, "error (status %d): %s\n", static_cast<int>(status),
               pel_last_error());
  return 2;
}

struct ConfigHandle {
  pel_config* cfg = nullptr;
  ~ConfigHandle() { pel_config_free(cfg); }
};

struct StringHandle {
  char* s = nullptr;
  ~StringHandle() { pel_string_free(s); }
};

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  ConfigHandle cfg;
  pel_status status = pel_config_load(config_path.c_str(), &cfg.cfg);
  if (status != PEL_OK) return report_failure(status);
  StringHandle manifest;
  status = pel_run(cfg.cfg, out_dir.c_str(), &manifest.s);
  if (status != PEL_OK) return report_failure(status);
  std::fputs(manifest.s ? manifest.s : "", stdout);
  return 0;
}

int cmd_verify(const std::string& config_path) {
  ConfigHandle cfg;
  pel_status status = pel_config_load(config_path.c_str(), &cfg.cfg);
  if (status != PEL_OK) return report_failure(status);
  StringHandle table;
  int all_passed = 0;
  status = pel_verify(cfg.cfg, &table.s, &all_passed);
  if (status != PEL_OK) return report_failure(status);
  std::fputs(table.s ? table.s : "", stdout);
  return all_passed ? 0 : 3;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              int threads) {
  ConfigHandle cfg;
  pel_status status = pel_config_load(config_path.c_str(), &cfg.cfg);
  if (status != PEL_OK) return report_failure(status);
  StringHandle summary;
  status = pel_sweep(cfg.cfg, out_dir.c_str(), threads, &summary.s);
  if (status != PEL_OK) return report_failure(status);
  std::fputs(summary.s ? summary.s : "", stdout);
  return 0;
}

int cmd_resume(const std::string& checkpoint_path) {
  StringHandle manifest;
  pel_status status = pel_resume(checkpoint_path.c_str(), &manifest.s);
  if (status != PEL_OK) return report_failure(status);
  std::fputs(manifest.s ? manifest.s : "", stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Coupled velocity / equivariant director simulator and diagnostics"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::string checkpoint_path;
  int threads = 1;

  CLI::App* run =
      app.add_subcommand("run", "Drive one trajectory and write its reports");
  run->add_option("-c,--config", config_path, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("-o,--out", out_dir, "output directory (default: out)");

  CLI::App* verify = app.add_subcommand(
      "verify", "Run the invariant suite for a config (exit 3 on failure)");
  verify->add_option("-c,--config", config_path, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* sweep =
      app.add_subcommand("sweep", "Cartesian sweep over the config's axes");
  sweep->add_option("-c,--config", config_path, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("-o,--out", out_dir, "output directory (default: out)");
  sweep->add_option("-j,--threads", threads, "worker threads (default: 1)")
      ->check(CLI::PositiveNumber);

  CLI::App* resume =
      app.add_subcommand("resume", "Continue a run from its checkpoint");
  resume->add_option("checkpoint", checkpoint_path, "checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(config_path, out_dir);
  if (verify->parsed()) return cmd_verify(config_path);
  if (sweep->parsed()) return cmd_sweep(config_path, out_dir, threads);
  if (resume->parsed()) return cmd_resume(checkpoint_path);
  return 0;
}
