#include "pel.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <string>
#include <utility>

#include "pel/errors.hpp"
#include "pel/run.hpp"

struct pel_config {
  pel::RunConfig cfg;
};

namespace {

thread_local std::string t_last_error;

pel_status map_code(pel::ErrorCode code) {
  switch (code) {
    case pel::ErrorCode::config:
      return PEL_E_CONFIG;
    case pel::ErrorCode::shape:
      return PEL_E_SHAPE;
    case pel::ErrorCode::resolution:
      return PEL_E_RESOLUTION;
    case pel::ErrorCode::cfl:
      return PEL_E_CFL;
    case pel::ErrorCode::nan_detected:
      return PEL_E_NAN;
    case pel::ErrorCode::tracking_lost:
      return PEL_E_TRACKING_LOST;
    case pel::ErrorCode::degenerate:
      return PEL_E_DEGENERATE;
    case pel::ErrorCode::not_ready:
      return PEL_E_NOT_READY;
    case pel::ErrorCode::unsupported:
      return PEL_E_UNSUPPORTED;
    case pel::ErrorCode::io:
      return PEL_E_IO;
    case pel::ErrorCode::invalid_argument:
      return PEL_E_INVALID_ARGUMENT;
  }
  return PEL_E_INTERNAL;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
pel_status guarded(Fn&& fn) {
  try {
    fn();
    t_last_error.clear();
    return PEL_OK;
  } catch (const pel::Error& e) {
    t_last_error = e.what();
    return map_code(e.code());
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return PEL_E_INTERNAL;
  } catch (...) {
    t_last_error = "unknown failure";
    return PEL_E_INTERNAL;
  }
}

pel_status null_argument(const char* what) {
  t_last_error = std::string(what) + " must not be NULL";
  return PEL_E_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* pel_schema_version(void) { return pel::kConfigSchema; }

const char* pel_last_error(void) { return t_last_error.c_str(); }

void pel_string_free(char* s) { std::free(s); }

pel_status pel_config_parse(const char* json_text, pel_config** out) {
  if (!json_text) return null_argument("json_text");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto cfg = std::make_unique<pel_config>();
    cfg->cfg = pel::parse_config(json_text);
    *out = cfg.release();
  });
}

pel_status pel_config_load(const char* path, pel_config** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto cfg = std::make_unique<pel_config>();
    cfg->cfg = pel::load_config(path);
    *out = cfg.release();
  });
}

void pel_config_free(pel_config* cfg) { delete cfg; }

pel_status pel_config_canonical(const pel_config* cfg, char** json_out) {
  if (!cfg) return null_argument("cfg");
  if (!json_out) return null_argument("json_out");
  *json_out = nullptr;
  return guarded(
      [&] { *json_out = dup_string(pel::canonical_config_json(cfg->cfg)); });
}

pel_status pel_config_hash(const pel_config* cfg, char** hash_out) {
  if (!cfg) return null_argument("cfg");
  if (!hash_out) return null_argument("hash_out");
  *hash_out = nullptr;
  return guarded([&] { *hash_out = dup_string(pel::config_hash(cfg->cfg)); });
}

pel_status pel_run(const pel_config* cfg, const char* out_dir,
                   char** manifest_out) {
  if (!cfg) return null_argument("cfg");
  if (!out_dir) return null_argument("out_dir");
  if (manifest_out) *manifest_out = nullptr;
  return guarded([&] {
    pel::RunResult result = pel::run_simulation(cfg->cfg, out_dir);
    if (manifest_out) *manifest_out = dup_string(result.manifest_json);
  });
}

pel_status pel_resume(const char* checkpoint_path, char** manifest_out) {
  if (!checkpoint_path) return null_argument("checkpoint_path");
  if (manifest_out) *manifest_out = nullptr;
  return guarded([&] {
    pel::RunResult result = pel::resume_run(checkpoint_path);
    if (manifest_out) *manifest_out = dup_string(result.manifest_json);
  });
}

pel_status pel_verify(const pel_config* cfg, char** table_out,
                      int* all_passed) {
  if (!cfg) return null_argument("cfg");
  if (all_passed) *all_passed = 0;
  if (table_out) *table_out = nullptr;
  return guarded([&] {
    const std::vector<pel::VerifyCheck> checks = pel::verify_suite(cfg->cfg);
    bool ok = true;
    for (const pel::VerifyCheck& c : checks) ok = ok && c.pass;
    if (table_out) *table_out = dup_string(pel::verify_table(checks));
    if (all_passed) *all_passed = ok ? 1 : 0;
  });
}

pel_status pel_sweep(const pel_config* cfg, const char* out_dir, int threads,
                     char** summary_out) {
  if (!cfg) return null_argument("cfg");
  if (!out_dir) return null_argument("out_dir");
  if (summary_out) *summary_out = nullptr;
  return guarded([&] {
    pel::SweepResult result = pel::run_sweep(cfg->cfg, out_dir, threads);
    if (summary_out) *summary_out = dup_string(result.summary_json);
  });
}

}  // extern "C"
