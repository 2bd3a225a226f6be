// Exercises the shared-library C surface only: opaque handles, status
// codes, thread-local error strings, and string ownership.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <string>

#include "pel.h"

namespace fs = std::filesystem;

namespace {

std::string test_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pel_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

const char* const kTinyConfig = R"json({
  "schema": "pel-run-v1",
  "grid": {"r_max": 20.0, "n": 2048, "grading": "geometric", "ratio": 1.004},
  "scheme": {"dt": "auto"},
  "initial": {"epsilon": 0.5, "k": 4},
  "output": {"stride": 4, "checkpoint_rows": 0, "snapshot_rows": 0},
  "stop": {"t_end": 1.0e-4, "lambda_stop": 1.0e9, "resolution_margin": 1.0}
})json";

}  // namespace

TEST_CASE("schema version and argument guards") {
  CHECK(std::string(pel_schema_version()) == "pel-run-v1");

  pel_config* cfg = nullptr;
  CHECK(pel_config_parse(nullptr, &cfg) == PEL_E_INVALID_ARGUMENT);
  CHECK(pel_config_parse("{}", nullptr) == PEL_E_INVALID_ARGUMENT);
  CHECK(std::string(pel_last_error()).find("NULL") != std::string::npos);
  pel_string_free(nullptr);  // must be a safe no-op
  pel_config_free(nullptr);
}

TEST_CASE("config failures set the status code and error text") {
  pel_config* cfg = nullptr;
  CHECK(pel_config_parse("{}", &cfg) == PEL_E_CONFIG);
  CHECK(cfg == nullptr);
  CHECK(std::string(pel_last_error()).find("schema") != std::string::npos);

  CHECK(pel_config_parse(R"({"schema": "pel-run-v1"})", &cfg) ==
        PEL_E_CONFIG);
  CHECK(std::string(pel_last_error()).find("scheme.dt") != std::string::npos);

  CHECK(pel_config_load("/nonexistent/run.json", &cfg) == PEL_E_IO);
}

TEST_CASE("a config round-trips through canonical text and hash") {
  pel_config* cfg = nullptr;
  REQUIRE(pel_config_parse(kTinyConfig, &cfg) == PEL_OK);
  REQUIRE(cfg != nullptr);
  CHECK(std::string(pel_last_error()).empty());

  char* canonical = nullptr;
  REQUIRE(pel_config_canonical(cfg, &canonical) == PEL_OK);
  REQUIRE(canonical != nullptr);

  pel_config* cfg2 = nullptr;
  REQUIRE(pel_config_parse(canonical, &cfg2) == PEL_OK);
  char* hash1 = nullptr;
  char* hash2 = nullptr;
  REQUIRE(pel_config_hash(cfg, &hash1) == PEL_OK);
  REQUIRE(pel_config_hash(cfg2, &hash2) == PEL_OK);
  CHECK(std::string(hash1) == std::string(hash2));
  CHECK(std::string(hash1).size() == 16);

  pel_string_free(canonical);
  pel_string_free(hash1);
  pel_string_free(hash2);
  pel_config_free(cfg2);
  pel_config_free(cfg);
}

TEST_CASE("a run driven through the C surface produces its manifest") {
  pel_config* cfg = nullptr;
  REQUIRE(pel_config_parse(kTinyConfig, &cfg) == PEL_OK);
  const std::string dir = test_dir("run");
  char* manifest = nullptr;
  REQUIRE(pel_run(cfg, dir.c_str(), &manifest) == PEL_OK);
  REQUIRE(manifest != nullptr);
  const std::string text(manifest);
  CHECK(text.find("pel-manifest-v1") != std::string::npos);
  CHECK(text.find("\"stop_reason\": \"t_end\"") != std::string::npos);
  CHECK(fs::exists(dir + "/series.csv"));
  CHECK(fs::exists(dir + "/manifest.json"));
  CHECK(fs::exists(dir + "/final_state.pelstate"));
  pel_string_free(manifest);
  pel_config_free(cfg);
}

TEST_CASE("resume through the C surface reports io failures") {
  char* manifest = nullptr;
  CHECK(pel_resume("/nonexistent/checkpoint.pelckpt", &manifest) == PEL_E_IO);
  CHECK(manifest == nullptr);
  CHECK(std::string(pel_last_error()).size() > 0);
}

TEST_CASE("the verify entry point renders a table and a verdict") {
  pel_config* cfg = nullptr;
  REQUIRE(pel_config_parse(kTinyConfig, &cfg) == PEL_OK);
  char* table = nullptr;
  int all_passed = 0;
  REQUIRE(pel_verify(cfg, &table, &all_passed) == PEL_OK);
  REQUIRE(table != nullptr);
  CHECK(all_passed == 1);
  const std::string text(table);
  CHECK(text.find("profile-identity") != std::string::npos);
  CHECK(text.find("FAIL") == std::string::npos);
  pel_string_free(table);
  pel_config_free(cfg);
}
