/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "khaos/io.hpp"

namespace fs = std::filesystem;

namespace {

int khaos_cli(const std::string& args) {
  const std::string cmd = std::string(KHAOS_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("phase-by-phase pipeline through the command line") {
  TempDir dir("khaos_cli_phases");
  const auto d = dir.path.string();
  REQUIRE(khaos_cli("--seed 5 --out-dir " + d + " generate-trace --kind sinusoidal --duration 7200 --base 1000 "
                    "--amplitude 500 --noise 0.02") == 0);
  REQUIRE(khaos_cli("--out-dir " + d + " phase1 --trace " + d + "/trace.csv --m 6") == 0);
  REQUIRE(khaos_cli("--out-dir " + d + " profile --trace " + d + "/trace.csv --plan " + d +
                    "/plan.json --grid 10:120:5 --threads 2") == 0);
  REQUIRE(khaos_cli("--out-dir " + d + " fit --matrix " + d + "/matrix.json") == 0);
  for (const char* f : {"trace.csv", "plan.json", "matrix.json", "matrix.csv", "model_latency.json",
                        "model_recovery.json"}) {
    CHECK_MESSAGE(fs::exists(dir.path / f), f);
  }
  const auto plan = khaos::io::load_json<khaos::FailurePlan>(dir.path / "plan.json");
  CHECK(plan.m() == 6);
}

TEST_CASE("exit codes") {
  TempDir dir("khaos_cli_errors");
  const auto d = dir.path.string();
  CHECK(khaos_cli("") == 2);
  CHECK(khaos_cli("no-such-command") == 2);
  CHECK(khaos_cli("phase1") == 2);
  CHECK(khaos_cli("--out-dir " + d + " generate-trace --kind wobble") == 2);
  khaos::io::write_file(dir.path / "bad.csv", "time,count\n0,1\n");
  CHECK(khaos_cli("phase1 --trace " + d + "/bad.csv") == 2);
  khaos::io::write_file(dir.path / "scenario.json", R"({"name": "x", "grid": {"ci_min": 50, "ci_max": 10}})");
  CHECK(khaos_cli("--out-dir " + d + " run-experiment --scenario " + d + "/scenario.json") == 2);
  CHECK(khaos_cli("report --bundle " + d + "/missing") != 0);
}
