// Copyright 2026 The lflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "doctest.h"
#include "lflow/error.hpp"
#include "lflow/harness.hpp"
#include "lflow/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace lflow;

namespace {

const char* kFlat = R"(name: tiny
background:
  kind: flat_torus
  n: 2
  lattice: [1.0, 1.0]
  T: 10.0
times:
  tau1: 1.0
  lambda: 0.5
  tau2: 4.0
potential:
  - {family: quadratic, alpha: 0.3, center: [0.5, 0.5]}
sampling:
  quad_cells: 8
  jacobian_samples: 6
  seed: 3
suites: [ldist, jacobi]
ldist:
  pairs:
    - {x: [0.0, 0.0], tau1: 1.0, y: [0.4, 0.0], tau2: 4.0, q: 0.08}
  random_pairs: 10
  shots: 5
  minimizers: 4
jacobi:
  alphas: [0.1]
  tracks: 2
)";

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const std::size_t at = text.find(from);
  REQUIRE(at != std::string::npos);
  return text.replace(at, from.size(), to);
}

std::string config_error(const std::string& text) {
  try {
    parse_scenario(text, "tiny.cfg");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    return e.what();
  }
  FAIL("config accepted");
  return {};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("minimal flat config reports the closed-form pair") {
  const ScenarioConfig c = parse_scenario(kFlat, "tiny.cfg");
  CHECK(c.name == "tiny");
  CHECK(c.tau == doctest::Approx(16.0 / 9.0).epsilon(1e-14));
  const Report r = run_scenario(c, {"ldist"});
  const ReportRow* row = r.find("ldist.pair0");
  REQUIRE(row != nullptr);
  CHECK(row->pass);
  // |x - y|^2 / (2 (sqrt 4 - sqrt 1)) = 0.16 / 2
  CHECK(row->measured <= 1e-6);
  CHECK(r.find("ldist.flat_oracle")->pass);
  CHECK(r.passed());
}

TEST_CASE("config errors name the field and position") {
  std::string msg = config_error(replace(kFlat, "tau2: 4.0", "tau2: 0.5"));
  CHECK(msg.find("tiny.cfg:10:") != std::string::npos);
  CHECK(msg.find("times.tau2") != std::string::npos);

  msg = config_error(replace(kFlat, "seed: 3", "seed: 3\n  sead: 4"));
  CHECK(msg.find("sampling.sead") != std::string::npos);
  CHECK(msg.find("unknown") != std::string::npos);

  msg = config_error(replace(kFlat, "  seed: 3\n", ""));
  CHECK(msg.find("sampling.seed") != std::string::npos);

  msg = config_error(replace(kFlat, "kind: flat_torus", "kind: klein_bottle"));
  CHECK(msg.find("background.kind") != std::string::npos);

  msg = config_error(replace(kFlat, "[ldist, jacobi]", "[ldist, warp]"));
  CHECK(msg.find("suites") != std::string::npos);

  msg = config_error(replace(kFlat, "lattice: [1.0, 1.0]", "lattice: [1.0, -1.0]"));
  CHECK(msg.find("background.lattice") != std::string::npos);

  msg = config_error("name: [unclosed");
  CHECK(msg.find("tiny.cfg") != std::string::npos);
}

TEST_CASE("reports are independent of the worker count") {
  const ScenarioConfig c = parse_scenario(kFlat, "tiny.cfg");
  set_worker_count(1);
  const Report a = run_scenario(c, {"all"});
  set_worker_count(3);
  const Report b = run_scenario(c, {"all"});
  set_worker_count(0);
  CHECK(a.csv() == b.csv());
  CHECK(a.summary == b.summary);
  CHECK(a.csv().rfind("check,inputs_digest,measured,relation,threshold,pass\n", 0) == 0);
}

TEST_CASE("digests follow the inputs") {
  const Report a = run_scenario(parse_scenario(kFlat, "tiny.cfg"), {"ldist"});
  const Report b =
      run_scenario(parse_scenario(replace(kFlat, "seed: 3", "seed: 4"), "tiny.cfg"), {"ldist"});
  CHECK(a.find("ldist.pair0")->digest != b.find("ldist.pair0")->digest);
  CHECK(a.find("ldist.pair0")->digest != a.find("ldist.flat_oracle")->digest);
  // comments and layout do not enter the digest
  const Report c = run_scenario(
      parse_scenario(replace(kFlat, "  seed: 3", "  seed:    3  # rng"), "other.cfg"), {"ldist"});
  CHECK(a.csv() == c.csv());
}

TEST_CASE("suite exceptions become failing rows and the run continues") {
  const ScenarioConfig c = parse_scenario(kFlat, "tiny.cfg");
  // reduced volume without a tau grid
  const Report r = run_scenario(c, {"reduced-volume", "jacobi"});
  const ReportRow* err = r.find("reduced_volume.error");
  REQUIRE(err != nullptr);
  CHECK_FALSE(err->pass);
  CHECK_FALSE(r.passed());
  REQUIRE(r.find("jacobi.frame") != nullptr);
  CHECK(r.find("jacobi.frame")->pass);
  CHECK(r.summary.find("\"error\"") != std::string::npos);
  CHECK_THROWS_AS(run_scenario(c, {"warp"}), Error);
}

TEST_CASE("report and plot files") {
  const ScenarioConfig c = parse_scenario(kFlat, "tiny.cfg");
  const Report r = run_scenario(c, {"jacobi"});
  const auto dir = std::filesystem::temp_directory_path() / "lflow_test_harness";
  std::filesystem::remove_all(dir);
  write_report(r, dir.string());
  write_plotdata(r, dir.string());
  CHECK(slurp(dir / "tiny.csv") == r.csv());
  CHECK(slurp(dir / "tiny.summary.json") == r.summary);
  CHECK(std::filesystem::exists(dir / "tiny.runtime.csv"));
  CHECK(std::filesystem::exists(dir / "tiny_h.dat"));
  CHECK(std::filesystem::exists(dir / "tiny_detA.dat"));
  std::istringstream det(slurp(dir / "tiny_detA.dat"));
  std::string header;
  std::getline(det, header);
  CHECK(header == "# x y");
  double t = 0.0, v = 0.0;
  REQUIRE(static_cast<bool>(det >> t >> v));
  CHECK(t == doctest::Approx(1.0));
  CHECK(v == doctest::Approx(1.0));
  std::filesystem::remove_all(dir);
}

TEST_CASE("csv rows use fixed formatting") {
  Report r;
  r.rows.push_back({"x.y", 0xabcULL, 0.25, Relation::AtLeast, -1e-5, true, 3.0});
  r.rows.push_back({"x.z", 1ULL, 2.0, Relation::Below, 0.0, false, 0.0});
  CHECK(r.csv() ==
        "check,inputs_digest,measured,relation,threshold,pass\n"
        "x.y,0000000000000abc,2.500000000e-01,>=,-1.000000000e-05,true\n"
        "x.z,0000000000000001,2.000000000e+00,<,0.000000000e+00,false\n");
  CHECK_FALSE(r.passed());
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}
