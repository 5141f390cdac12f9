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

// Scenario files, verification suites and their reports.

#ifndef LFLOW_HARNESS_HPP
#define LFLOW_HARNESS_HPP

#include "lflow/background.hpp"
#include "lflow/jacobi.hpp"
#include "lflow/lgeodesic.hpp"
#include "lflow/reduced_volume.hpp"
#include "lflow/transport.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lflow {

struct LdistPair {
  Vec x;
  double tau1 = 0.0;
  Vec y;
  double tau2 = 0.0;
  std::optional<double> expected;
};

struct ScenarioConfig {
  std::string name;
  std::string canonical;  // normalized text, hashed into report digests
  std::shared_ptr<const FlowBackground> background;

  double tau1 = 0.0;
  double tau = 0.0;
  double tau2 = 0.0;
  std::vector<double> tau_grid;
  std::vector<double> tau1_list;
  Vec basepoint;

  PotentialField potential;
  DensityField u1;
  DensityField u2;
  bool normalize = true;
  SamplingSpec sampling;
  GeodesicOptions geodesic;
  std::map<std::string, double> tolerances;
  std::vector<std::string> suites;

  // ldist
  std::vector<LdistPair> pairs;
  int random_pairs = 0;
  int shots = 0;
  int minimizers = 0;
  double shot_speed = 0.5;
  // jacobi
  std::vector<double> alphas;
  int tracks = 4;
  // ot
  int ot_instances = 0;
  int ot_max_points = 8;
  // reduced-volume, section3
  ReducedVolumeOptions volume;
  int n_samples = 64;
};

// Throws Error(Config) with "file:line:column: field 'a.b': ..." diagnostics.
ScenarioConfig parse_scenario(const std::string& text, const std::string& origin = "<string>");
ScenarioConfig load_scenario(const std::string& path);
// Reads only the background block.
FlowBackground load_background(const std::string& path);

std::vector<std::string> known_suites();
// Names accepted in the tolerances block.
std::vector<std::string> known_checks();

enum class Relation { AtMost, AtLeast, Below };
const char* to_string(Relation r);

struct ReportRow {
  std::string check;
  std::uint64_t digest = 0;
  double measured = 0.0;
  Relation relation = Relation::AtMost;
  double threshold = 0.0;
  bool pass = false;
  double runtime_ms = 0.0;
};

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct Report {
  std::string scenario;
  std::vector<ReportRow> rows;
  std::string summary;  // JSON text
  std::vector<PlotSeries> plots;

  bool passed() const;
  const ReportRow* find(const std::string& check) const;
  std::string csv() const;          // deterministic
  std::string runtime_csv() const;  // wall-clock sidecar, not deterministic
};

// suite "all" runs the config's suite list.
Report run_scenario(const ScenarioConfig& config, const std::vector<std::string>& suites);

void write_text(const std::string& path, const std::string& text);
void write_report(const Report& report, const std::string& dir);
void write_plotdata(const Report& report, const std::string& dir);

std::uint64_t fnv1a(const std::string& text);

}  // namespace lflow

#endif  // LFLOW_HARNESS_HPP
