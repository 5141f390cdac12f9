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

// Runs every shipped scenario and prints one line per acceptance criterion.
// Usage: acceptance <config dir>

#include "lflow/error.hpp"
#include "lflow/harness.hpp"
#include "lflow/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

using namespace lflow;

namespace {

struct Run {
  Report report;
  double seconds = 0.0;
};

using Runs = std::map<std::string, Run>;

Runs run_all(const std::vector<ScenarioConfig>& configs, int workers) {
  set_worker_count(workers);
  Runs runs;
  for (const ScenarioConfig& c : configs) {
    const auto start = std::chrono::steady_clock::now();
    Run r;
    r.report = run_scenario(c, {"all"});
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    runs[c.name] = std::move(r);
  }
  set_worker_count(0);
  return runs;
}

struct Tally {
  bool pass = true;
  int rows = 0;
  double worst = 0.0;
  bool have_worst = false;
  std::string note;

  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      if (note.empty()) note = why;
    }
  }
};

// Folds the rows named check of the listed scenarios (all scenarios if
// names is empty). Listed scenarios must carry the row.
void fold(Tally& t, const Runs& runs, const std::string& check,
          const std::vector<std::string>& names = {}) {
  auto visit = [&](const std::string& name, const Run& run, bool required) {
    const ReportRow* row = run.report.find(check);
    if (!row) {
      t.require(!required, name + " lacks " + check);
      return;
    }
    ++t.rows;
    t.require(row->pass, name + " fails " + check);
    const bool upper = row->relation == Relation::AtMost;
    if (!t.have_worst) {
      t.worst = row->measured;
      t.have_worst = true;
    } else {
      t.worst = upper ? std::max(t.worst, row->measured) : std::min(t.worst, row->measured);
    }
  };
  if (names.empty()) {
    for (const auto& [name, run] : runs) visit(name, run, false);
    return;
  }
  for (const std::string& name : names) {
    auto it = runs.find(name);
    if (it == runs.end()) {
      t.require(false, "missing scenario " + name);
      continue;
    }
    visit(name, it->second, true);
  }
}

void print(int id, const char* title, Tally t, const std::string& extra = "") {
  if (t.rows == 0) t.require(false, "no rows");
  std::printf("criterion %2d %s  %-22s rows=%d", id, t.pass ? "PASS" : "FAIL", title, t.rows);
  if (t.have_worst) std::printf(" worst=%.3e", t.worst);
  if (!extra.empty()) std::printf(" %s", extra.c_str());
  if (!t.note.empty()) std::printf(" (%s)", t.note.c_str());
  std::printf("\n");
}

double row_ms(const Runs& runs, const std::string& name, const std::string& check) {
  auto it = runs.find(name);
  if (it == runs.end()) return 0.0;
  const ReportRow* row = it->second.report.find(check);
  return row ? row->runtime_ms : 0.0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: acceptance <config dir>\n");
    return 2;
  }
  std::vector<std::string> paths;
  for (const auto& e : std::filesystem::directory_iterator(argv[1])) {
    if (e.path().extension() == ".cfg") paths.push_back(e.path().string());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<ScenarioConfig> configs;
  try {
    for (const std::string& p : paths) configs.push_back(load_scenario(p));
  } catch (const Error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  }

  const Runs serial = run_all(configs, 1);
  const Runs wide = run_all(configs, 8);
  for (const auto& [name, run] : serial) {
    std::printf("scenario %-16s %6.1f s  %s\n", name.c_str(), run.seconds,
                run.report.passed() ? "pass" : "FAIL");
  }

  const std::vector<std::string> flat = {"flat2", "flat3"};
  const std::vector<std::string> models = {"flat2", "flat3", "sphere2", "hyperbolic2", "product3"};
  const std::vector<std::string> curved = {"sphere2", "hyperbolic2"};
  bool all = true;
  auto emit = [&](int id, const char* title, const Tally& t, const std::string& extra = "") {
    Tally u = t;
    if (u.rows == 0) u.require(false, "no rows");
    all = all && u.pass;
    print(id, title, u, extra);
  };

  {
    Tally t;
    fold(t, serial, "ldist.flat_oracle", flat);
    const double s = (row_ms(serial, "flat2", "ldist.flat_oracle") +
                      row_ms(serial, "flat3", "ldist.flat_oracle")) / 1000.0;
    t.require(s < 30.0, "over 30 s");
    char buf[64];
    std::snprintf(buf, sizeof buf, "time=%.2fs", s);
    emit(1, "flat Q oracle", t, buf);
  }
  {
    Tally t;
    fold(t, serial, "ldist.stationarity", models);
    emit(2, "stationarity", t);
  }
  {
    Tally a, d;
    fold(a, serial, "ldist.additivity", models);
    fold(d, serial, "ldist.dqdt", models);
    Tally t = a;
    t.rows += d.rows;
    t.require(d.pass, d.note);
    char buf[96];
    std::snprintf(buf, sizeof buf, "additivity=%.3e dqdt=%.3e", a.worst, d.worst);
    t.have_worst = false;
    emit(3, "additivity and dQ/dt", t, buf);
  }
  {
    Tally t;
    fold(t, serial, "jacobi.detA_closed_form", flat);
    emit(4, "Jacobi closed form", t);
  }
  {
    Tally r, o;
    fold(r, serial, "jacobi.trace_identity", curved);
    fold(o, serial, "jacobi.trace_order", curved);
    Tally t = r;
    t.rows += o.rows;
    t.require(o.pass, o.note);
    char buf[96];
    std::snprintf(buf, sizeof buf, "residual=%.3e order_defect=%.3e", r.worst, o.worst);
    t.have_worst = false;
    emit(5, "trace identity", t, buf);
  }
  {
    Tally t;
    fold(t, serial, "jacobi.h_convexity");
    emit(6, "h convexity", t);
  }
  {
    Tally j, d, m;
    fold(j, serial, "corollary.jacobian_slack");
    fold(d, serial, "corollary.density_slack");
    fold(m, serial, "corollary.mass");
    Tally t = j;
    t.rows += d.rows + m.rows;
    t.require(d.pass && d.rows > 0, d.note.empty() ? "no density rows" : d.note);
    t.require(m.pass && m.rows > 0, m.note.empty() ? "no mass rows" : m.note);
    char buf[128];
    std::snprintf(buf, sizeof buf, "jacobian=%.3e density=%.3e mass=%.6f", j.worst, d.worst,
                  m.worst);
    t.have_worst = false;
    emit(7, "slacks and mass", t, buf);
  }
  {
    Tally t;
    const std::vector<std::string> names = {"theorem2_flat", "theorem2_sphere"};
    fold(t, serial, "theorem2.slack", names);
    std::string times;
    for (const std::string& n : names) {
      auto it = serial.find(n);
      if (it == serial.end()) continue;
      t.require(it->second.seconds < 300.0, n + " over 5 min");
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s%s=%.1fs", times.empty() ? "" : " ", n.c_str(),
                    it->second.seconds);
      times += buf;
    }
    emit(8, "interpolation theorem", t, times);
  }
  {
    Tally t;
    const std::vector<std::string> names = {"flat2", "sphere2"};
    fold(t, serial, "ot.cost_gap", names);
    fold(t, serial, "ot.marginals", names);
    fold(t, serial, "ot.endpoints", names);
    emit(9, "OT exactness", t);
  }
  {
    Tally f, m, s;
    fold(f, serial, "reduced_volume.flat_constancy", {"flat_regime2", "flat_regime3"});
    fold(m, serial, "reduced_volume.monotone", {"sphere2"});
    fold(s, serial, "section3.u1_trend", {"section3"});
    Tally t = f;
    t.rows += m.rows + s.rows;
    t.require(m.pass, m.note);
    t.require(s.pass, s.note);
    char buf[128];
    std::snprintf(buf, sizeof buf, "flat=%.3e monotone=%.3e u1_step=%.3e", f.worst, m.worst,
                  s.worst);
    t.have_worst = false;
    emit(10, "reduced volume", t, buf);
  }
  {
    Tally t;
    for (const auto& [name, run] : serial) {
      auto it = wide.find(name);
      ++t.rows;
      t.require(it != wide.end() && it->second.report.csv() == run.report.csv() &&
                    it->second.report.summary == run.report.summary,
                name + " differs between 1 and 8 workers");
    }
    emit(11, "determinism", t);
  }
  return all ? 0 : 1;
}
