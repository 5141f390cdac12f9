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

#include "lflow/lflow.h"

#include "lflow/error.hpp"
#include "lflow/harness.hpp"
#include "lflow/parallel.hpp"

#include <cstdio>
#include <memory>
#include <new>
#include <string>

struct lflow_background {
  lflow::FlowBackground bg;
};

struct lflow_scenario {
  lflow::ScenarioConfig config;
};

struct lflow_report {
  lflow::Report report;
  std::string csv;
  std::string runtime;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
lflow_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return LFLOW_OK;
  } catch (const lflow::Error& e) {
    g_last_error = e.what();
    return static_cast<lflow_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return LFLOW_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) lflow::fail(lflow::ErrorCode::InvalidArgument, what);
}

lflow::Vec point(const lflow::FlowBackground& bg, const double* data, size_t len) {
  require(data != nullptr, "null point");
  const lflow::Vec v = Eigen::Map<const lflow::Vec>(data, static_cast<Eigen::Index>(len));
  if (static_cast<int>(len) == bg.coord_count()) {
    bg.check_point(v);
    return v;
  }
  if (static_cast<int>(len) == bg.dim()) return bg.from_chart(v);
  lflow::fail(lflow::ErrorCode::InvalidArgument,
              "point has " + std::to_string(len) + " coordinates, expected " +
                  std::to_string(bg.coord_count()) + " (native) or " + std::to_string(bg.dim()) +
                  " (chart)");
}

}  // namespace

extern "C" {

const char* lflow_last_error(void) { return g_last_error.c_str(); }

const char* lflow_status_name(lflow_status status) {
  switch (status) {
    case LFLOW_OK: return "ok";
    case LFLOW_INVALID_ARGUMENT: return "invalid argument";
    case LFLOW_DOMAIN: return "domain error";
    case LFLOW_NUMERICAL: return "numerical failure";
    case LFLOW_CONFIG: return "configuration error";
    case LFLOW_IO: return "i/o error";
    case LFLOW_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void lflow_set_threads(int workers) { lflow::set_worker_count(workers); }

lflow_status lflow_background_load(const char* path, lflow_background** out) {
  return guard([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new lflow_background{lflow::load_background(path)};
  });
}

void lflow_background_free(lflow_background* bg) { delete bg; }

int lflow_background_dim(const lflow_background* bg) { return bg ? bg->bg.dim() : 0; }

int lflow_background_coord_count(const lflow_background* bg) {
  return bg ? bg->bg.coord_count() : 0;
}

lflow_status lflow_l_distance(const lflow_background* bg, const double* x, size_t x_len,
                              double tau1, const double* y, size_t y_len, double tau2, double* q,
                              int* multiplicity) {
  return guard([&] {
    require(bg != nullptr && q != nullptr, "null argument");
    const lflow::DistanceResult r =
        lflow::l_distance(bg->bg, point(bg->bg, x, x_len), tau1, point(bg->bg, y, y_len), tau2);
    *q = r.q;
    if (multiplicity) *multiplicity = r.multiplicity_hint;
  });
}

lflow_status lflow_reduced_volume_curve(const lflow_background* bg, const double* p, size_t p_len,
                                        const double* taus, size_t count, double* values,
                                        double* errors, int* monotone) {
  return guard([&] {
    require(bg != nullptr && taus != nullptr && values != nullptr && errors != nullptr,
            "null argument");
    const std::vector<double> grid(taus, taus + count);
    const lflow::ReducedVolumeCurve c =
        lflow::monotonicity_curve(bg->bg, point(bg->bg, p, p_len), grid);
    for (size_t i = 0; i < count; ++i) {
      values[i] = c.values[i];
      errors[i] = c.quadrature_error_estimate[i];
    }
    if (monotone) *monotone = c.monotone ? 1 : 0;
  });
}

lflow_status lflow_scenario_load(const char* path, lflow_scenario** out) {
  return guard([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new lflow_scenario{lflow::load_scenario(path)};
  });
}

void lflow_scenario_free(lflow_scenario* sc) { delete sc; }

const char* lflow_scenario_name(const lflow_scenario* sc) {
  return sc ? sc->config.name.c_str() : "";
}

lflow_status lflow_run(const lflow_scenario* sc, const char* suite, lflow_report** out) {
  return guard([&] {
    require(sc != nullptr && suite != nullptr && out != nullptr, "null argument");
    auto r = std::make_unique<lflow_report>();
    r->report = lflow::run_scenario(sc->config, {suite});
    r->csv = r->report.csv();
    r->runtime = r->report.runtime_csv();
    *out = r.release();
  });
}

void lflow_report_free(lflow_report* report) { delete report; }

int lflow_report_passed(const lflow_report* report) {
  return report && report->report.passed() ? 1 : 0;
}

size_t lflow_report_row_count(const lflow_report* report) {
  return report ? report->report.rows.size() : 0;
}

const char* lflow_report_csv(const lflow_report* report) {
  return report ? report->csv.c_str() : "";
}

const char* lflow_report_summary(const lflow_report* report) {
  return report ? report->report.summary.c_str() : "";
}

const char* lflow_report_runtime(const lflow_report* report) {
  return report ? report->runtime.c_str() : "";
}

lflow_status lflow_report_write(const lflow_report* report, const char* dir) {
  return guard([&] {
    require(report != nullptr && dir != nullptr, "null argument");
    lflow::write_report(report->report, dir);
  });
}

lflow_status lflow_report_write_plotdata(const lflow_report* report, const char* dir) {
  return guard([&] {
    require(report != nullptr && dir != nullptr, "null argument");
    lflow::write_plotdata(report->report, dir);
  });
}

lflow_status lflow_write_columns(const char* path, const double* x, const double* y, size_t count) {
  return guard([&] {
    require(path != nullptr && (count == 0 || (x != nullptr && y != nullptr)), "null argument");
    std::string text = "# x y\n";
    for (size_t i = 0; i < count; ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.12e %.12e\n", x[i], y[i]);
      text += buf;
    }
    lflow::write_text(path, text);
  });
}

}  // extern "C"
