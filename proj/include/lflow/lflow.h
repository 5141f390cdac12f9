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

/* C interface to lflow. Every call returns a status code; on failure the
 * message is available from lflow_last_error() on the calling thread. */

#ifndef LFLOW_LFLOW_H
#define LFLOW_LFLOW_H

#include <stddef.h>

#if defined(LFLOW_BUILDING)
#define LFLOW_API __attribute__((visibility("default")))
#else
#define LFLOW_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  LFLOW_OK = 0,
  LFLOW_INVALID_ARGUMENT = 1,
  LFLOW_DOMAIN = 2,
  LFLOW_NUMERICAL = 3,
  LFLOW_CONFIG = 4,
  LFLOW_IO = 5,
  LFLOW_INTERNAL = 6
} lflow_status;

typedef struct lflow_background lflow_background;
typedef struct lflow_scenario lflow_scenario;
typedef struct lflow_report lflow_report;

LFLOW_API const char* lflow_last_error(void);
LFLOW_API const char* lflow_status_name(lflow_status status);

/* Caps the worker count; 0 restores the default (LFLOW_THREADS or the
 * hardware concurrency). */
LFLOW_API void lflow_set_threads(int workers);

/* Background from the background block of a scenario file. */
LFLOW_API lflow_status lflow_background_load(const char* path, lflow_background** out);
LFLOW_API void lflow_background_free(lflow_background* bg);
LFLOW_API int lflow_background_dim(const lflow_background* bg);
LFLOW_API int lflow_background_coord_count(const lflow_background* bg);

/* Points are given either in native coordinates (coord_count values) or in
 * standard chart coordinates (dim values). */
LFLOW_API lflow_status lflow_l_distance(const lflow_background* bg, const double* x, size_t x_len,
                                        double tau1, const double* y, size_t y_len, double tau2,
                                        double* q, int* multiplicity);

/* Reduced volume along an increasing tau grid; values and errors receive
 * count entries each. monotone is set to 1 when the curve is nonincreasing
 * within the error estimates. */
LFLOW_API lflow_status lflow_reduced_volume_curve(const lflow_background* bg, const double* p,
                                                  size_t p_len, const double* taus, size_t count,
                                                  double* values, double* errors, int* monotone);

LFLOW_API lflow_status lflow_scenario_load(const char* path, lflow_scenario** out);
LFLOW_API void lflow_scenario_free(lflow_scenario* sc);
LFLOW_API const char* lflow_scenario_name(const lflow_scenario* sc);

/* suite is one of ldist, jacobi, theorem2, corollary, reduced-volume,
 * section3, ot, or all (the scenario's own list). */
LFLOW_API lflow_status lflow_run(const lflow_scenario* sc, const char* suite, lflow_report** out);
LFLOW_API void lflow_report_free(lflow_report* report);
LFLOW_API int lflow_report_passed(const lflow_report* report);
LFLOW_API size_t lflow_report_row_count(const lflow_report* report);
LFLOW_API const char* lflow_report_csv(const lflow_report* report);
LFLOW_API const char* lflow_report_summary(const lflow_report* report);
LFLOW_API const char* lflow_report_runtime(const lflow_report* report);
/* Writes <name>.csv, <name>.summary.json and <name>.runtime.csv into dir. */
LFLOW_API lflow_status lflow_report_write(const lflow_report* report, const char* dir);
/* Writes one <name>_<series>.dat file of (x, y) columns per curve. */
LFLOW_API lflow_status lflow_report_write_plotdata(const lflow_report* report, const char* dir);

/* Writes (x, y) columns to path. */
LFLOW_API lflow_status lflow_write_columns(const char* path, const double* x, const double* y,
                                           size_t count);

#ifdef __cplusplus
}
#endif

#endif /* LFLOW_LFLOW_H */
