/*
 * Copyright 2026 The lflow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* Exercises the C interface from plain C. Usage: test_capi <config dir> */

#include "lflow/lflow.h"

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                               \
  do {                                                             \
    if (!(cond)) {                                                 \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                  \
    }                                                              \
  } while (0)

static void path_join(char* out, size_t size, const char* dir, const char* name) {
  snprintf(out, size, "%s/%s", dir, name);
}

int main(int argc, char** argv) {
  char path[4096];
  lflow_background* bg = NULL;
  lflow_scenario* sc = NULL;
  lflow_report* rep = NULL;
  lflow_report* rep8 = NULL;
  double x[2] = {0.0, 0.0}, y[2] = {0.4, 0.0};
  double q = 0.0;
  int mult = 0;

  if (argc != 2) {
    fprintf(stderr, "usage: test_capi <config dir>\n");
    return 2;
  }

  EXPECT(strcmp(lflow_status_name(LFLOW_OK), "ok") == 0);
  EXPECT(lflow_background_load("/nonexistent/x.cfg", &bg) == LFLOW_IO);
  EXPECT(bg == NULL);
  EXPECT(strlen(lflow_last_error()) > 0);

  path_join(path, sizeof path, argv[1], "flat2.cfg");
  EXPECT(lflow_background_load(path, &bg) == LFLOW_OK);
  EXPECT(lflow_background_dim(bg) == 2);
  EXPECT(lflow_background_coord_count(bg) == 2);

  /* |x - y|^2 / (2 (sqrt 4 - sqrt 1)) = 0.08 */
  EXPECT(lflow_l_distance(bg, x, 2, 1.0, y, 2, 4.0, &q, &mult) == LFLOW_OK);
  EXPECT(fabs(q - 0.08) < 1e-9);
  EXPECT(mult == 1);
  EXPECT(lflow_l_distance(bg, x, 2, 4.0, y, 2, 1.0, &q, NULL) == LFLOW_INVALID_ARGUMENT);
  EXPECT(lflow_l_distance(bg, x, 2, 1.0, y, 2, 40.0, &q, NULL) == LFLOW_DOMAIN);
  EXPECT(lflow_l_distance(bg, x, 3, 1.0, y, 2, 4.0, &q, NULL) == LFLOW_INVALID_ARGUMENT);
  EXPECT(lflow_l_distance(NULL, x, 2, 1.0, y, 2, 4.0, &q, NULL) == LFLOW_INVALID_ARGUMENT);
  lflow_background_free(bg);
  lflow_background_free(NULL);

  path_join(path, sizeof path, argv[1], "flat_regime2.cfg");
  EXPECT(lflow_background_load(path, &bg) == LFLOW_OK);
  {
    double p[2] = {15.0, 15.0}, taus[2] = {0.5, 1.0}, values[2], errors[2];
    int monotone = 0;
    const double flat = 4.0 * acos(-1.0);
    EXPECT(lflow_reduced_volume_curve(bg, p, 2, taus, 2, values, errors, &monotone) == LFLOW_OK);
    EXPECT(fabs(values[0] / flat - 1.0) < 1e-3);
    EXPECT(fabs(values[1] / flat - 1.0) < 1e-3);
    EXPECT(monotone == 1);
    taus[1] = 0.25;
    EXPECT(lflow_reduced_volume_curve(bg, p, 2, taus, 2, values, errors, &monotone) ==
           LFLOW_INVALID_ARGUMENT);
  }
  lflow_background_free(bg);

  path_join(path, sizeof path, argv[1], "flat2.cfg");
  EXPECT(lflow_scenario_load(path, &sc) == LFLOW_OK);
  EXPECT(strcmp(lflow_scenario_name(sc), "flat2") == 0);
  EXPECT(lflow_run(sc, "warp", &rep) == LFLOW_INVALID_ARGUMENT);
  lflow_set_threads(1);
  EXPECT(lflow_run(sc, "ldist", &rep) == LFLOW_OK);
  lflow_set_threads(8);
  EXPECT(lflow_run(sc, "ldist", &rep8) == LFLOW_OK);
  lflow_set_threads(0);
  EXPECT(lflow_report_passed(rep) == 1);
  EXPECT(lflow_report_row_count(rep) == 6);
  EXPECT(strncmp(lflow_report_csv(rep), "check,inputs_digest,measured,relation,threshold,pass\n",
                 53) == 0);
  EXPECT(strcmp(lflow_report_csv(rep), lflow_report_csv(rep8)) == 0);
  EXPECT(strcmp(lflow_report_summary(rep), lflow_report_summary(rep8)) == 0);
  EXPECT(strstr(lflow_report_runtime(rep), "runtime_ms") != NULL);
  lflow_report_free(rep);
  lflow_report_free(rep8);
  lflow_scenario_free(sc);

  EXPECT(lflow_scenario_load("/nonexistent/x.cfg", &sc) == LFLOW_IO);
  {
    FILE* f = fopen("capi_bad.cfg", "w");
    fputs("name: bad\nbackground: {kind: flat_torus, n: 2, T: 1}\nwhat: 1\n", f);
    fclose(f);
    EXPECT(lflow_scenario_load("capi_bad.cfg", &sc) == LFLOW_CONFIG);
    EXPECT(strstr(lflow_last_error(), "what") != NULL);
    remove("capi_bad.cfg");
  }
  {
    double xs[2] = {0.0, 1.0}, ys[2] = {2.0, 3.0};
    EXPECT(lflow_write_columns("capi_cols.dat", xs, ys, 2) == LFLOW_OK);
    remove("capi_cols.dat");
  }

  if (failures) fprintf(stderr, "%d failures\n", failures);
  return failures ? 1 : 0;
}
