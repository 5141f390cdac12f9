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

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kChecksFailed = 1;
constexpr int kUsage = 2;
constexpr int kRuntime = 3;

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw CLI::ValidationError(std::string(what) + ": '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  if (out.empty()) throw CLI::ValidationError(std::string(what) + ": empty list");
  return out;
}

int report_error(lflow_status status) {
  std::cerr << "lflow: " << lflow_status_name(status) << ": " << lflow_last_error() << "\n";
  return kRuntime;
}

int run_suite(const std::string& config, const std::string& suite, const std::string& out_dir,
              const std::string& plot_dir) {
  lflow_scenario* sc = nullptr;
  if (lflow_status st = lflow_scenario_load(config.c_str(), &sc); st != LFLOW_OK) {
    return report_error(st);
  }
  lflow_report* rep = nullptr;
  lflow_status st = lflow_run(sc, suite.c_str(), &rep);
  lflow_scenario_free(sc);
  if (st != LFLOW_OK) return report_error(st);
  if (out_dir.empty()) {
    std::cout << lflow_report_csv(rep);
  } else if ((st = lflow_report_write(rep, out_dir.c_str())) != LFLOW_OK) {
    lflow_report_free(rep);
    return report_error(st);
  }
  if (!plot_dir.empty() && (st = lflow_report_write_plotdata(rep, plot_dir.c_str())) != LFLOW_OK) {
    lflow_report_free(rep);
    return report_error(st);
  }
  const bool passed = lflow_report_passed(rep) != 0;
  std::cerr << (passed ? "all " : "some ") << "checks " << (passed ? "passed" : "failed") << " ("
            << lflow_report_row_count(rep) << " rows)\n";
  lflow_report_free(rep);
  return passed ? 0 : kChecksFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical checks of L-geometry on backward Ricci flow model spaces", "lflow"};
  app.require_subcommand(1);

  std::string bg_file, config, suite, out_dir, plot_dir, x_text, y_text, p_text, grid_text;
  double tau1 = 0.0, tau2 = 0.0;

  auto* ldist = app.add_subcommand("ldist", "print the L-distance Q(x, tau1; y, tau2)");
  ldist->add_option("x", x_text, "start point, comma separated")->required();
  ldist->add_option("tau1", tau1, "start time")->required();
  ldist->add_option("y", y_text, "end point, comma separated")->required();
  ldist->add_option("tau2", tau2, "end time")->required();
  ldist->add_option("--bg", bg_file, "scenario file providing the background")->required();

  auto* rv = app.add_subcommand("reduced-volume", "reduced volume curve about a point");
  rv->add_option("--bg", bg_file, "scenario file providing the background")->required();
  rv->add_option("--p", p_text, "basepoint, comma separated")->required();
  rv->add_option("--tau-grid", grid_text, "increasing times, comma separated")->required();
  auto* rv_plot = rv->add_option("--emit-plotdata", plot_dir,
                                   "write (x, y) column files (default: --out or .)")
                   ->expected(0, 1);

  auto* verify = app.add_subcommand("verify", "run a verification suite");
  verify->add_option("--suite", suite, "ldist, jacobi, theorem2, corollary, reduced-volume, "
                                       "section3, ot or all")
      ->required();
  verify->add_option("--config", config, "scenario file")->required();
  verify->add_option("--out", out_dir, "directory for the report files (default: CSV to stdout)");
  auto* verify_plot = verify->add_option("--emit-plotdata", plot_dir,
                                   "write (x, y) column files (default: --out or .)")
                   ->expected(0, 1);

  auto* s3 = app.add_subcommand("section3", "small-ball limit of the interpolation inequality");
  s3->add_option("--config", config, "scenario file")->required();
  s3->add_option("--out", out_dir, "directory for the report files (default: CSV to stdout)");
  auto* s3_plot = s3->add_option("--emit-plotdata", plot_dir,
                                   "write (x, y) column files (default: --out or .)")
                   ->expected(0, 1);

  if (argc <= 1) {
    std::cerr << app.help();
    return kUsage;
  }
  if (const std::string first = argv[1]; !first.empty() && first[0] != '-') {
    try {
      (void)app.get_subcommand(first);
    } catch (const CLI::OptionNotFound&) {
      std::cerr << "lflow: unknown subcommand '" << first << "'\n\n" << app.help();
      return kUsage;
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "lflow: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  for (CLI::Option* o : {rv_plot, verify_plot, s3_plot}) {
    if (o->count() > 0 && plot_dir.empty()) plot_dir = out_dir.empty() ? "." : out_dir;
  }

  try {
    if (*ldist) {
      lflow_background* bg = nullptr;
      if (lflow_status st = lflow_background_load(bg_file.c_str(), &bg); st != LFLOW_OK) {
        return report_error(st);
      }
      const std::vector<double> x = parse_list(x_text, "x");
      const std::vector<double> y = parse_list(y_text, "y");
      double q = 0.0;
      const lflow_status st =
          lflow_l_distance(bg, x.data(), x.size(), tau1, y.data(), y.size(), tau2, &q, nullptr);
      lflow_background_free(bg);
      if (st != LFLOW_OK) return report_error(st);
      std::printf("%.6f\n", q);
      return 0;
    }
    if (*rv) {
      const std::vector<double> p = parse_list(p_text, "--p");
      const std::vector<double> grid = parse_list(grid_text, "--tau-grid");
      lflow_background* bg = nullptr;
      if (lflow_status st = lflow_background_load(bg_file.c_str(), &bg); st != LFLOW_OK) {
        return report_error(st);
      }
      std::vector<double> values(grid.size()), errors(grid.size());
      int monotone = 0;
      const lflow_status st = lflow_reduced_volume_curve(bg, p.data(), p.size(), grid.data(),
                                                         grid.size(), values.data(),
                                                         errors.data(), &monotone);
      lflow_background_free(bg);
      if (st != LFLOW_OK) return report_error(st);
      std::printf("tau,reduced_volume,error_estimate\n");
      for (std::size_t i = 0; i < grid.size(); ++i) {
        std::printf("%.9e,%.9e,%.9e\n", grid[i], values[i], errors[i]);
      }
      std::fprintf(stderr, "monotone within error estimates: %s\n", monotone ? "yes" : "no");
      if (!plot_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(plot_dir, ec);
        const std::string path = (std::filesystem::path(plot_dir) / "reduced_volume.dat").string();
        if (lflow_status w = lflow_write_columns(path.c_str(), grid.data(), values.data(), grid.size());
            w != LFLOW_OK) {
          return report_error(w);
        }
      }
      return monotone ? 0 : kChecksFailed;
    }
    if (*verify) return run_suite(config, suite, out_dir, plot_dir);
    if (*s3) return run_suite(config, "section3", out_dir, plot_dir);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "lflow: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }
  std::cerr << app.help();
  return kUsage;
}
