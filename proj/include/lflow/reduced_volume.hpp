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

#ifndef LFLOW_REDUCED_VOLUME_HPP
#define LFLOW_REDUCED_VOLUME_HPP

#include "lflow/background.hpp"
#include "lflow/lgeodesic.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace lflow {

struct ReducedVolumeOptions {
  // Quadrature cells per axis; 0 picks a count from the kernel width.
  int cells = 0;
  double resolution = 0.75;  // target cell size in kernel widths (auto mode)
  int min_cells = 16;
  int max_cells = 192;
  double budget = 1e-2;  // relative error estimate above which evaluation fails
  GeodesicOptions geodesic = [] {
    GeodesicOptions g;
    g.nodes = 33;
    return g;
  }();
};

// v(x) = tau^{-n/2} exp(-Q(p,0;x,tau) / (2 sqrt(tau)))
double v_reduced(const FlowBackground& bg, const Vec& p, const Vec& x, double tau,
                 const GeodesicOptions& opts = {});

struct KernelIntegral {
  double value = 0.0;
  double error = 0.0;  // |I_m - I_{m/2}|
  int cells = 0;
  std::size_t evaluations = 0;
};

// Integral over M, in g(t_to), of t_to^{-n/2} exp(-Q(p,t_from;x,t_to) / (2 sqrt(t_to))).
KernelIntegral kernel_integral(const FlowBackground& bg, const Vec& p, double t_from, double t_to,
                               const ReducedVolumeOptions& opts = {});

KernelIntegral reduced_volume_estimate(const FlowBackground& bg, const Vec& p, double tau,
                                       const ReducedVolumeOptions& opts = {});
double reduced_volume(const FlowBackground& bg, const Vec& p, double tau,
                      const ReducedVolumeOptions& opts = {});

// Sample points of the g(0) geodesic ball of radius sqrt(tau1) about p. The
// first 2n lie on the boundary along the frame directions.
std::vector<Vec> ball_samples(const FlowBackground& bg, const Vec& p, double tau1,
                              int sample_count, std::uint64_t seed = 1);

double estimate_N(const FlowBackground& bg, const Vec& p, double tau1, int sample_count,
                  const GeodesicOptions& opts = {});

struct ReducedVolumeCurve {
  Vec basepoint;
  std::vector<double> tau_grid;
  std::vector<double> values;
  std::vector<double> quadrature_error_estimate;
  // max over a < b of V_b - V_a - (err_a + err_b); nonpositive when monotone
  double worst_violation = 0.0;
  bool monotone = true;
};

ReducedVolumeCurve monotonicity_curve(const FlowBackground& bg, const Vec& p,
                                      const std::vector<double>& tau_grid,
                                      const ReducedVolumeOptions& opts = {});

struct Section3Row {
  double tau1 = 0.0;
  double lambda = 0.0;
  double N = 0.0;
  double mass_u1 = 0.0;
  double mass_u1_pow = 0.0;  // (int u1)^{1-lambda}
  double mass_u2 = 0.0;
  double mass_u2_pow = 0.0;  // (int u2)^lambda
  double mass_u2_error = 0.0;
  double slack = 0.0;  // V(tau) - mass_u1_pow * mass_u2_pow
};

struct Section3Options {
  int n_samples = 64;
  ReducedVolumeOptions volume;
};

struct Section3Result {
  std::vector<Section3Row> rows;
  KernelIntegral volume_tau;
  KernelIntegral volume_tau2;
  double min_slack = 0.0;
  // |mass_u1_pow - 1| strictly decreasing along the rows (rows ordered by
  // decreasing tau1)
  bool u1_trend = true;
  double u2_gap = 0.0;  // |mass_u2_pow - V(tau2)| at the smallest tau1
};

// Volume of the g(0) ball of radius r about any point, measured in g(t).
// Single-factor flat or sphere backgrounds only.
double ball_volume(const FlowBackground& bg, double r, double t);

Section3Result section3_experiment(const FlowBackground& bg, const Vec& p, double tau,
                                   double tau2, std::vector<double> tau1_list,
                                   const Section3Options& opts = {});

}  // namespace lflow

#endif  // LFLOW_REDUCED_VOLUME_HPP
