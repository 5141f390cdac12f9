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

// Stationarity system of the s-parametrized L-Lagrangian
//
//   l(s, x, x') = 1/2 |x'|^2_{g(s^2)} + 2 s^2 scal(s^2),
//
// integrated in native (ambient) coordinates. On every factor with metric
// c(t) g_model the Euler-Lagrange equation reads
//
//   D_s x' = -(dc/ds / c) x',
//
// and the scalar-curvature force vanishes because scal is constant in space.
// Optionally carries a frame e_i with D_t e_i = -Ric(e_i), i.e.
// D_s e_i = -2 s Ric(e_i), which stays g(t)-orthonormal.

#ifndef LFLOW_SRC_FLOW_INTEGRATOR_HPP
#define LFLOW_SRC_FLOW_INTEGRATOR_HPP

#include "lflow/background.hpp"

#include <vector>

namespace lflow::detail {

struct FlowTrajectory {
  std::vector<Vec> points;      // per node
  std::vector<Vec> velocities;  // d x / ds per node
  std::vector<Mat> frames;      // per node, columns e_i (empty if no frame)
  // Accepted steps (s_start, ds) in order; replaying them reproduces the
  // discrete flow map exactly, so finite differences of it are smooth in the
  // initial data.
  std::vector<std::pair<double, double>> steps;
};

struct IntegratorSettings {
  double atol = 1e-10;
  double rtol = 1e-8;
  double max_speed = 1e4;
};

class FlowIntegrator {
 public:
  FlowIntegrator(const FlowBackground& bg, IntegratorSettings settings);

  // Adaptive integration through every node of s_nodes (steps never cross a
  // node). frame0 may be empty.
  FlowTrajectory integrate(const Vec& x0, const Vec& v0, const Mat& frame0,
                           const std::vector<double>& s_nodes) const;

  // Fixed-step replay of a previously recorded step sequence.
  FlowTrajectory replay(const Vec& x0, const Vec& v0, const std::vector<double>& s_nodes,
                        const std::vector<std::pair<double, double>>& steps) const;

 private:
  const FlowBackground& bg_;
  IntegratorSettings settings_;
};

}  // namespace lflow::detail

#endif  // LFLOW_SRC_FLOW_INTEGRATOR_HPP
