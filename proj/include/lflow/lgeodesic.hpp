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

// L-length, L-geodesics, the L-exponential map and the L-distance Q.
//
// Everything is computed in s = sqrt(t), where the L-integrand becomes
//   1/2 |d gamma/ds|^2_{g(s^2)} + 2 s^2 scal_{g(s^2)}
// and t = 0 is a regular endpoint.

#ifndef LFLOW_LGEODESIC_HPP
#define LFLOW_LGEODESIC_HPP

#include "lflow/background.hpp"

#include <vector>

namespace lflow {

inline constexpr int kMinPathNodes = 17;

// Path sampled on an increasing s-grid. Torus coordinates along a path form
// a continuous lift, so consecutive points are never wrapped.
struct TimePath {
  std::vector<double> s_nodes;
  std::vector<Vec> points;
  double tau1 = 0.0;
  double tau2 = 0.0;

  std::size_t size() const { return s_nodes.size(); }
  double t(std::size_t k) const { return s_nodes[k] * s_nodes[k]; }
};

struct GeodesicOptions {
  int nodes = 129;
  int starts = 8;          // multi-start count for curved factors
  double atol = 1e-10;
  double rtol = 1e-8;
  double max_speed = 1e4;  // bound on |d gamma / ds|_{g}
  double endpoint_tol = 1e-11;
  int max_newton = 25;
};

struct LGeodesic {
  TimePath path;
  Vec Z;  // sqrt(tau1) gamma'(tau1) = 1/2 d gamma/ds at the start
  double length = 0.0;
  double stationarity_residual = 0.0;
  std::vector<Vec> velocities;  // d gamma/ds per node
};

struct DistanceResult {
  double q = 0.0;
  LGeodesic geodesic;
  int multiplicity_hint = 0;
};

std::vector<double> uniform_s_nodes(double tau1, double tau2, int count);
// Uniform in s on [sqrt(tau1), sqrt(tau_mid)] and [sqrt(tau_mid), sqrt(tau2)],
// so tau_mid is a node; returns the node index of tau_mid through mid_index.
std::vector<double> split_s_nodes(double tau1, double tau_mid, double tau2, int count,
                                  std::size_t* mid_index);

void validate_path(const TimePath& path, const FlowBackground& bg);

// Cumulative L-length at every node (first entry 0). Between consecutive
// nodes the path is taken along the model geodesic traversed at the
// L-optimal pace, so the kinetic term of an interval is
//   sum_f d_f(x_k, x_{k+1})^2 / (2 (sigma_f(s_{k+1}) - sigma_f(s_k))),
//   sigma_f(s) = int_0^s du / c_f(u^2),
// and the scalar-curvature term is integrated in closed form.
std::vector<double> l_length_partial(const TimePath& path, const FlowBackground& bg);
double l_length(const TimePath& path, const FlowBackground& bg);

// Defect of the discrete Euler-Lagrange equations of the interval action
// above: max over interior nodes of the gradient with respect to the node.
double first_variation_residual(const TimePath& path, const FlowBackground& bg);

LGeodesic shoot(const FlowBackground& bg, const Vec& x, double tau1, const Vec& Z, double tau2,
                const GeodesicOptions& opts = {});
LGeodesic shoot_on_nodes(const FlowBackground& bg, const Vec& x, const Vec& Z,
                         const std::vector<double>& s_nodes, const GeodesicOptions& opts = {});
Vec l_exp(const FlowBackground& bg, const Vec& x, double tau1, const Vec& Z, double t,
          const GeodesicOptions& opts = {});
DistanceResult l_distance(const FlowBackground& bg, const Vec& x, double tau1, const Vec& y,
                          double tau2, const GeodesicOptions& opts = {});

// sigma_f(s) for one factor, the conformal time of its kinetic term.
double conformal_time(const Factor& f, double s);
// int_0^s 2 u^2 scal(u^2) du.
double scal_action(const FlowBackground& bg, double s);

}  // namespace lflow

#endif  // LFLOW_LGEODESIC_HPP
