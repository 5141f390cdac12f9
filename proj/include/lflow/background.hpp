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

// Closed-form solutions of dg/dt = 2 Ric on homogeneous model spaces.
//
// Every model is a product of space-form factors, each carrying the metric
// c(t) * g_model with c(t) = c0 + 2 k (d - 1) t, where k is the sign of the
// model curvature (+1 sphere, 0 flat, -1 hyperbolic) and d the factor
// dimension. Points are stored in the factor's native coordinates, which
// are concatenated across factors:
//
//   flat factor        d coordinates, identified modulo the lattice
//   sphere factor      d + 1 unit-norm embedding coordinates
//   hyperbolic factor  d + 1 hyperboloid coordinates (x0 > 0, <x,x>_M = -1)
//
// Tangent vectors use the same ambient coordinates.

#ifndef LFLOW_BACKGROUND_HPP
#define LFLOW_BACKGROUND_HPP

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace lflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ModelKind { FlatTorus, RoundSphere, HyperbolicQuotient, ProductSphereFlat };
enum class FactorKind { Flat, Sphere, Hyperbolic };
enum class Chart { Standard, Polar };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct Factor {
  FactorKind kind = FactorKind::Flat;
  int dim = 1;
  double scale0 = 1.0;
  std::vector<double> lattice;  // flat factors only
  int offset = 0;               // first native coordinate of this factor
  int chart_offset = 0;         // first chart coordinate of this factor

  int coord_count() const { return kind == FactorKind::Flat ? dim : dim + 1; }
  double curvature_sign() const;
  double rate() const { return 2.0 * curvature_sign() * (dim - 1); }
  double scale(double t) const { return scale0 + rate() * t; }
  double scal(double t) const { return curvature_sign() * dim * (dim - 1) / scale(t); }
};

struct CurvatureData {
  double scal = 0.0;
  double dscal_dt = 0.0;
  Vec grad_scal;  // chart covector components
  Mat ricci;      // chart basis
};

class FlowBackground {
 public:
  static FlowBackground flat_torus(int n, std::vector<double> lattice = {},
                                   double scale0 = 1.0, double t_max = 100.0);
  static FlowBackground round_sphere(int n, double scale0, double t_max);
  static FlowBackground hyperbolic(int n, double scale0, double t_max);
  static FlowBackground product_sphere_flat(int sphere_dim, int flat_dim, double scale0,
                                            std::vector<double> lattice, double t_max);

  ModelKind kind() const { return kind_; }
  int dim() const { return dim_; }
  int coord_count() const { return coord_count_; }
  double t_max() const { return t_max_; }
  double scale0() const { return scale0_; }
  std::span<const Factor> factors() const { return factors_; }
  bool compact() const;  // false when a hyperbolic factor is present

  double scal(double t) const;
  double dscal_dt(double t) const;
  // Density of dvol_{g(t)} against the product of unit model volumes.
  double volume_factor(double t) const;

  void check_time(double t) const;
  void check_point(const Vec& x) const;
  void check_tangent(const Vec& x, const Vec& v) const;
  // Projects sphere/hyperboloid blocks back onto the model and reduces torus
  // coordinates into [0, L).
  Vec canonical(const Vec& x) const;
  Vec retract(const Vec& x) const;  // like canonical, without torus wrapping

  double inner(const Vec& u, const Vec& v, double t) const;      // g(t)
  double inner_model(const Vec& u, const Vec& v) const;          // unit model metric
  Vec project(const Vec& x, const Vec& v) const;                 // onto T_x M
  Vec exp_model(const Vec& x, const Vec& v) const;
  // Model logarithm; flat blocks return the plain difference of the given
  // representatives (callers choose the torus translate).
  Vec log_model(const Vec& x, const Vec& y) const;
  // coord_count x dim matrix whose columns are orthonormal for the unit
  // model metric; block diagonal across factors.
  Mat tangent_basis(const Vec& x) const;
  // Same frame scaled to be orthonormal for g(t).
  Mat orthonormal_frame(const Vec& x, double t) const;
  // Apply A to the tangent vector v factorwise: out_f = a_f * v_f.
  Vec scale_by_factor(const Vec& v, const std::vector<double>& a) const;

  // Chart maps. Chart coordinates are concatenated per factor (d per factor).
  Vec to_chart(const Vec& x, Chart chart = Chart::Standard) const;
  Vec from_chart(const Vec& u, Chart chart = Chart::Standard) const;

 private:
  FlowBackground() = default;
  void finalize();

  ModelKind kind_ = ModelKind::FlatTorus;
  int dim_ = 0;
  int coord_count_ = 0;
  double scale0_ = 1.0;
  double t_max_ = 1.0;
  std::vector<Factor> factors_;
};

Mat metric_at(const FlowBackground& bg, const Vec& x, double t, Chart chart = Chart::Standard);
CurvatureData curvature_at(const FlowBackground& bg, const Vec& x, double t,
                           Chart chart = Chart::Standard);
// Gamma^k_ij stored at index [k * n * n + i * n + j].
std::vector<double> christoffel_at(const FlowBackground& bg, const Vec& x, double t,
                                   Chart chart = Chart::Standard);
double flow_residual(const FlowBackground& bg, const Vec& x, double t, double dt,
                     Chart chart = Chart::Standard);

// Partial derivatives of the chart metric: entry [l](i, j) = d g_ij / d u^l.
std::vector<Mat> metric_derivatives(const FlowBackground& bg, const Vec& x, double t,
                                    Chart chart = Chart::Standard);

}  // namespace lflow

#endif  // LFLOW_BACKGROUND_HPP
