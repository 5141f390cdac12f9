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

// Densities, transport along F_t(x) = L exp_x(-1/2 grad phi), the
// interpolation inequalities built on it, the minimal admissible v of the
// interpolation theorem, and exact discrete optimal transport for the cost
// Q(., tau1; ., tau2).

#ifndef LFLOW_TRANSPORT_HPP
#define LFLOW_TRANSPORT_HPP

#include "lflow/background.hpp"
#include "lflow/jacobi.hpp"
#include "lflow/lgeodesic.hpp"
#include "lflow/quadrature.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace lflow {

// Factor of a product density:
//   Gaussian  periodized isotropic Gaussian exp(-|x - center|^2 / (2 sigma^2))
//             on a flat factor
//   VonMises  exp(concentration * (axis . x)) on a sphere factor
struct DensityTerm {
  enum class Kind { Gaussian, VonMises };
  Kind kind = Kind::Gaussian;
  int factor = 0;
  Vec center;
  double sigma = 1.0;
  Vec axis;
  double concentration = 0.0;
};

class DensityField {
 public:
  DensityField() = default;  // uniform, value 1
  static DensityField uniform(double value = 1.0);
  static DensityField gaussian(const FlowBackground& bg, const Vec& center, double sigma,
                               int factor = 0);
  static DensityField von_mises(const FlowBackground& bg, const Vec& axis, double concentration,
                                int factor = 0);

  DensityField& times(const FlowBackground& bg, DensityTerm term);
  DensityField& scale_by(double factor);
  double scale() const { return scale_; }
  const std::vector<DensityTerm>& terms() const { return terms_; }

  double value(const FlowBackground& bg, const Vec& x) const;
  // int u dvol_{g(t)} by the grid rule.
  double mass(const FlowBackground& bg, const QuadratureGrid& grid, double t) const;
  // Rescales so that mass(bg, grid, t) = 1.
  DensityField& normalize(const FlowBackground& bg, const QuadratureGrid& grid, double t);

 private:
  double scale_ = 1.0;
  std::vector<DensityTerm> terms_;
};

struct SamplingSpec {
  int quad_cells = 32;     // quadrature grid for masses
  int z_cells = 64;        // grid carrying the minimal admissible v
  int sample_cells = 64;   // x-samples of the forward geodesics
  double offset_radius = 0.0;  // spread of Z around -1/2 grad(guide), g(tau1) units
  int offset_steps = 0;        // offsets per side and axis
  int jacobian_samples = 64;
  unsigned long long seed = 1;
};

struct TheoremScenario {
  double tau1 = 0.0;
  double tau = 0.0;
  double tau2 = 0.0;
  DensityField u1;
  DensityField u2;
  PotentialField guide;  // centers the sampled Z
  SamplingSpec sampling;
  JacobiOptions options;
  double minimality_tol = 1e-5;
};

// Returns lambda; throws on disordered times.
double validate_scenario(const FlowBackground& bg, const TheoremScenario& sc);

struct Pushforward {
  Vec image;        // F_t(x)
  double jacobian;  // J(x, t) = det A(t)
  double value;     // u1(x) / J(x, t)
};
Pushforward pushforward_density(const FlowBackground& bg, const PotentialField& phi,
                                const DensityField& u1, double tau1, double t, const Vec& x,
                                const JacobiOptions& opts = {});

struct DensitySlack {
  JacobianSlack jacobian;
  double u_tau = 0.0;  // u(F_tau(x)) = u1(x) / J(x, tau)
  double u2 = 0.0;     // u2(F(x)) = u1(x) / J(x, tau2)
  double lhs = 0.0;    // (tau / (tau1^{1-l} tau2^l))^{n/2} u(F_tau x)
  double rhs = 0.0;
  double slack = 0.0;  // rhs - lhs
  double v_min = 0.0;  // smallest v(F_tau x) allowed by the hypothesis
};
// u2 is the pushforward of u1 under F = F_{tau2}.
DensitySlack density_inequality(const FlowBackground& bg, const TheoremScenario& sc,
                                const PotentialField& phi, const Vec& x);
double density_inequality_slack(const FlowBackground& bg, const TheoremScenario& sc,
                                const PotentialField& phi, const Vec& x);

// int v dvol_{g(tau)} for the minimal v along F_t, by the change of variables
// z = F_tau(x) over the quadrature grid of x.
double corollary_mass(const FlowBackground& bg, const TheoremScenario& sc,
                      const PotentialField& phi);
// Grid quadrature of a supplied v.
double corollary_mass(const FlowBackground& bg, const QuadratureGrid& grid,
                      const std::vector<double>& v, double tau);

struct GeodesicSample {
  Vec x;
  Vec Z;
};
std::vector<GeodesicSample> forward_samples(const FlowBackground& bg, const TheoremScenario& sc);

struct AdmissibleV {
  QuadratureGrid grid;
  std::vector<double> values;  // per z-cell, 0 where never hit
  std::vector<int> hits;
  std::size_t used = 0;
  std::size_t dropped = 0;     // failed the minimality check
  std::size_t skipped = 0;     // zero candidates (no check needed)
};
AdmissibleV minimal_admissible_v(const FlowBackground& bg, const TheoremScenario& sc,
                                 const std::vector<GeodesicSample>& samples);

// (tau1^{1-l} tau2^l / tau)^{n/2} exp(-(1-l)/(2 sqrt tau1) q1) u1^{1-l}
//   exp(l/(2 sqrt tau2) q2) u2^l
double admissible_candidate(int n, double tau1, double tau, double tau2, double q1, double q2,
                            double u1, double u2);

// m_v - m1^{1-l} m2^l
double interpolation_slack(double mass_v, double mass_u1, double mass_u2, double lambda);

struct Theorem2Result {
  double lambda = 0.0;
  double mass_v = 0.0;
  double mass_u1 = 0.0;
  double mass_u2 = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  std::size_t samples_used = 0;
  std::size_t samples_dropped = 0;
  std::size_t cells_hit = 0;
  std::size_t cells_total = 0;
};
Theorem2Result theorem2_check(const FlowBackground& bg, const TheoremScenario& sc);

Mat cost_matrix(const FlowBackground& bg, const std::vector<Vec>& pts1, double tau1,
                const std::vector<Vec>& pts2, double tau2, const GeodesicOptions& opts = {});

struct TransportPlan {
  std::vector<Vec> source_points;
  std::vector<Vec> target_points;
  std::vector<double> source_weights;
  std::vector<double> target_weights;
  Mat weights;  // coupling
  Mat costs;
  double cost = 0.0;
};

// Exact optimal coupling by successive shortest paths with reduced costs.
TransportPlan solve_discrete_ot(const Mat& cost, const std::vector<double>& w1,
                                const std::vector<double>& w2);
TransportPlan transport_plan(const FlowBackground& bg, const std::vector<Vec>& pts1,
                             const std::vector<double>& w1, double tau1,
                             const std::vector<Vec>& pts2, const std::vector<double>& w2,
                             double tau2, const GeodesicOptions& opts = {});
double marginal_error(const TransportPlan& plan);

struct WeightedPoints {
  std::vector<Vec> points;
  std::vector<double> weights;
};
WeightedPoints interpolate_plan(const FlowBackground& bg, const TransportPlan& plan, double tau1,
                                double tau, double tau2, const GeodesicOptions& opts = {});

}  // namespace lflow

#endif  // LFLOW_TRANSPORT_HPP
