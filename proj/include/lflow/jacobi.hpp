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

// Smooth potentials phi, L-Jacobi fields along F_t(x) = L exp_x(-1/2 grad phi)
// and the quantities built from them: the matrix A(t), det A, the function
// h(u) with u = t^{-1/2}, and the volume-distortion inequality.

#ifndef LFLOW_JACOBI_HPP
#define LFLOW_JACOBI_HPP

#include "lflow/background.hpp"
#include "lflow/lgeodesic.hpp"

#include <utility>
#include <vector>

namespace lflow {

// One term of a potential, living on a single factor. Each term is the
// restriction of an ambient function Phi of the factor's native coordinates:
//   Quadratic  amplitude/2 |x - center|^2 (flat only, nearest image)
//   Cosine     amplitude cos(2 pi sum_i wave_i x_i / L_i + phase) (flat only)
//   Zonal      amplitude sum_k coeffs[k] (axis . x)^k (Euclidean dot)
struct PotentialTerm {
  enum class Kind { Quadratic, Cosine, Zonal };
  Kind kind = Kind::Quadratic;
  int factor = 0;
  double amplitude = 0.0;
  Vec center;
  std::vector<int> wave;
  double phase = 0.0;
  Vec axis;
  std::vector<double> coeffs;
};

class PotentialField {
 public:
  PotentialField() = default;  // phi = 0

  static PotentialField quadratic(const FlowBackground& bg, double alpha, const Vec& center,
                                  int factor = 0);
  static PotentialField cosine(const FlowBackground& bg, double amplitude, std::vector<int> wave,
                               double phase = 0.0, int factor = 0);
  static PotentialField zonal(const FlowBackground& bg, double amplitude, const Vec& axis,
                              std::vector<double> coeffs, int factor = 0);

  PotentialField& add(const FlowBackground& bg, PotentialTerm term);
  const std::vector<PotentialTerm>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  double value(const FlowBackground& bg, const Vec& x) const;
  // Gradient for the unit model metric (ambient tangent vector).
  Vec gradient(const FlowBackground& bg, const Vec& x) const;
  // Hessian for the model metric evaluated on the columns of basis.
  Mat hessian(const FlowBackground& bg, const Vec& x, const Mat& basis) const;
  // Z = -1/2 grad_{g(tau1)} phi.
  Vec flow_datum(const FlowBackground& bg, const Vec& x, double tau1) const;

 private:
  std::vector<PotentialTerm> terms_;
};

struct JacobiOptions {
  double fd_step = 1e-5;  // in g(tau1)-unit lengths
  GeodesicOptions geodesic;
};

struct JacobiTrack {
  std::vector<double> s_nodes;
  std::vector<double> t_nodes;
  std::vector<Vec> points;
  std::vector<Vec> velocities;  // d gamma/ds
  std::vector<Mat> frame;       // columns e_i(t), g(t)-orthonormal
  std::vector<Mat> A;           // a_ij = <e_i, Y_j>_{g(t)}
  std::vector<Mat> dA;          // dA/dt from the covariant derivatives of Y_j
  std::vector<double> detA;
  std::vector<double> q;        // Q(x, tau1; gamma(t), t) by restriction
  std::vector<double> h;
  double frame_error = 0.0;     // max |<e_i, e_j>_{g(t)} - delta_ij|
};

JacobiTrack jacobi_track(const FlowBackground& bg, const LGeodesic& geo, const PotentialField& phi,
                         const JacobiOptions& opts = {});

// Max over nodes k with k +- stride inside the track of the defect of
//   2 tr((A'' + A'/(2t)) A^{-1})
//     = d scal/dt + 2 <grad scal, gamma'> - 2 Ric(gamma', gamma') + scal / t,
// with A-derivatives by centered differences in s over +- stride nodes.
double trace_identity_residual(const FlowBackground& bg, const JacobiTrack& track,
                               const LGeodesic& geo, int stride = 1);

// Max entry of the antisymmetric part of A'(t) A(t)^{-1} over the track.
double symmetry_defect(const JacobiTrack& track);

// (u, h(u)) pairs with u = t^{-1/2}, sorted by u.
std::vector<std::pair<double, double>> h_samples(const FlowBackground& bg, const LGeodesic& geo,
                                                 const JacobiTrack& track);

// Smallest second difference of h over consecutive triples. For uneven
// spacing this is 2 (w h_{k-1} + (1 - w) h_{k+1} - h_k) with
// w = (u_{k+1} - u_k) / (u_{k+1} - u_{k-1}), the plain second difference on
// an even grid.
double min_second_difference(const std::vector<std::pair<double, double>>& samples);

// lambda with 1/sqrt(tau) = (1 - lambda)/sqrt(tau1) + lambda/sqrt(tau2).
double lambda_from_times(double tau1, double tau, double tau2);
double tau_from_lambda(double tau1, double tau2, double lambda);

struct JacobianSlack {
  double lambda = 0.0;
  double q_first = 0.0;   // Q(x, tau1; F_tau(x), tau)
  double q_second = 0.0;  // Q(F_tau(x), tau; F(x), tau2)
  double det_tau = 0.0;
  double det_tau2 = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;     // lhs - rhs
  Vec f_tau;              // F_tau(x)
  Vec f_tau2;             // F(x)
};

//   tau^{-n/2} exp(-(1-l)/(2 sqrt tau1) Q(x,tau1;F_tau x,tau)) J(x,tau)
//     >= tau1^{-n(1-l)/2} tau2^{-n l/2}
//        exp(-l/(2 sqrt tau2) Q(F_tau x,tau;F x,tau2)) J(x,tau2)^l
JacobianSlack jacobian_inequality(const FlowBackground& bg, const Vec& x, const PotentialField& phi,
                                  double tau1, double tau, double tau2,
                                  const JacobiOptions& opts = {});
double jacobian_inequality_slack(const FlowBackground& bg, const Vec& x, const PotentialField& phi,
                                 double tau1, double tau, double tau2,
                                 const JacobiOptions& opts = {});

// F_tau(x) and the track along it on a grid that contains tau.
struct FlowSample {
  LGeodesic geodesic;
  JacobiTrack track;
  std::size_t mid = 0;  // node index of tau
};
FlowSample flow_sample(const FlowBackground& bg, const Vec& x, const PotentialField& phi,
                       double tau1, double tau, double tau2, const JacobiOptions& opts = {});

}  // namespace lflow

#endif  // LFLOW_JACOBI_HPP
