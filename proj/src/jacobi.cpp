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

#include "lflow/jacobi.hpp"

#include "flow_integrator.hpp"
#include "lflow/error.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <sstream>

namespace lflow {
namespace {

const Factor& factor_at(const FlowBackground& bg, int index) {
  if (index < 0 || index >= static_cast<int>(bg.factors().size())) {
    fail(ErrorCode::InvalidArgument, "potential term refers to a missing factor");
  }
  return bg.factors()[index];
}

// Ambient differential w and second differential H of one term on its block.
void term_derivatives(const Factor& f, const PotentialTerm& term, const Vec& xb, double* value,
                      Vec* w, Mat* H) {
  const int m = f.coord_count();
  switch (term.kind) {
    case PotentialTerm::Kind::Quadratic: {
      Vec d = xb - term.center;
      for (int i = 0; i < m; ++i) d[i] -= f.lattice[i] * std::round(d[i] / f.lattice[i]);
      if (value) *value = 0.5 * term.amplitude * d.squaredNorm();
      if (w) *w = term.amplitude * d;
      if (H) *H = term.amplitude * Mat::Identity(m, m);
      return;
    }
    case PotentialTerm::Kind::Cosine: {
      Vec omega(m);
      for (int i = 0; i < m; ++i) omega[i] = 2.0 * std::numbers::pi * term.wave[i] / f.lattice[i];
      const double theta = omega.dot(xb) + term.phase;
      if (value) *value = term.amplitude * std::cos(theta);
      if (w) *w = -term.amplitude * std::sin(theta) * omega;
      if (H) *H = -term.amplitude * std::cos(theta) * omega * omega.transpose();
      return;
    }
    case PotentialTerm::Kind::Zonal: {
      const double z = term.axis.dot(xb);
      double f0 = 0.0, f1 = 0.0, f2 = 0.0;
      double p = 1.0;  // z^k
      for (std::size_t k = 0; k < term.coeffs.size(); ++k) {
        const double c = term.coeffs[k];
        f0 += c * p;
        if (k + 1 < term.coeffs.size()) {
          f1 += (k + 1) * term.coeffs[k + 1] * p;
        }
        if (k + 2 < term.coeffs.size()) {
          f2 += (k + 2) * (k + 1) * term.coeffs[k + 2] * p;
        }
        p *= z;
      }
      if (value) *value = term.amplitude * f0;
      if (w) *w = term.amplitude * f1 * term.axis;
      if (H) *H = term.amplitude * f2 * term.axis * term.axis.transpose();
      return;
    }
  }
}

Mat model_gram(const Factor& f) {
  Mat g = Mat::Identity(f.coord_count(), f.coord_count());
  if (f.kind == FactorKind::Hyperbolic) g(0, 0) = -1.0;
  return g;
}

double ricci_form(const FlowBackground& bg, const Vec& u, const Vec& v) {
  double r = 0.0;
  for (const Factor& f : bg.factors()) {
    const double k = f.curvature_sign() * (f.dim - 1);
    if (k == 0.0) continue;
    const int m = f.coord_count();
    r += k * (model_gram(f) * u.segment(f.offset, m)).dot(v.segment(f.offset, m));
  }
  return r;
}

}  // namespace

PotentialField PotentialField::quadratic(const FlowBackground& bg, double alpha,
                                         const Vec& center, int factor) {
  PotentialTerm t;
  t.kind = PotentialTerm::Kind::Quadratic;
  t.factor = factor;
  t.amplitude = alpha;
  t.center = center;
  return PotentialField().add(bg, std::move(t));
}

PotentialField PotentialField::cosine(const FlowBackground& bg, double amplitude,
                                      std::vector<int> wave, double phase, int factor) {
  PotentialTerm t;
  t.kind = PotentialTerm::Kind::Cosine;
  t.factor = factor;
  t.amplitude = amplitude;
  t.wave = std::move(wave);
  t.phase = phase;
  return PotentialField().add(bg, std::move(t));
}

PotentialField PotentialField::zonal(const FlowBackground& bg, double amplitude, const Vec& axis,
                                     std::vector<double> coeffs, int factor) {
  PotentialTerm t;
  t.kind = PotentialTerm::Kind::Zonal;
  t.factor = factor;
  t.amplitude = amplitude;
  t.axis = axis;
  t.coeffs = std::move(coeffs);
  return PotentialField().add(bg, std::move(t));
}

PotentialField& PotentialField::add(const FlowBackground& bg, PotentialTerm term) {
  const Factor& f = factor_at(bg, term.factor);
  const int m = f.coord_count();
  switch (term.kind) {
    case PotentialTerm::Kind::Quadratic:
      if (f.kind != FactorKind::Flat) {
        fail(ErrorCode::InvalidArgument, "quadratic potentials need a flat factor");
      }
      if (term.center.size() != m) fail(ErrorCode::InvalidArgument, "quadratic center size");
      break;
    case PotentialTerm::Kind::Cosine:
      if (f.kind != FactorKind::Flat) {
        fail(ErrorCode::InvalidArgument, "cosine potentials need a flat factor");
      }
      if (static_cast<int>(term.wave.size()) != m) {
        fail(ErrorCode::InvalidArgument, "cosine wave vector size");
      }
      break;
    case PotentialTerm::Kind::Zonal:
      if (term.axis.size() != m) fail(ErrorCode::InvalidArgument, "zonal axis size");
      break;
  }
  terms_.push_back(std::move(term));
  return *this;
}

double PotentialField::value(const FlowBackground& bg, const Vec& x) const {
  double total = 0.0;
  for (const PotentialTerm& t : terms_) {
    const Factor& f = factor_at(bg, t.factor);
    double v = 0.0;
    term_derivatives(f, t, x.segment(f.offset, f.coord_count()), &v, nullptr, nullptr);
    total += v;
  }
  return total;
}

Vec PotentialField::gradient(const FlowBackground& bg, const Vec& x) const {
  Vec g = Vec::Zero(bg.coord_count());
  for (const PotentialTerm& t : terms_) {
    const Factor& f = factor_at(bg, t.factor);
    const int m = f.coord_count();
    const Vec xb = x.segment(f.offset, m);
    Vec w;
    term_derivatives(f, t, xb, nullptr, &w, nullptr);
    switch (f.kind) {
      case FactorKind::Flat:
        g.segment(f.offset, m) += w;
        break;
      case FactorKind::Sphere:
        g.segment(f.offset, m) += w - w.dot(xb) * xb;
        break;
      case FactorKind::Hyperbolic: {
        Vec jw = w;
        jw[0] = -jw[0];
        g.segment(f.offset, m) += jw + w.dot(xb) * xb;
        break;
      }
    }
  }
  return g;
}

Mat PotentialField::hessian(const FlowBackground& bg, const Vec& x, const Mat& basis) const {
  Mat out = Mat::Zero(basis.cols(), basis.cols());
  for (const PotentialTerm& t : terms_) {
    const Factor& f = factor_at(bg, t.factor);
    const int m = f.coord_count();
    const Vec xb = x.segment(f.offset, m);
    Vec w;
    Mat H;
    term_derivatives(f, t, xb, nullptr, &w, &H);
    const Mat b = basis.middleRows(f.offset, m);
    // second fundamental form of the model embedding
    out += b.transpose() * H * b -
           f.curvature_sign() * w.dot(xb) * b.transpose() * model_gram(f) * b;
  }
  return out;
}

Vec PotentialField::flow_datum(const FlowBackground& bg, const Vec& x, double tau1) const {
  Vec g = gradient(bg, x);
  for (const Factor& f : bg.factors()) g.segment(f.offset, f.coord_count()) /= f.scale(tau1);
  return -0.5 * g;
}

JacobiTrack jacobi_track(const FlowBackground& bg, const LGeodesic& geo, const PotentialField& phi,
                         const JacobiOptions& opts) {
  const std::vector<double>& s = geo.path.s_nodes;
  const double tau1 = s.front() * s.front();
  if (!(tau1 > 0.0)) fail(ErrorCode::InvalidArgument, "Jacobi tracks need tau1 > 0");
  const Vec& x = geo.path.points.front();
  const Vec z = phi.flow_datum(bg, x, tau1);
  if ((geo.Z - z).norm() > 1e-6 * (1.0 + z.norm())) {
    fail(ErrorCode::InvalidArgument, "geodesic was not started with Z = -1/2 grad phi");
  }
  const int n = bg.dim();
  const std::size_t nodes = s.size();
  detail::FlowIntegrator integrator(
      bg, {opts.geodesic.atol, opts.geodesic.rtol, opts.geodesic.max_speed});
  const Mat frame0 = bg.orthonormal_frame(x, tau1);
  const detail::FlowTrajectory base = integrator.integrate(x, 2.0 * z, frame0, s);

  std::vector<Mat> Y(nodes, Mat(bg.coord_count(), n));
  std::vector<Mat> DY(nodes, Mat(bg.coord_count(), n));
  const double eps = opts.fd_step;
  for (int j = 0; j < n; ++j) {
    const Vec xp = bg.exp_model(x, eps * frame0.col(j));
    const Vec xm = bg.exp_model(x, -eps * frame0.col(j));
    const detail::FlowTrajectory tp =
        integrator.replay(xp, 2.0 * phi.flow_datum(bg, xp, tau1), s, base.steps);
    const detail::FlowTrajectory tm =
        integrator.replay(xm, 2.0 * phi.flow_datum(bg, xm, tau1), s, base.steps);
    for (std::size_t k = 0; k < nodes; ++k) {
      const Vec& p = base.points[k];
      Y[k].col(j) = bg.project(p, (tp.points[k] - tm.points[k]) / (2.0 * eps));
      DY[k].col(j) = bg.project(p, (tp.velocities[k] - tm.velocities[k]) / (2.0 * eps));
    }
  }

  JacobiTrack tr;
  tr.s_nodes = s;
  tr.points = base.points;
  tr.velocities = base.velocities;
  tr.frame = base.frames;
  tr.q = l_length_partial(geo.path, bg);
  for (std::size_t k = 0; k < nodes; ++k) {
    const double t = s[k] * s[k];
    tr.t_nodes.push_back(t);
    const Mat& e = base.frames[k];
    Mat a(n, n), da(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        a(i, j) = bg.inner(e.col(i), Y[k].col(j), t);
        da(i, j) = ricci_form(bg, e.col(i), Y[k].col(j)) +
                   bg.inner(e.col(i), DY[k].col(j), t) / (2.0 * s[k]);
        const double gram = bg.inner(e.col(i), e.col(j), t) - (i == j ? 1.0 : 0.0);
        tr.frame_error = std::max(tr.frame_error, std::abs(gram));
      }
    }
    if (k == 0) a.setIdentity();
    const double det = a.determinant();
    if (!(det > 0.0)) {
      std::ostringstream os;
      os << "det A = " << det << " is not positive at t = " << t
         << "; the scenario leaves the regular regime";
      fail(ErrorCode::Domain, os.str());
    }
    tr.A.push_back(std::move(a));
    tr.dA.push_back(std::move(da));
    tr.detA.push_back(det);
    tr.h.push_back(0.5 * n * std::log(t) + 0.5 * tr.q[k] / s[k] - std::log(det));
  }
  return tr;
}

double trace_identity_residual(const FlowBackground& bg, const JacobiTrack& track,
                               const LGeodesic& geo, int stride) {
  (void)geo;
  if (stride < 1) fail(ErrorCode::InvalidArgument, "stride must be positive");
  const std::size_t m = static_cast<std::size_t>(stride);
  const std::size_t nodes = track.s_nodes.size();
  if (nodes < 2 * m + 1) fail(ErrorCode::InvalidArgument, "track too short for the stride");
  double worst = 0.0;
  for (std::size_t k = m; k + m < nodes; ++k) {
    const double s = track.s_nodes[k];
    const double h1 = s - track.s_nodes[k - m];
    const double h2 = track.s_nodes[k + m] - s;
    const Mat a_ss = 2.0 * (h1 * track.A[k + m] + h2 * track.A[k - m] - (h1 + h2) * track.A[k]) /
                     (h1 * h2 * (h1 + h2));
    const Eigen::PartialPivLU<Mat> lu(track.A[k]);
    if (std::abs(track.detA[k]) < 1e-300) fail(ErrorCode::Numerical, "singular A on the track");
    const double t = s * s;
    // A'' + A'/(2t) = A_ss / (4t) in s = sqrt(t)
    const double lhs = 2.0 * lu.solve(a_ss).trace() / (4.0 * t);
    const Vec gp = track.velocities[k] / (2.0 * s);
    const double rhs = bg.dscal_dt(t) - 2.0 * ricci_form(bg, gp, gp) + bg.scal(t) / t;
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

double symmetry_defect(const JacobiTrack& track) {
  double worst = 0.0;
  for (std::size_t k = 0; k < track.A.size(); ++k) {
    const Mat m = track.dA[k] * track.A[k].inverse();
    worst = std::max(worst, (m - m.transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

std::vector<std::pair<double, double>> h_samples(const FlowBackground& bg, const LGeodesic& geo,
                                                 const JacobiTrack& track) {
  (void)bg;
  (void)geo;
  std::vector<std::pair<double, double>> out;
  for (std::size_t k = 0; k < track.t_nodes.size(); ++k) {
    out.emplace_back(1.0 / track.s_nodes[k], track.h[k]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double min_second_difference(const std::vector<std::pair<double, double>>& samples) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k + 1 < samples.size(); ++k) {
    const auto& [u0, h0] = samples[k - 1];
    const auto& [u1, h1] = samples[k];
    const auto& [u2, h2] = samples[k + 1];
    const double w = (u2 - u1) / (u2 - u0);
    worst = std::min(worst, 2.0 * (w * h0 + (1.0 - w) * h2 - h1));
  }
  return worst;
}

double lambda_from_times(double tau1, double tau, double tau2) {
  if (!(0.0 < tau1 && tau1 < tau && tau < tau2)) {
    std::ostringstream os;
    os << "need 0 < tau1 < tau < tau2, got " << tau1 << ", " << tau << ", " << tau2;
    fail(ErrorCode::InvalidArgument, os.str());
  }
  const double a = 1.0 / std::sqrt(tau1);
  return (a - 1.0 / std::sqrt(tau)) / (a - 1.0 / std::sqrt(tau2));
}

double tau_from_lambda(double tau1, double tau2, double lambda) {
  if (!(0.0 < lambda && lambda < 1.0)) fail(ErrorCode::InvalidArgument, "need 0 < lambda < 1");
  const double r = (1.0 - lambda) / std::sqrt(tau1) + lambda / std::sqrt(tau2);
  return 1.0 / (r * r);
}

FlowSample flow_sample(const FlowBackground& bg, const Vec& x, const PotentialField& phi,
                       double tau1, double tau, double tau2, const JacobiOptions& opts) {
  lambda_from_times(tau1, tau, tau2);
  FlowSample out;
  const std::vector<double> s =
      split_s_nodes(tau1, tau, tau2, std::max(opts.geodesic.nodes, kMinPathNodes), &out.mid);
  out.geodesic = shoot_on_nodes(bg, x, phi.flow_datum(bg, x, tau1), s, opts.geodesic);
  out.track = jacobi_track(bg, out.geodesic, phi, opts);
  return out;
}

JacobianSlack jacobian_inequality(const FlowBackground& bg, const Vec& x, const PotentialField& phi,
                                  double tau1, double tau, double tau2,
                                  const JacobiOptions& opts) {
  JacobianSlack r;
  r.lambda = lambda_from_times(tau1, tau, tau2);
  const FlowSample fs = flow_sample(bg, x, phi, tau1, tau, tau2, opts);
  r.f_tau = bg.canonical(fs.geodesic.path.points[fs.mid]);
  r.f_tau2 = bg.canonical(fs.geodesic.path.points.back());
  r.q_first = l_distance(bg, x, tau1, r.f_tau, tau, opts.geodesic).q;
  r.q_second = l_distance(bg, r.f_tau, tau, r.f_tau2, tau2, opts.geodesic).q;
  r.det_tau = fs.track.detA[fs.mid];
  r.det_tau2 = fs.track.detA.back();
  const double n = bg.dim();
  const double l = r.lambda;
  r.lhs = std::pow(tau, -0.5 * n) * std::exp(-(1.0 - l) / (2.0 * std::sqrt(tau1)) * r.q_first) *
          r.det_tau;
  r.rhs = std::pow(tau1, -0.5 * n * (1.0 - l)) * std::pow(tau2, -0.5 * n * l) *
          std::exp(-l / (2.0 * std::sqrt(tau2)) * r.q_second) * std::pow(r.det_tau2, l);
  r.slack = r.lhs - r.rhs;
  return r;
}

double jacobian_inequality_slack(const FlowBackground& bg, const Vec& x, const PotentialField& phi,
                                 double tau1, double tau, double tau2,
                                 const JacobiOptions& opts) {
  return jacobian_inequality(bg, x, phi, tau1, tau, tau2, opts).slack;
}

}  // namespace lflow
