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

#include "lflow/lgeodesic.hpp"

#include "flow_integrator.hpp"
#include "lflow/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace lflow {
namespace {

// Model logarithm of one factor block; flat blocks use the given lift.
Vec block_log(const Factor& f, const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& y) {
  switch (f.kind) {
    case FactorKind::Flat:
      return y - x;
    case FactorKind::Sphere: {
      const double cs = x.dot(y);
      const Vec w = y - cs * x;
      const double sn = w.norm();
      if (sn < 1e-300) {
        if (cs < 0.0) fail(ErrorCode::Numerical, "consecutive path nodes are antipodal");
        return Vec::Zero(x.size());
      }
      return (std::atan2(sn, cs) / sn) * w;
    }
    case FactorKind::Hyperbolic: {
      const double ip = -x[0] * y[0] + x.tail(x.size() - 1).dot(y.tail(y.size() - 1));
      const Vec w = y + ip * x;
      const double ww = -w[0] * w[0] + w.tail(w.size() - 1).squaredNorm();
      const double sn = std::sqrt(std::max(ww, 0.0));
      if (sn < 1e-300) return Vec::Zero(x.size());
      return (std::asinh(sn) / sn) * w;
    }
  }
  return Vec();
}

double block_dist2(const Factor& f, const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& y) {
  switch (f.kind) {
    case FactorKind::Flat:
      return (y - x).squaredNorm();
    case FactorKind::Sphere: {
      const double cs = x.dot(y);
      const double sn = (y - cs * x).norm();
      const double d = std::atan2(sn, cs);
      return d * d;
    }
    case FactorKind::Hyperbolic: {
      const double ip = -x[0] * y[0] + x.tail(x.size() - 1).dot(y.tail(y.size() - 1));
      const Vec w = y + ip * x;
      const double ww = -w[0] * w[0] + w.tail(w.size() - 1).squaredNorm();
      const double d = std::asinh(std::sqrt(std::max(ww, 0.0)));
      return d * d;
    }
  }
  return 0.0;
}

// Conformal-time increments per factor and interval: dsig[f][k].
std::vector<std::vector<double>> sigma_increments(const FlowBackground& bg,
                                                  const std::vector<double>& s) {
  std::vector<std::vector<double>> out;
  for (const Factor& f : bg.factors()) {
    std::vector<double> d(s.size() - 1);
    double prev = conformal_time(f, s[0]);
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
      const double next = conformal_time(f, s[k + 1]);
      d[k] = next - prev;
      prev = next;
    }
    out.push_back(std::move(d));
  }
  return out;
}

double path_action(const FlowBackground& bg, const std::vector<Vec>& pts,
                   const std::vector<std::vector<double>>& dsig) {
  double total = 0.0;
  const auto factors = bg.factors();
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    for (std::size_t fi = 0; fi < factors.size(); ++fi) {
      const Factor& f = factors[fi];
      const int m = f.coord_count();
      total += block_dist2(f, pts[k].segment(f.offset, m), pts[k + 1].segment(f.offset, m)) /
               (2.0 * dsig[fi][k]);
    }
  }
  return total;
}

// Gradient of the interval action with respect to each interior node, in
// ambient coordinates (tangent to the model).
std::vector<Vec> action_gradient(const FlowBackground& bg, const std::vector<Vec>& pts,
                                 const std::vector<std::vector<double>>& dsig) {
  const std::size_t n = pts.size();
  std::vector<Vec> grad(n, Vec::Zero(bg.coord_count()));
  const auto factors = bg.factors();
  for (std::size_t k = 0; k + 1 < n; ++k) {
    for (std::size_t fi = 0; fi < factors.size(); ++fi) {
      const Factor& f = factors[fi];
      const int m = f.coord_count();
      const auto a = pts[k].segment(f.offset, m);
      const auto b = pts[k + 1].segment(f.offset, m);
      const double w = 1.0 / dsig[fi][k];
      if (k > 0) grad[k].segment(f.offset, m) -= w * block_log(f, a, b);
      if (k + 1 < n - 1) grad[k + 1].segment(f.offset, m) -= w * block_log(f, b, a);
    }
  }
  return grad;
}

bool has_curved_factor(const FlowBackground& bg) {
  for (const Factor& f : bg.factors()) {
    if (f.kind != FactorKind::Flat) return true;
  }
  return false;
}

void check_times(const FlowBackground& bg, double tau1, double tau2) {
  bg.check_time(tau1);
  bg.check_time(tau2);
  if (!(tau1 < tau2)) {
    std::ostringstream os;
    os << "need tau1 < tau2, got tau1 = " << tau1 << ", tau2 = " << tau2;
    fail(ErrorCode::InvalidArgument, os.str());
  }
}

detail::IntegratorSettings integrator_settings(const GeodesicOptions& opts) {
  return detail::IntegratorSettings{opts.atol, opts.rtol, opts.max_speed};
}

// Direct minimization of the interval action over interior nodes. The
// Hessian is approximated by the weighted path Laplacian of each factor,
// which is exact on flat factors; curved factors converge linearly.
struct Minimized {
  std::vector<Vec> points;
  double action = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
};

Minimized minimize_interior(const FlowBackground& bg, std::vector<Vec> pts,
                            const std::vector<std::vector<double>>& dsig, double step_tol) {
  const std::size_t n = pts.size();
  const auto factors = bg.factors();
  const std::size_t interior = n - 2;

  // Thomas factorization per factor (matrix shared by all coordinates).
  struct Tri {
    std::vector<double> cprime, denom, lower;
  };
  std::vector<Tri> tri(factors.size());
  for (std::size_t fi = 0; fi < factors.size(); ++fi) {
    const auto& w = dsig[fi];
    Tri& t = tri[fi];
    t.cprime.assign(interior, 0.0);
    t.denom.assign(interior, 0.0);
    t.lower.assign(interior, 0.0);
    for (std::size_t i = 0; i < interior; ++i) {
      const double diag = 1.0 / w[i] + 1.0 / w[i + 1];
      const double off_lower = i > 0 ? -1.0 / w[i] : 0.0;
      const double off_upper = i + 1 < interior ? -1.0 / w[i + 1] : 0.0;
      const double den = diag - (i > 0 ? off_lower * t.cprime[i - 1] : 0.0);
      t.denom[i] = den;
      t.lower[i] = off_lower;
      t.cprime[i] = off_upper / den;
    }
  }

  Minimized out;
  double action = path_action(bg, pts, dsig);
  for (int iter = 0; iter < 200; ++iter) {
    const std::vector<Vec> grad = action_gradient(bg, pts, dsig);
    double gmax = 0.0;
    for (std::size_t k = 1; k + 1 < n; ++k) gmax = std::max(gmax, grad[k].cwiseAbs().maxCoeff());
    out.gradient_norm = gmax;

    std::vector<Vec> step(n, Vec::Zero(bg.coord_count()));
    double smax = 0.0;
    for (std::size_t fi = 0; fi < factors.size(); ++fi) {
      const Factor& f = factors[fi];
      const int m = f.coord_count();
      const Tri& t = tri[fi];
      std::vector<Vec> dp(interior);
      for (std::size_t i = 0; i < interior; ++i) {
        Vec rhs = grad[i + 1].segment(f.offset, m);
        if (i > 0) rhs -= t.lower[i] * dp[i - 1];
        dp[i] = rhs / t.denom[i];
      }
      for (std::size_t i = interior; i-- > 0;) {
        if (i + 1 < interior) dp[i] -= t.cprime[i] * dp[i + 1];
        step[i + 1].segment(f.offset, m) = dp[i];
      }
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
      step[k] = bg.project(pts[k], step[k]);
      smax = std::max(smax, step[k].cwiseAbs().maxCoeff());
    }
    if (smax < std::min(step_tol, 1e-14)) {
      out.converged = true;
      break;
    }
    double scale = 1.0;
    std::vector<Vec> trial(pts);
    double trial_action = action;
    for (int ls = 0; ls < 30; ++ls) {
      for (std::size_t k = 1; k + 1 < n; ++k) trial[k] = bg.retract(pts[k] - scale * step[k]);
      trial_action = path_action(bg, trial, dsig);
      if (trial_action <= action + 1e-14 * (1.0 + std::abs(action))) break;
      scale *= 0.5;
    }
    const double change = action - trial_action;
    pts.swap(trial);
    action = trial_action;
    if (smax * scale < step_tol || (change >= 0.0 && change < 1e-16 * (1.0 + std::abs(action)) &&
                                    smax < 1e-9)) {
      out.converged = true;
      break;
    }
  }
  out.points = std::move(pts);
  out.action = action;
  return out;
}

// Reduce y to the image closest to x on every flat factor.
Vec nearest_lift(const FlowBackground& bg, const Vec& x, const Vec& y) {
  Vec out = y;
  for (const Factor& f : bg.factors()) {
    if (f.kind != FactorKind::Flat) continue;
    for (int i = 0; i < f.dim; ++i) {
      const double side = f.lattice[i];
      const int j = f.offset + i;
      out[j] = x[j] + (y[j] - x[j]) - side * std::round((y[j] - x[j]) / side);
    }
  }
  return out;
}

std::vector<Vec> torus_translates(const FlowBackground& bg, const Vec& base) {
  std::vector<std::pair<int, double>> flat_coords;  // (index, side)
  for (const Factor& f : bg.factors()) {
    if (f.kind != FactorKind::Flat) continue;
    for (int i = 0; i < f.dim; ++i) flat_coords.emplace_back(f.offset + i, f.lattice[i]);
  }
  std::vector<Vec> out;
  std::size_t total = 1;
  for (std::size_t i = 0; i < flat_coords.size(); ++i) total *= 3;
  for (std::size_t code = 0; code < total; ++code) {
    Vec y = base;
    std::size_t c = code;
    for (const auto& [idx, side] : flat_coords) {
      y[idx] += side * (static_cast<double>(c % 3) - 1.0);
      c /= 3;
    }
    out.push_back(std::move(y));
  }
  // Put the nearest image first so it seeds the primary candidate.
  std::stable_sort(out.begin(), out.end(), [&](const Vec& a, const Vec& b) {
    return (a - base).squaredNorm() < (b - base).squaredNorm();
  });
  return out;
}

std::vector<Vec> linear_seed(const FlowBackground& bg, const Vec& x, const Vec& y,
                             const std::vector<double>& s) {
  std::vector<Vec> pts(s.size());
  const double s1 = s.front();
  const double s2 = s.back();
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double w = (s[k] - s1) / (s2 - s1);
    Vec p = (1.0 - w) * x + w * y;
    for (const Factor& f : bg.factors()) {
      auto b = p.segment(f.offset, f.coord_count());
      if (f.kind == FactorKind::Sphere && b.norm() < 1e-6) {
        // antipodal data: push the midpoint off the origin
        const Mat basis = bg.tangent_basis(x);
        b += 1e-3 * basis.col(f.chart_offset).segment(f.offset, f.coord_count());
      }
    }
    pts[k] = bg.retract(p);
  }
  pts.front() = x;
  pts.back() = y;
  return pts;
}

std::vector<Vec> bumped_seed(const FlowBackground& bg, const std::vector<Vec>& seed,
                             const std::vector<double>& s, int start) {
  const std::size_t mid = seed.size() / 2;
  const Mat basis = bg.tangent_basis(seed[mid]);
  const int n = bg.dim();
  const int column = (start - 1) % n;
  const double sign = ((start - 1) / n) % 2 == 0 ? 1.0 : -1.0;
  const double amplitude = 0.6 * (1.0 + (start - 1) / (2 * n));
  Vec dir = sign * amplitude * basis.col(column);
  for (const Factor& f : bg.factors()) {
    if (f.kind == FactorKind::Flat) dir.segment(f.offset, f.coord_count()).setZero();
  }
  std::vector<Vec> pts(seed);
  const double s1 = s.front();
  const double s2 = s.back();
  for (std::size_t k = 1; k + 1 < seed.size(); ++k) {
    const double w = (s[k] - s1) / (s2 - s1);
    pts[k] = bg.retract(seed[k] + std::sin(std::numbers::pi * w) * dir);
  }
  return pts;
}

LGeodesic make_geodesic(const FlowBackground& bg, TimePath path, const Vec& Z,
                        std::vector<Vec> velocities) {
  LGeodesic g;
  g.path = std::move(path);
  g.Z = Z;
  g.velocities = std::move(velocities);
  g.length = l_length(g.path, bg);
  g.stationarity_residual = first_variation_residual(g.path, bg);
  return g;
}

// Initial datum Z implied by the first interval of a minimized path.
Vec initial_datum(const FlowBackground& bg, const std::vector<Vec>& pts,
                  const std::vector<std::vector<double>>& dsig, double s1) {
  Vec v = Vec::Zero(bg.coord_count());
  const auto factors = bg.factors();
  for (std::size_t fi = 0; fi < factors.size(); ++fi) {
    const Factor& f = factors[fi];
    const int m = f.coord_count();
    v.segment(f.offset, m) =
        block_log(f, pts[0].segment(f.offset, m), pts[1].segment(f.offset, m)) /
        (dsig[fi][0] * f.scale(s1 * s1));
  }
  return 0.5 * v;
}

struct Refined {
  bool ok = false;
  LGeodesic geodesic;
  double endpoint_error = 0.0;
};

// Newton iteration on the initial datum so the shot geodesic ends at y.
Refined shoot_to(const FlowBackground& bg, const Vec& x, const Vec& y, Vec Z,
                 const std::vector<double>& s, const GeodesicOptions& opts) {
  const Mat bx = bg.tangent_basis(x);
  const Mat by = bg.tangent_basis(y);
  const int n = bg.dim();
  detail::FlowIntegrator integrator(bg, integrator_settings(opts));
  const Mat no_frame(bg.coord_count(), 0);

  Vec zeta(n);
  for (int i = 0; i < n; ++i) zeta[i] = bg.inner_model(bx.col(i), Z);

  auto endpoint_residual = [&](const Vec& z, detail::FlowTrajectory* keep) {
    detail::FlowTrajectory tr = integrator.integrate(x, 2.0 * (bx * z), no_frame, s);
    const Vec d = bg.log_model(y, tr.points.back());
    Vec r(n);
    for (int i = 0; i < n; ++i) r[i] = bg.inner_model(by.col(i), d);
    if (keep) *keep = std::move(tr);
    return r;
  };

  Refined out;
  detail::FlowTrajectory tr;
  Vec r = endpoint_residual(zeta, &tr);
  for (int iter = 0; iter < opts.max_newton; ++iter) {
    out.endpoint_error = r.cwiseAbs().maxCoeff();
    if (out.endpoint_error <= opts.endpoint_tol) {
      out.ok = true;
      break;
    }
    Mat jac(n, n);
    const double h = 1e-7 * std::max(1.0, zeta.norm());
    for (int j = 0; j < n; ++j) {
      Vec zp = zeta;
      zp[j] += h;
      jac.col(j) = (endpoint_residual(zp, nullptr) - r) / h;
    }
    const Vec delta = jac.fullPivLu().solve(-r);
    if (!delta.allFinite()) break;
    zeta += delta;
    r = endpoint_residual(zeta, &tr);
  }
  if (!out.ok) return out;

  TimePath path{s, tr.points, s.front() * s.front(), s.back() * s.back()};
  path.points.front() = x;
  path.points.back() = y;
  out.geodesic = make_geodesic(bg, std::move(path), bx * zeta, std::move(tr.velocities));
  return out;
}

}  // namespace

double conformal_time(const Factor& f, double s) {
  const double r = f.rate();
  const double c0 = f.scale0;
  if (r == 0.0) return s / c0;
  if (r > 0.0) return std::atan(s * std::sqrt(r / c0)) / std::sqrt(r * c0);
  return std::atanh(s * std::sqrt(-r / c0)) / std::sqrt(-r * c0);
}

double scal_action(const FlowBackground& bg, double s) {
  double total = 0.0;
  for (const Factor& f : bg.factors()) {
    const double k = f.curvature_sign() * f.dim * (f.dim - 1);
    if (k == 0.0) continue;
    // 2 u^2 / (c0 + r u^2) = (2/r) (1 - c0 / (c0 + r u^2))
    total += k * (2.0 / f.rate()) * (s - f.scale0 * conformal_time(f, s));
  }
  return total;
}

std::vector<double> uniform_s_nodes(double tau1, double tau2, int count) {
  if (count < 2) fail(ErrorCode::InvalidArgument, "need at least two nodes");
  const double s1 = std::sqrt(tau1);
  const double s2 = std::sqrt(tau2);
  std::vector<double> s(count);
  for (int k = 0; k < count; ++k) s[k] = s1 + (s2 - s1) * k / (count - 1);
  s.front() = s1;
  s.back() = s2;
  return s;
}

std::vector<double> split_s_nodes(double tau1, double tau_mid, double tau2, int count,
                                  std::size_t* mid_index) {
  const double s1 = std::sqrt(tau1);
  const double sm = std::sqrt(tau_mid);
  const double s2 = std::sqrt(tau2);
  const int intervals = std::max(count - 1, 2);
  int left = static_cast<int>(std::lround(intervals * (sm - s1) / (s2 - s1)));
  left = std::clamp(left, 1, intervals - 1);
  const int right = intervals - left;
  std::vector<double> s;
  for (int k = 0; k <= left; ++k) s.push_back(s1 + (sm - s1) * k / left);
  s.back() = sm;
  for (int k = 1; k <= right; ++k) s.push_back(sm + (s2 - sm) * k / right);
  s.back() = s2;
  if (mid_index) *mid_index = static_cast<std::size_t>(left);
  return s;
}

void validate_path(const TimePath& path, const FlowBackground& bg) {
  if (path.s_nodes.size() < static_cast<std::size_t>(kMinPathNodes)) {
    fail(ErrorCode::InvalidArgument, "a path needs at least 17 nodes");
  }
  if (path.points.size() != path.s_nodes.size()) {
    fail(ErrorCode::InvalidArgument, "path has mismatched node and point counts");
  }
  for (std::size_t k = 0; k + 1 < path.s_nodes.size(); ++k) {
    if (!(path.s_nodes[k] < path.s_nodes[k + 1])) {
      fail(ErrorCode::InvalidArgument, "path s-nodes must be strictly increasing");
    }
  }
  if (path.s_nodes.front() < 0.0) fail(ErrorCode::InvalidArgument, "negative s-node");
  bg.check_time(path.t(0));
  bg.check_time(path.t(path.size() - 1));
  for (const Vec& p : path.points) bg.check_point(p);
}

std::vector<double> l_length_partial(const TimePath& path, const FlowBackground& bg) {
  validate_path(path, bg);
  const auto dsig = sigma_increments(bg, path.s_nodes);
  const auto factors = bg.factors();
  std::vector<double> partial(path.size(), 0.0);
  double scal_prev = scal_action(bg, path.s_nodes.front());
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    double kinetic = 0.0;
    for (std::size_t fi = 0; fi < factors.size(); ++fi) {
      const Factor& f = factors[fi];
      const int m = f.coord_count();
      kinetic += block_dist2(f, path.points[k].segment(f.offset, m),
                             path.points[k + 1].segment(f.offset, m)) /
                 (2.0 * dsig[fi][k]);
    }
    const double scal_next = scal_action(bg, path.s_nodes[k + 1]);
    partial[k + 1] = partial[k] + kinetic + (scal_next - scal_prev);
    scal_prev = scal_next;
  }
  return partial;
}

double l_length(const TimePath& path, const FlowBackground& bg) {
  return l_length_partial(path, bg).back();
}

double first_variation_residual(const TimePath& path, const FlowBackground& bg) {
  validate_path(path, bg);
  const auto dsig = sigma_increments(bg, path.s_nodes);
  const std::vector<Vec> grad = action_gradient(bg, path.points, dsig);
  double r = 0.0;
  for (std::size_t k = 1; k + 1 < path.size(); ++k) r = std::max(r, grad[k].cwiseAbs().maxCoeff());
  return r;
}

LGeodesic shoot_on_nodes(const FlowBackground& bg, const Vec& x, const Vec& Z,
                         const std::vector<double>& s_nodes, const GeodesicOptions& opts) {
  if (s_nodes.size() < static_cast<std::size_t>(kMinPathNodes)) {
    fail(ErrorCode::InvalidArgument, "a path needs at least 17 nodes");
  }
  check_times(bg, s_nodes.front() * s_nodes.front(), s_nodes.back() * s_nodes.back());
  bg.check_point(x);
  bg.check_tangent(x, Z);
  const Vec x0 = bg.retract(x);
  const Vec z0 = bg.project(x0, Z);
  detail::FlowIntegrator integrator(bg, integrator_settings(opts));
  detail::FlowTrajectory tr = integrator.integrate(x0, 2.0 * z0, Mat(bg.coord_count(), 0), s_nodes);
  TimePath path{s_nodes, std::move(tr.points), s_nodes.front() * s_nodes.front(),
                s_nodes.back() * s_nodes.back()};
  return make_geodesic(bg, std::move(path), z0, std::move(tr.velocities));
}

LGeodesic shoot(const FlowBackground& bg, const Vec& x, double tau1, const Vec& Z, double tau2,
                const GeodesicOptions& opts) {
  check_times(bg, tau1, tau2);
  return shoot_on_nodes(bg, x, Z, uniform_s_nodes(tau1, tau2, std::max(opts.nodes, kMinPathNodes)),
                        opts);
}

Vec l_exp(const FlowBackground& bg, const Vec& x, double tau1, const Vec& Z, double t,
          const GeodesicOptions& opts) {
  return bg.canonical(shoot(bg, x, tau1, Z, t, opts).path.points.back());
}

DistanceResult l_distance(const FlowBackground& bg, const Vec& x, double tau1, const Vec& y,
                          double tau2, const GeodesicOptions& opts) {
  check_times(bg, tau1, tau2);
  bg.check_point(x);
  bg.check_point(y);
  const std::vector<double> s =
      uniform_s_nodes(tau1, tau2, std::max(opts.nodes, kMinPathNodes));
  const auto dsig = sigma_increments(bg, s);
  const Vec x0 = bg.retract(x);
  const Vec base = nearest_lift(bg, x0, bg.retract(y));
  const int starts = has_curved_factor(bg) ? std::max(opts.starts, 1) : 1;

  // Stage (a): loose direct minimization from every seed and torus translate;
  // it only has to find the basins and seed the shooting stage.
  constexpr double kLooseStep = 1e-7;
  std::vector<Minimized> candidates;
  double best_action = std::numeric_limits<double>::infinity();
  for (const Vec& target : torus_translates(bg, base)) {
    // The flat part of the action alone bounds every path to this translate.
    double bound = 0.0;
    const auto factors = bg.factors();
    for (std::size_t fi = 0; fi < factors.size(); ++fi) {
      const Factor& f = factors[fi];
      if (f.kind != FactorKind::Flat) continue;
      double span = 0.0;
      for (double d : dsig[fi]) span += d;
      bound += (target - x0).segment(f.offset, f.dim).squaredNorm() / (2.0 * span);
    }
    if (bound > best_action + 1e-6 * (1.0 + std::abs(best_action))) continue;
    const std::vector<Vec> seed = linear_seed(bg, x0, target, s);
    for (int j = 0; j < starts; ++j) {
      Minimized m = minimize_interior(bg, j == 0 ? seed : bumped_seed(bg, seed, s, j), dsig,
                                      kLooseStep);
      if (m.converged) best_action = std::min(best_action, m.action);
      candidates.push_back(std::move(m));
    }
  }
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].action < candidates[b].action;
  });

  auto node_gap = [&](const std::vector<Vec>& a, const std::vector<Vec>& b) {
    double gap = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) gap = std::max(gap, (a[k] - b[k]).cwiseAbs().maxCoeff());
    return gap;
  };

  // Distinct basins among the converged candidates.
  std::vector<std::size_t> distinct;
  for (std::size_t idx : order) {
    const Minimized& c = candidates[idx];
    if (!c.converged) continue;
    bool fresh = true;
    for (std::size_t d : distinct) {
      if (node_gap(c.points, candidates[d].points) < 1e-4) {
        fresh = false;
        break;
      }
    }
    if (fresh) distinct.push_back(idx);
  }

  // Stage (b): shooting refinement of the best basin and near-ties.
  std::vector<LGeodesic> refined;
  double best_error = 0.0;
  if (!distinct.empty()) {
    const double lead = candidates[distinct.front()].action;
    for (std::size_t idx : distinct) {
      const Minimized& c = candidates[idx];
      if (c.action > lead + 1e-6 * (1.0 + std::abs(lead))) break;
      Refined r = shoot_to(bg, x0, c.points.back(), initial_datum(bg, c.points, dsig, s.front()),
                           s, opts);
      if (r.ok) {
        refined.push_back(std::move(r.geodesic));
      } else {
        best_error = std::max(best_error, r.endpoint_error);
      }
    }
  }

  DistanceResult best;
  if (refined.empty()) {
    // fall back to a fully converged stage-(a) path when shooting fails
    const double scal_total = scal_action(bg, s.back()) - scal_action(bg, s.front());
    const Minimized& loose = candidates[order.front()];
    const Minimized c = minimize_interior(bg, loose.points, dsig, 1e-13);
    if (!c.converged) {
      std::ostringstream os;
      os << "L-distance solve did not converge: best action " << c.action + scal_total
         << ", gradient " << c.gradient_norm << ", shooting endpoint error " << best_error;
      fail(ErrorCode::Numerical, os.str());
    }
    TimePath path{s, c.points, tau1, tau2};
    best.geodesic =
        make_geodesic(bg, std::move(path), initial_datum(bg, c.points, dsig, s.front()), {});
    best.q = best.geodesic.length;
    best.multiplicity_hint = 1;
    return best;
  }
  std::size_t lead = 0;
  for (std::size_t i = 1; i < refined.size(); ++i) {
    if (refined[i].length < refined[lead].length) lead = i;
  }
  const double q = refined[lead].length;
  std::vector<std::size_t> ties;
  for (std::size_t i = 0; i < refined.size(); ++i) {
    if (refined[i].length > q + 1e-9 * (1.0 + std::abs(q))) continue;
    bool fresh = true;
    for (std::size_t t : ties) {
      if (node_gap(refined[i].path.points, refined[t].path.points) < 1e-6) fresh = false;
    }
    if (fresh) ties.push_back(i);
  }
  best.q = q;
  best.geodesic = std::move(refined[lead]);
  best.multiplicity_hint = static_cast<int>(ties.size());
  return best;
}

}  // namespace lflow
