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

#include "lflow/reduced_volume.hpp"

#include "lflow/error.hpp"
#include "lflow/jacobi.hpp"
#include "lflow/parallel.hpp"
#include "lflow/quadrature.hpp"
#include "lflow/sampling.hpp"
#include "lflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

namespace lflow {
namespace {

// Reflection taking the model north pole to the sphere block of p, so the
// colatitude cells are centred on p.
Mat pole_rotation(const FlowBackground& bg, const Vec& p) {
  for (const Factor& f : bg.factors()) {
    if (f.kind != FactorKind::Sphere) continue;
    const int m = f.coord_count();
    Vec u = Vec::Zero(m);
    u(m - 1) = 1.0;
    u -= p.segment(f.offset, m);
    Mat r = Mat::Identity(m, m);
    if (u.norm() > 1e-14) r -= 2.0 * u * u.transpose() / u.squaredNorm();
    return r;
  }
  return Mat();
}

int auto_cells(const FlowBackground& bg, double t_from, double t_to,
               const ReducedVolumeOptions& opts) {
  const double st = std::sqrt(t_to);
  int cells = opts.min_cells;
  for (const Factor& f : bg.factors()) {
    const double width = std::sqrt(2.0 * st * (st - std::sqrt(t_from)) / f.scale(t_to));
    double need = 0.0;
    if (f.kind == FactorKind::Flat) {
      need = *std::max_element(f.lattice.begin(), f.lattice.end()) / (opts.resolution * width);
    } else {
      // midpoint in colatitude is only second order
      need = 3.0 * std::numbers::pi / (opts.resolution * width);
    }
    cells = std::max(cells, static_cast<int>(std::ceil(need)));
  }
  cells = std::min(cells, opts.max_cells);
  return cells + cells % 2;
}

double grid_integral(const FlowBackground& bg, const QuadratureGrid& grid, double t,
                     const std::function<double(const Vec&)>& f) {
  const std::vector<double> terms =
      parallel_map<double>(grid.size(), [&](std::size_t i) { return grid.weight(i) * f(grid.point(i)); });
  double sum = 0.0;
  for (double v : terms) sum += v;
  return sum * bg.volume_factor(t);
}

bool single_model_factor(const FlowBackground& bg) {
  return bg.kind() == ModelKind::FlatTorus || bg.kind() == ModelKind::RoundSphere;
}

}  // namespace

double v_reduced(const FlowBackground& bg, const Vec& p, const Vec& x, double tau,
                 const GeodesicOptions& opts) {
  if (!(tau > 0.0)) fail(ErrorCode::InvalidArgument, "v_reduced needs tau > 0");
  const double q = l_distance(bg, p, 0.0, x, tau, opts).q;
  return std::pow(tau, -0.5 * bg.dim()) * std::exp(-q / (2.0 * std::sqrt(tau)));
}

KernelIntegral kernel_integral(const FlowBackground& bg, const Vec& p, double t_from, double t_to,
                               const ReducedVolumeOptions& opts) {
  bg.check_point(p);
  bg.check_time(t_from);
  bg.check_time(t_to);
  if (!(t_from < t_to)) {
    std::ostringstream os;
    os << "kernel integral needs t_from < t_to, got " << t_from << ", " << t_to;
    fail(ErrorCode::InvalidArgument, os.str());
  }
  if (!bg.compact()) fail(ErrorCode::Domain, "reduced volume needs a compact background");
  KernelIntegral out;
  out.cells = opts.cells > 0 ? opts.cells + opts.cells % 2 : auto_cells(bg, t_from, t_to, opts);
  const Mat rot = pole_rotation(bg, p);
  const double pre = std::pow(t_to, -0.5 * bg.dim());
  const double st = std::sqrt(t_to);
  auto kernel = [&](const Vec& x) {
    const double q = l_distance(bg, p, t_from, x, t_to, opts.geodesic).q;
    return pre * std::exp(-q / (2.0 * st));
  };
  const QuadratureGrid fine(bg, out.cells, rot);
  const QuadratureGrid coarse(bg, std::max(1, out.cells / 2), rot);
  out.value = grid_integral(bg, fine, t_to, kernel);
  out.error = std::abs(out.value - grid_integral(bg, coarse, t_to, kernel));
  out.evaluations = fine.size() + coarse.size();
  return out;
}

KernelIntegral reduced_volume_estimate(const FlowBackground& bg, const Vec& p, double tau,
                                       const ReducedVolumeOptions& opts) {
  if (!(tau > 0.0)) fail(ErrorCode::InvalidArgument, "reduced volume needs tau > 0");
  return kernel_integral(bg, p, 0.0, tau, opts);
}

double reduced_volume(const FlowBackground& bg, const Vec& p, double tau,
                      const ReducedVolumeOptions& opts) {
  const KernelIntegral k = reduced_volume_estimate(bg, p, tau, opts);
  if (!(k.error <= opts.budget * std::abs(k.value))) {
    std::ostringstream os;
    os << "reduced volume at tau = " << tau << " unresolved: estimate " << k.value << ", error "
       << k.error << " with " << k.cells << " cells";
    fail(ErrorCode::Numerical, os.str());
  }
  return k.value;
}

std::vector<Vec> ball_samples(const FlowBackground& bg, const Vec& p, double tau1,
                              int sample_count, std::uint64_t seed) {
  bg.check_point(p);
  if (!(tau1 > 0.0)) fail(ErrorCode::InvalidArgument, "ball radius needs tau1 > 0");
  if (sample_count < 1) fail(ErrorCode::InvalidArgument, "need at least one ball sample");
  const int n = bg.dim();
  const double r = std::sqrt(tau1);
  const Mat frame = bg.orthonormal_frame(p, 0.0);
  SeededRng rng(seed);
  std::vector<Vec> out;
  out.reserve(sample_count);
  for (int k = 0; k < sample_count; ++k) {
    Vec xi = Vec::Zero(n);
    if (k < 2 * n) {
      xi(k / 2) = k % 2 == 0 ? r : -r;
    } else {
      for (int i = 0; i < n; ++i) xi(i) = rng.normal();
      xi *= r * std::pow(rng.uniform(), 1.0 / n) / xi.norm();
    }
    out.push_back(bg.canonical(bg.exp_model(p, frame * xi)));
  }
  return out;
}

double estimate_N(const FlowBackground& bg, const Vec& p, double tau1, int sample_count,
                  const GeodesicOptions& opts) {
  const std::vector<Vec> xs = ball_samples(bg, p, tau1, sample_count);
  const std::vector<double> ratios = parallel_map<double>(xs.size(), [&](std::size_t i) {
    const double q1 = l_distance(bg, p, 0.0, xs[i], tau1, opts).q;
    const double q2 = l_distance(bg, xs[i], tau1, p, 2.0 * tau1, opts).q;
    return std::max(q1, q2);
  });
  double worst = 0.0;
  for (double q : ratios) worst = std::max(worst, q);
  return 1.1 * worst / std::sqrt(tau1);
}

ReducedVolumeCurve monotonicity_curve(const FlowBackground& bg, const Vec& p,
                                      const std::vector<double>& tau_grid,
                                      const ReducedVolumeOptions& opts) {
  if (tau_grid.empty()) fail(ErrorCode::InvalidArgument, "empty tau grid");
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    if (!(tau_grid[i] > 0.0 && tau_grid[i] < bg.t_max()) ||
        (i > 0 && !(tau_grid[i] > tau_grid[i - 1]))) {
      std::ostringstream os;
      os << "tau grid must be increasing inside (0, " << bg.t_max() << "), bad entry " << i;
      fail(ErrorCode::InvalidArgument, os.str());
    }
  }
  ReducedVolumeCurve c;
  c.basepoint = p;
  c.tau_grid = tau_grid;
  c.worst_violation = -std::numeric_limits<double>::infinity();
  for (double tau : tau_grid) {
    const KernelIntegral k = reduced_volume_estimate(bg, p, tau, opts);
    c.values.push_back(k.value);
    c.quadrature_error_estimate.push_back(k.error);
  }
  for (std::size_t a = 0; a < tau_grid.size(); ++a) {
    for (std::size_t b = a + 1; b < tau_grid.size(); ++b) {
      const double gap = c.values[b] - c.values[a] -
                         (c.quadrature_error_estimate[a] + c.quadrature_error_estimate[b]);
      c.worst_violation = std::max(c.worst_violation, gap);
    }
  }
  if (tau_grid.size() == 1) c.worst_violation = 0.0;
  c.monotone = c.worst_violation <= 0.0;
  return c;
}

double ball_volume(const FlowBackground& bg, double r, double t) {
  if (!single_model_factor(bg)) {
    fail(ErrorCode::InvalidArgument, "ball volume is available on flat tori and round spheres only");
  }
  if (!(r >= 0.0)) fail(ErrorCode::InvalidArgument, "ball radius must be nonnegative");
  const Factor& f = bg.factors().front();
  const int n = f.dim;
  const double rho = r / std::sqrt(f.scale0);
  const double sphere_area = 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
  double unit = 0.0;
  if (f.kind == FactorKind::Flat) {
    if (2.0 * rho >= *std::min_element(f.lattice.begin(), f.lattice.end())) {
      fail(ErrorCode::Domain, "ball wraps around the torus");
    }
    unit = sphere_area * std::pow(rho, n) / n;
  } else {
    unit = sphere_area * sine_power_integral(n - 1, 0.0, std::min(rho, std::numbers::pi));
  }
  return unit * bg.volume_factor(t);
}

Section3Result section3_experiment(const FlowBackground& bg, const Vec& p, double tau,
                                   double tau2, std::vector<double> tau1_list,
                                   const Section3Options& opts) {
  if (!single_model_factor(bg)) {
    fail(ErrorCode::InvalidArgument,
         "the small-ball construction needs a flat torus or a round sphere");
  }
  bg.check_point(p);
  if (!(0.0 < tau && tau < tau2 && tau2 < bg.t_max())) {
    fail(ErrorCode::InvalidArgument, "need 0 < tau < tau2 < T");
  }
  if (tau1_list.empty()) fail(ErrorCode::InvalidArgument, "empty tau1 list");
  std::sort(tau1_list.begin(), tau1_list.end(), std::greater<>());
  for (double t1 : tau1_list) {
    if (!(t1 > 0.0 && t1 < tau && 2.0 * t1 < tau2)) {
      std::ostringstream os;
      os << "tau1 = " << t1 << " must satisfy 0 < tau1 < tau and 2 tau1 < tau2";
      fail(ErrorCode::InvalidArgument, os.str());
    }
  }
  const double n = bg.dim();
  Section3Result out;
  out.volume_tau = reduced_volume_estimate(bg, p, tau, opts.volume);
  out.volume_tau2 = reduced_volume_estimate(bg, p, tau2, opts.volume);
  out.min_slack = std::numeric_limits<double>::infinity();
  double prev_gap = std::numeric_limits<double>::infinity();
  for (double t1 : tau1_list) {
    Section3Row row;
    row.tau1 = t1;
    row.lambda = lambda_from_times(t1, tau, tau2);
    row.N = estimate_N(bg, p, t1, opts.n_samples, opts.volume.geodesic);
    const double decay = row.N * std::sqrt(t1) / (2.0 * (1.0 - row.lambda)) *
                         (1.0 / std::sqrt(tau) + row.lambda / std::sqrt(tau2));
    row.mass_u1 = std::pow(t1, -0.5 * n) * std::exp(-decay) * ball_volume(bg, std::sqrt(t1), t1);
    row.mass_u1_pow = std::pow(row.mass_u1, 1.0 - row.lambda);
    const KernelIntegral u2 = kernel_integral(bg, p, 2.0 * t1, tau2, opts.volume);
    row.mass_u2 = u2.value;
    row.mass_u2_error = u2.error;
    row.mass_u2_pow = std::pow(u2.value, row.lambda);
    row.slack = interpolation_slack(out.volume_tau.value, row.mass_u1, row.mass_u2, row.lambda);
    out.min_slack = std::min(out.min_slack, row.slack);
    const double gap = std::abs(row.mass_u1_pow - 1.0);
    if (!(gap < prev_gap)) out.u1_trend = false;
    prev_gap = gap;
    out.rows.push_back(row);
  }
  out.u2_gap = std::abs(out.rows.back().mass_u2_pow - out.volume_tau2.value);
  return out;
}

}  // namespace lflow
