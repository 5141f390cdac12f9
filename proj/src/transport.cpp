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

#include "lflow/transport.hpp"

#include "lflow/error.hpp"
#include "lflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

namespace lflow {
namespace {

const Factor& factor_at(const FlowBackground& bg, int index) {
  if (index < 0 || index >= static_cast<int>(bg.factors().size())) {
    fail(ErrorCode::InvalidArgument, "density term refers to a missing factor");
  }
  return bg.factors()[index];
}

double periodic_gaussian_1d(double d, double side, double sigma) {
  d -= side * std::round(d / side);
  const int images = static_cast<int>(std::ceil(8.0 * sigma / side)) + 1;
  double s = 0.0;
  for (int k = -images; k <= images; ++k) {
    const double e = d + k * side;
    s += std::exp(-e * e / (2.0 * sigma * sigma));
  }
  return s;
}

}  // namespace

DensityField DensityField::uniform(double value) {
  DensityField d;
  d.scale_ = value;
  return d;
}

DensityField DensityField::gaussian(const FlowBackground& bg, const Vec& center, double sigma,
                                    int factor) {
  DensityTerm t;
  t.kind = DensityTerm::Kind::Gaussian;
  t.factor = factor;
  t.center = center;
  t.sigma = sigma;
  return DensityField().times(bg, std::move(t));
}

DensityField DensityField::von_mises(const FlowBackground& bg, const Vec& axis,
                                     double concentration, int factor) {
  DensityTerm t;
  t.kind = DensityTerm::Kind::VonMises;
  t.factor = factor;
  t.axis = axis;
  t.concentration = concentration;
  return DensityField().times(bg, std::move(t));
}

DensityField& DensityField::times(const FlowBackground& bg, DensityTerm term) {
  const Factor& f = factor_at(bg, term.factor);
  if (term.kind == DensityTerm::Kind::Gaussian) {
    if (f.kind != FactorKind::Flat) fail(ErrorCode::InvalidArgument, "Gaussian needs a flat factor");
    if (term.center.size() != f.dim) fail(ErrorCode::InvalidArgument, "Gaussian center size");
    if (!(term.sigma > 0.0)) fail(ErrorCode::InvalidArgument, "Gaussian sigma must be positive");
  } else {
    if (f.kind != FactorKind::Sphere) {
      fail(ErrorCode::InvalidArgument, "von Mises density needs a sphere factor");
    }
    if (term.axis.size() != f.coord_count()) fail(ErrorCode::InvalidArgument, "axis size");
  }
  terms_.push_back(std::move(term));
  return *this;
}

DensityField& DensityField::scale_by(double factor) {
  if (!(factor >= 0.0)) fail(ErrorCode::InvalidArgument, "density scale must be nonnegative");
  scale_ *= factor;
  return *this;
}

double DensityField::value(const FlowBackground& bg, const Vec& x) const {
  double v = scale_;
  for (const DensityTerm& t : terms_) {
    const Factor& f = bg.factors()[t.factor];
    if (t.kind == DensityTerm::Kind::Gaussian) {
      for (int i = 0; i < f.dim; ++i) {
        v *= periodic_gaussian_1d(x[f.offset + i] - t.center[i], f.lattice[i], t.sigma);
      }
    } else {
      v *= std::exp(t.concentration * t.axis.dot(x.segment(f.offset, f.coord_count())));
    }
  }
  return v;
}

double DensityField::mass(const FlowBackground& bg, const QuadratureGrid& grid, double t) const {
  double s = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) s += grid.weight(i) * value(bg, grid.point(i));
  return s * bg.volume_factor(t);
}

DensityField& DensityField::normalize(const FlowBackground& bg, const QuadratureGrid& grid,
                                      double t) {
  const double m = mass(bg, grid, t);
  if (!(m > 0.0)) fail(ErrorCode::Numerical, "cannot normalize a density with zero mass");
  scale_ /= m;
  return *this;
}

double validate_scenario(const FlowBackground& bg, const TheoremScenario& sc) {
  bg.check_time(sc.tau2);
  return lambda_from_times(sc.tau1, sc.tau, sc.tau2);
}

Pushforward pushforward_density(const FlowBackground& bg, const PotentialField& phi,
                                const DensityField& u1, double tau1, double t, const Vec& x,
                                const JacobiOptions& opts) {
  bg.check_time(t);
  if (!(t > tau1)) fail(ErrorCode::InvalidArgument, "pushforward time must exceed tau1");
  const std::vector<double> s =
      uniform_s_nodes(tau1, t, std::max(opts.geodesic.nodes, kMinPathNodes));
  const LGeodesic geo = shoot_on_nodes(bg, x, phi.flow_datum(bg, x, tau1), s, opts.geodesic);
  const JacobiTrack track = jacobi_track(bg, geo, phi, opts);
  Pushforward p;
  p.image = bg.canonical(geo.path.points.back());
  p.jacobian = track.detA.back();
  p.value = u1.value(bg, x) / p.jacobian;
  return p;
}

double admissible_candidate(int n, double tau1, double tau, double tau2, double q1, double q2,
                            double u1, double u2) {
  if (u1 <= 0.0 || u2 <= 0.0) return 0.0;
  const double l = lambda_from_times(tau1, tau, tau2);
  const double pref = std::pow(std::pow(tau1, 1.0 - l) * std::pow(tau2, l) / tau, 0.5 * n);
  return pref * std::exp(-(1.0 - l) / (2.0 * std::sqrt(tau1)) * q1) * std::pow(u1, 1.0 - l) *
         std::exp(l / (2.0 * std::sqrt(tau2)) * q2) * std::pow(u2, l);
}

double interpolation_slack(double mass_v, double mass_u1, double mass_u2, double lambda) {
  return mass_v - std::pow(mass_u1, 1.0 - lambda) * std::pow(mass_u2, lambda);
}

DensitySlack density_inequality(const FlowBackground& bg, const TheoremScenario& sc,
                                const PotentialField& phi, const Vec& x) {
  const double l = validate_scenario(bg, sc);
  DensitySlack d;
  d.jacobian = jacobian_inequality(bg, x, phi, sc.tau1, sc.tau, sc.tau2, sc.options);
  const double u1 = sc.u1.value(bg, x);
  d.u_tau = u1 / d.jacobian.det_tau;
  d.u2 = u1 / d.jacobian.det_tau2;
  const double n = bg.dim();
  d.lhs = std::pow(sc.tau / (std::pow(sc.tau1, 1.0 - l) * std::pow(sc.tau2, l)), 0.5 * n) * d.u_tau;
  d.v_min = admissible_candidate(bg.dim(), sc.tau1, sc.tau, sc.tau2, d.jacobian.q_first,
                                 d.jacobian.q_second, u1, d.u2);
  d.rhs = std::exp(-(1.0 - l) / (2.0 * std::sqrt(sc.tau1)) * d.jacobian.q_first) *
          std::pow(u1, 1.0 - l) *
          std::exp(l / (2.0 * std::sqrt(sc.tau2)) * d.jacobian.q_second) * std::pow(d.u2, l);
  d.slack = d.rhs - d.lhs;
  return d;
}

double density_inequality_slack(const FlowBackground& bg, const TheoremScenario& sc,
                                const PotentialField& phi, const Vec& x) {
  return density_inequality(bg, sc, phi, x).slack;
}

double corollary_mass(const FlowBackground& bg, const TheoremScenario& sc,
                      const PotentialField& phi) {
  validate_scenario(bg, sc);
  const QuadratureGrid grid(bg, sc.sampling.quad_cells);
  const std::vector<double> terms = parallel_map<double>(grid.size(), [&](std::size_t i) {
    const DensitySlack d = density_inequality(bg, sc, phi, grid.point(i));
    return grid.weight(i) * d.v_min * d.jacobian.det_tau;
  });
  double s = 0.0;
  for (double t : terms) s += t;
  return s * bg.volume_factor(sc.tau1);
}

double corollary_mass(const FlowBackground& bg, const QuadratureGrid& grid,
                      const std::vector<double>& v, double tau) {
  if (v.size() != grid.size()) fail(ErrorCode::InvalidArgument, "v does not match the grid");
  double s = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) s += grid.weight(i) * v[i];
  return s * bg.volume_factor(tau);
}

std::vector<GeodesicSample> forward_samples(const FlowBackground& bg, const TheoremScenario& sc) {
  const QuadratureGrid xs(bg, sc.sampling.sample_cells);
  const int n = bg.dim();
  const int k = std::max(sc.sampling.offset_steps, 0);
  std::size_t per_axis = 2 * k + 1;
  std::size_t combos = 1;
  for (int i = 0; i < n; ++i) combos *= per_axis;
  std::vector<GeodesicSample> out;
  out.reserve(xs.size() * combos);
  for (const Vec& x : xs.points()) {
    const Vec center = sc.guide.flow_datum(bg, x, sc.tau1);
    const Mat frame = bg.orthonormal_frame(x, sc.tau1);
    for (std::size_t c = 0; c < combos; ++c) {
      Vec z = center;
      std::size_t code = c;
      for (int i = 0; i < n; ++i) {
        const int o = static_cast<int>(code % per_axis) - k;
        code /= per_axis;
        if (k > 0) z += (sc.sampling.offset_radius * o / k) * frame.col(i);
      }
      out.push_back({x, z});
    }
  }
  return out;
}

AdmissibleV minimal_admissible_v(const FlowBackground& bg, const TheoremScenario& sc,
                                 const std::vector<GeodesicSample>& samples) {
  validate_scenario(bg, sc);
  AdmissibleV out{QuadratureGrid(bg, sc.sampling.z_cells), {}, {}, 0, 0, 0};
  struct Hit {
    std::size_t cell = 0;
    double value = 0.0;
    int status = 0;  // 0 used, 1 dropped, 2 zero
  };
  const GeodesicOptions& go = sc.options.geodesic;
  std::size_t mid = 0;
  const std::vector<double> s =
      split_s_nodes(sc.tau1, sc.tau, sc.tau2, std::max(go.nodes, kMinPathNodes), &mid);
  const std::vector<Hit> hits = parallel_map<Hit>(samples.size(), [&](std::size_t i) {
    const GeodesicSample& smp = samples[i];
    const LGeodesic geo = shoot_on_nodes(bg, smp.x, smp.Z, s, go);
    Hit h;
    h.cell = out.grid.locate(geo.path.points[mid]);
    const double u1 = sc.u1.value(bg, smp.x);
    const Vec end = bg.canonical(geo.path.points.back());
    const double u2 = sc.u2.value(bg, end);
    if (u1 <= 0.0 || u2 <= 0.0) {
      h.status = 2;
      return h;
    }
    const double q = l_distance(bg, smp.x, sc.tau1, end, sc.tau2, go).q;
    if (geo.length > q + sc.minimality_tol) {
      h.status = 1;
      return h;
    }
    // restrictions of a minimizer are minimizing
    const double q1 = l_length_partial(geo.path, bg)[mid];
    const double q2 = geo.length - q1;
    h.value = admissible_candidate(bg.dim(), sc.tau1, sc.tau, sc.tau2, q1, q2, u1, u2);
    return h;
  });
  out.values.assign(out.grid.size(), 0.0);
  out.hits.assign(out.grid.size(), 0);
  for (const Hit& h : hits) {
    if (h.status == 1) {
      ++out.dropped;
      continue;
    }
    if (h.status == 2) {
      ++out.skipped;
      continue;
    }
    ++out.used;
    ++out.hits[h.cell];
    out.values[h.cell] = std::max(out.values[h.cell], h.value);
  }
  return out;
}

Theorem2Result theorem2_check(const FlowBackground& bg, const TheoremScenario& sc) {
  Theorem2Result r;
  r.lambda = validate_scenario(bg, sc);
  const QuadratureGrid quad(bg, sc.sampling.quad_cells);
  r.mass_u1 = sc.u1.mass(bg, quad, sc.tau1);
  r.mass_u2 = sc.u2.mass(bg, quad, sc.tau2);
  const AdmissibleV v = minimal_admissible_v(bg, sc, forward_samples(bg, sc));
  r.mass_v = corollary_mass(bg, v.grid, v.values, sc.tau);
  r.bound = std::pow(r.mass_u1, 1.0 - r.lambda) * std::pow(r.mass_u2, r.lambda);
  r.slack = interpolation_slack(r.mass_v, r.mass_u1, r.mass_u2, r.lambda);
  r.samples_used = v.used;
  r.samples_dropped = v.dropped;
  r.cells_total = v.grid.size();
  for (int h : v.hits) r.cells_hit += h > 0 ? 1 : 0;
  return r;
}

Mat cost_matrix(const FlowBackground& bg, const std::vector<Vec>& pts1, double tau1,
                const std::vector<Vec>& pts2, double tau2, const GeodesicOptions& opts) {
  if (pts1.empty() || pts2.empty()) fail(ErrorCode::InvalidArgument, "empty point list");
  const std::size_t n2 = pts2.size();
  const std::vector<double> flat =
      parallel_map<double>(pts1.size() * n2, [&](std::size_t k) {
        try {
          return l_distance(bg, pts1[k / n2], tau1, pts2[k % n2], tau2, opts).q;
        } catch (const Error& e) {
          std::ostringstream os;
          os << "cost entry (" << k / n2 << ", " << k % n2 << "): " << e.what();
          fail(e.code(), os.str());
        }
      });
  Mat c(pts1.size(), n2);
  for (std::size_t k = 0; k < flat.size(); ++k) c(k / n2, k % n2) = flat[k];
  return c;
}

TransportPlan solve_discrete_ot(const Mat& cost, const std::vector<double>& w1,
                                const std::vector<double>& w2) {
  const int n1 = static_cast<int>(cost.rows());
  const int n2 = static_cast<int>(cost.cols());
  if (n1 == 0 || n2 == 0 || static_cast<int>(w1.size()) != n1 ||
      static_cast<int>(w2.size()) != n2) {
    fail(ErrorCode::InvalidArgument, "cost and weight sizes do not match");
  }
  double m1 = 0.0, m2 = 0.0;
  for (double w : w1) {
    if (!(w >= 0.0)) fail(ErrorCode::InvalidArgument, "negative source weight");
    m1 += w;
  }
  for (double w : w2) {
    if (!(w >= 0.0)) fail(ErrorCode::InvalidArgument, "negative target weight");
    m2 += w;
  }
  if (std::abs(m1 - m2) > 1e-12 * std::max(1.0, m1)) {
    std::ostringstream os;
    os << "source mass " << m1 << " differs from target mass " << m2;
    fail(ErrorCode::InvalidArgument, os.str());
  }
  const double tiny = 1e-15 * std::max(1.0, m1);

  // Nodes 0..n1-1 are sources, n1..n1+n2-1 targets.
  const int nn = n1 + n2;
  Mat flow = Mat::Zero(n1, n2);
  std::vector<double> supply(w1), demand(w2);
  std::vector<double> pot(nn, 0.0);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(nn);
  std::vector<int> prev(nn);
  std::vector<char> done(nn);
  for (;;) {
    bool any = false;
    for (int i = 0; i < n1; ++i) any = any || supply[i] > tiny;
    if (!any) break;
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(prev.begin(), prev.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (int i = 0; i < n1; ++i) {
      if (supply[i] > tiny) dist[i] = 0.0;
    }
    int sink = -1;
    for (;;) {
      int u = -1;
      for (int v = 0; v < nn; ++v) {
        if (!done[v] && dist[v] < inf && (u < 0 || dist[v] < dist[u])) u = v;
      }
      if (u < 0) break;
      done[u] = 1;
      if (u >= n1 && demand[u - n1] > tiny) {
        sink = u;
        break;
      }
      if (u < n1) {
        for (int j = 0; j < n2; ++j) {
          const int v = n1 + j;
          if (done[v]) continue;
          const double rc = std::max(cost(u, j) + pot[u] - pot[v], 0.0);
          if (dist[u] + rc < dist[v]) {
            dist[v] = dist[u] + rc;
            prev[v] = u;
          }
        }
      } else {
        const int j = u - n1;
        for (int i = 0; i < n1; ++i) {
          if (done[i] || flow(i, j) <= 0.0) continue;
          const double rc = std::max(-cost(i, j) + pot[u] - pot[i], 0.0);
          if (dist[u] + rc < dist[i]) {
            dist[i] = dist[u] + rc;
            prev[i] = u;
          }
        }
      }
    }
    if (sink < 0) fail(ErrorCode::Numerical, "transport solver found no augmenting path");
    for (int v = 0; v < nn; ++v) pot[v] += std::min(dist[v], dist[sink]);
    // bottleneck along the path
    double delta = demand[sink - n1];
    int v = sink;
    while (prev[v] >= 0) {
      const int u = prev[v];
      if (u >= n1) delta = std::min(delta, flow(v, u - n1));  // reverse arc target -> source
      v = u;
    }
    delta = std::min(delta, supply[v]);
    const int source = v;
    v = sink;
    while (prev[v] >= 0) {
      const int u = prev[v];
      if (u < n1) {
        flow(u, v - n1) += delta;
      } else {
        flow(v, u - n1) -= delta;
        if (flow(v, u - n1) < tiny) flow(v, u - n1) = 0.0;
      }
      v = u;
    }
    supply[source] -= delta;
    demand[sink - n1] -= delta;
  }

  TransportPlan plan;
  plan.source_weights = w1;
  plan.target_weights = w2;
  plan.weights = flow;
  plan.costs = cost;
  plan.cost = 0.0;
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) plan.cost += flow(i, j) * cost(i, j);
  }
  return plan;
}

TransportPlan transport_plan(const FlowBackground& bg, const std::vector<Vec>& pts1,
                             const std::vector<double>& w1, double tau1,
                             const std::vector<Vec>& pts2, const std::vector<double>& w2,
                             double tau2, const GeodesicOptions& opts) {
  TransportPlan plan = solve_discrete_ot(cost_matrix(bg, pts1, tau1, pts2, tau2, opts), w1, w2);
  plan.source_points = pts1;
  plan.target_points = pts2;
  return plan;
}

double marginal_error(const TransportPlan& plan) {
  double e = 0.0;
  for (int i = 0; i < plan.weights.rows(); ++i) {
    e = std::max(e, std::abs(plan.weights.row(i).sum() - plan.source_weights[i]));
  }
  for (int j = 0; j < plan.weights.cols(); ++j) {
    e = std::max(e, std::abs(plan.weights.col(j).sum() - plan.target_weights[j]));
  }
  return e;
}

WeightedPoints interpolate_plan(const FlowBackground& bg, const TransportPlan& plan, double tau1,
                                double tau, double tau2, const GeodesicOptions& opts) {
  if (!(tau1 <= tau && tau <= tau2)) fail(ErrorCode::InvalidArgument, "tau outside [tau1, tau2]");
  if (plan.source_points.size() != static_cast<std::size_t>(plan.weights.rows()) ||
      plan.target_points.size() != static_cast<std::size_t>(plan.weights.cols())) {
    fail(ErrorCode::InvalidArgument, "plan carries no support points");
  }
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < plan.weights.rows(); ++i) {
    for (int j = 0; j < plan.weights.cols(); ++j) {
      if (plan.weights(i, j) > 0.0) pairs.emplace_back(i, j);
    }
  }
  const std::vector<Vec> moved = parallel_map<Vec>(pairs.size(), [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    if (tau == tau1) return plan.source_points[i];
    if (tau == tau2) return plan.target_points[j];
    const DistanceResult r =
        l_distance(bg, plan.source_points[i], tau1, plan.target_points[j], tau2, opts);
    return l_exp(bg, plan.source_points[i], tau1, r.geodesic.Z, tau, opts);
  });
  // merge coincident points in first-appearance order
  WeightedPoints out;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double w = plan.weights(pairs[k].first, pairs[k].second);
    bool merged = false;
    for (std::size_t m = 0; m < out.points.size(); ++m) {
      if (out.points[m] == moved[k]) {
        out.weights[m] += w;
        merged = true;
        break;
      }
    }
    if (!merged) {
      out.points.push_back(moved[k]);
      out.weights.push_back(w);
    }
  }
  return out;
}

}  // namespace lflow
