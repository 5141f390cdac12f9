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

#include "lflow/harness.hpp"

#include "lflow/error.hpp"
#include "lflow/parallel.hpp"
#include "lflow/quadrature.hpp"
#include "lflow/sampling.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace lflow {
namespace {

using Json = nlohmann::ordered_json;

struct Context {
  const ScenarioConfig& config;
  const FlowBackground& bg;
  Report& report;
  Json& summary;
};

double tolerance(const ScenarioConfig& c, const std::string& check, double fallback) {
  const auto it = c.tolerances.find(check);
  return it == c.tolerances.end() ? fallback : it->second;
}

bool holds(double measured, Relation r, double threshold) {
  switch (r) {
    case Relation::AtMost: return measured <= threshold;
    case Relation::AtLeast: return measured >= threshold;
    case Relation::Below: return measured < threshold;
  }
  return false;
}

void add_row(Context& ctx, const std::string& check, const std::string& family, double measured,
             Relation relation, double fallback, double runtime_ms) {
  ReportRow row;
  row.check = check;
  row.digest = fnv1a(ctx.config.canonical + "\n" + check);
  row.measured = measured;
  row.relation = relation;
  row.threshold = tolerance(ctx.config, family, fallback);
  row.pass = holds(measured, relation, row.threshold);
  row.runtime_ms = runtime_ms;
  ctx.report.rows.push_back(row);
}

void add_row(Context& ctx, const std::string& check, double measured, Relation relation,
             double fallback, double runtime_ms) {
  add_row(ctx, check, check, measured, relation, fallback, runtime_ms);
}

class Stopwatch {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

bool all_flat(const FlowBackground& bg) {
  for (const Factor& f : bg.factors()) {
    if (f.kind != FactorKind::Flat) return false;
  }
  return true;
}

// Uniform on tori and spheres; hyperbolic factors draw from the model ball
// of radius 1/2 about the origin of the hyperboloid.
Vec random_point(const FlowBackground& bg, SeededRng& rng) {
  Vec x(bg.coord_count());
  for (const Factor& f : bg.factors()) {
    auto block = x.segment(f.offset, f.coord_count());
    switch (f.kind) {
      case FactorKind::Flat:
        for (int i = 0; i < f.dim; ++i) block(i) = rng.uniform(0.0, f.lattice[i]);
        break;
      case FactorKind::Sphere: {
        for (int i = 0; i <= f.dim; ++i) block(i) = rng.normal();
        block /= block.norm();
        break;
      }
      case FactorKind::Hyperbolic: {
        Vec xi(f.dim);
        for (int i = 0; i < f.dim; ++i) xi(i) = rng.normal();
        const double r = 0.5 * std::pow(rng.uniform(), 1.0 / f.dim);
        xi *= r / xi.norm();
        block(0) = std::cosh(r);
        block.tail(f.dim) = std::sinh(r) / r * xi;
        break;
      }
    }
  }
  return bg.canonical(x);
}

// Tangent vector with g(t)-length at most speed.
Vec random_tangent(const FlowBackground& bg, const Vec& x, double t, double speed, SeededRng& rng) {
  Vec xi(bg.dim());
  for (int i = 0; i < bg.dim(); ++i) xi(i) = rng.normal();
  xi *= speed * rng.uniform() / xi.norm();
  return bg.orthonormal_frame(x, t) * xi;
}

std::pair<double, double> random_times(const FlowBackground& bg, SeededRng& rng) {
  const double t_max = bg.t_max();
  const double tau1 = t_max * rng.uniform(0.02, 0.25);
  return {tau1, tau1 + t_max * rng.uniform(0.1, 0.5)};
}

std::uint64_t suite_seed(const ScenarioConfig& c, const std::string& suite) {
  return c.sampling.seed ^ fnv1a(suite);
}

double flat_closed_form(const FlowBackground& bg, const Vec& x, double tau1, const Vec& y,
                        double tau2) {
  double total = 0.0;
  for (const Factor& f : bg.factors()) {
    double best = std::numeric_limits<double>::infinity();
    const Vec d = y.segment(f.offset, f.dim) - x.segment(f.offset, f.dim);
    const int combos = static_cast<int>(std::pow(3, f.dim));
    for (int c = 0; c < combos; ++c) {
      Vec e = d;
      int code = c;
      for (int i = 0; i < f.dim; ++i) {
        e(i) += (code % 3 - 1) * f.lattice[i];
        code /= 3;
      }
      best = std::min(best, e.squaredNorm());
    }
    total += f.scale0 * best;
  }
  return total / (2.0 * (std::sqrt(tau2) - std::sqrt(tau1)));
}

Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

void suite_ldist(Context& ctx) {
  const ScenarioConfig& c = ctx.config;
  const FlowBackground& bg = ctx.bg;
  const GeodesicOptions& go = c.geodesic;
  Json& out = ctx.summary;

  if (!c.pairs.empty()) {
    Json pairs = Json::array();
    for (std::size_t k = 0; k < c.pairs.size(); ++k) {
      const Stopwatch clock;
      const LdistPair& p = c.pairs[k];
      const DistanceResult r = l_distance(bg, p.x, p.tau1, p.y, p.tau2, go);
      Json j;
      j["q"] = r.q;
      j["multiplicity_hint"] = r.multiplicity_hint;
      if (p.expected) {
        j["expected"] = *p.expected;
        add_row(ctx, "ldist.pair" + std::to_string(k), "ldist.pair", std::abs(r.q - *p.expected),
                Relation::AtMost, 1e-6, clock.ms());
      }
      pairs.push_back(j);
    }
    out["pairs"] = pairs;
  }

  SeededRng rng(suite_seed(c, "ldist"));
  if (c.random_pairs > 0 && all_flat(bg)) {
    const Stopwatch clock;
    struct Draw {
      Vec x, y;
      double tau1, tau2;
    };
    std::vector<Draw> draws;
    for (int i = 0; i < c.random_pairs; ++i) {
      Draw d;
      d.x = random_point(bg, rng);
      d.y = random_point(bg, rng);
      std::tie(d.tau1, d.tau2) = random_times(bg, rng);
      draws.push_back(d);
    }
    const std::vector<double> errs = parallel_map<double>(draws.size(), [&](std::size_t i) {
      const Draw& d = draws[i];
      const double q = l_distance(bg, d.x, d.tau1, d.y, d.tau2, go).q;
      return std::abs(q - flat_closed_form(bg, d.x, d.tau1, d.y, d.tau2));
    });
    const double worst = *std::max_element(errs.begin(), errs.end());
    out["flat_oracle"] = {{"pairs", c.random_pairs}, {"max_error", worst}};
    add_row(ctx, "ldist.flat_oracle", worst, Relation::AtMost, 1e-6, clock.ms());
  }

  if (c.shots > 0) {
    const Stopwatch clock;
    struct Draw {
      Vec x, Z;
      double tau1, tau2;
    };
    std::vector<Draw> draws;
    for (int i = 0; i < c.shots; ++i) {
      Draw d;
      d.x = random_point(bg, rng);
      std::tie(d.tau1, d.tau2) = random_times(bg, rng);
      d.Z = random_tangent(bg, d.x, d.tau1, c.shot_speed, rng);
      draws.push_back(d);
    }
    const std::vector<double> res = parallel_map<double>(draws.size(), [&](std::size_t i) {
      const Draw& d = draws[i];
      const LGeodesic geo = shoot(bg, d.x, d.tau1, d.Z, d.tau2, go);
      return first_variation_residual(geo.path, bg);
    });
    const double worst = *std::max_element(res.begin(), res.end());
    out["stationarity"] = {{"shots", c.shots}, {"max_residual", worst}};
    add_row(ctx, "ldist.stationarity", worst, Relation::AtMost, 1e-8, clock.ms());
  }

  if (c.minimizers > 0) {
    const Stopwatch clock;
    struct Draw {
      Vec x, y;
      double tau1, tau2;
    };
    std::vector<Draw> draws;
    for (int i = 0; i < c.minimizers; ++i) {
      Draw d;
      d.x = random_point(bg, rng);
      d.y = random_point(bg, rng);
      std::tie(d.tau1, d.tau2) = random_times(bg, rng);
      draws.push_back(d);
    }
    struct Defects {
      double additivity = 0.0;
      double dqdt = 0.0;
    };
    const std::vector<Defects> res = parallel_map<Defects>(draws.size(), [&](std::size_t i) {
      const Draw& d = draws[i];
      const DistanceResult r = l_distance(bg, d.x, d.tau1, d.y, d.tau2, go);
      const LGeodesic& geo = r.geodesic;
      const std::size_t m = geo.path.size() / 2;
      const double tm = geo.path.t(m);
      const Vec mid = bg.canonical(geo.path.points[m]);
      Defects out;
      const double q1 = l_distance(bg, d.x, d.tau1, mid, tm, go).q;
      const double q2 = l_distance(bg, mid, tm, d.y, d.tau2, go).q;
      out.additivity = std::abs(q1 + q2 - r.q);

      // d/dt Q(x, tau1; gamma(t), t) = sqrt(t) (scal + |gamma'|^2)
      const double h = 1e-3 * (tm - d.tau1);
      const Vec up = l_exp(bg, d.x, d.tau1, geo.Z, tm + h, go);
      const Vec down = l_exp(bg, d.x, d.tau1, geo.Z, tm - h, go);
      const double fd = (l_distance(bg, d.x, d.tau1, up, tm + h, go).q -
                         l_distance(bg, d.x, d.tau1, down, tm - h, go).q) /
                        (2.0 * h);
      const Vec& vel = geo.velocities[m];
      const double speed2 = bg.inner(vel, vel, tm) / (4.0 * tm);
      const double exact = std::sqrt(tm) * (bg.scal(tm) + speed2);
      out.dqdt = std::abs(fd - exact) / std::max(std::abs(exact), 1e-12);
      return out;
    });
    double add = 0.0, rel = 0.0;
    for (const Defects& d : res) {
      add = std::max(add, d.additivity);
      rel = std::max(rel, d.dqdt);
    }
    const double ms = clock.ms();
    out["minimizers"] = {{"count", c.minimizers}, {"max_additivity_defect", add},
                         {"max_dqdt_relative_error", rel}};
    add_row(ctx, "ldist.additivity", add, Relation::AtMost, 1e-5, ms);
    add_row(ctx, "ldist.dqdt", rel, Relation::AtMost, 1e-4, ms);
  }
}

struct TrackStats {
  double trace = 0.0;
  double order = 0.0;
  double convexity = 0.0;
  double symmetry = 0.0;
  double frame = 0.0;
  double closed_form = -1.0;  // negative when no closed form applies
  std::vector<std::pair<double, double>> h;
  std::vector<std::pair<double, double>> det;
};

void suite_jacobi(Context& ctx) {
  const ScenarioConfig& c = ctx.config;
  const FlowBackground& bg = ctx.bg;
  const Stopwatch clock;
  JacobiOptions opts;
  opts.geodesic = c.geodesic;
  const bool flat = all_flat(bg);
  const bool curved = !flat;

  struct Job {
    const PotentialField* phi;
    Vec x;
    double alpha;  // quadratic amplitude for the closed form, NaN otherwise
  };
  SeededRng rng(suite_seed(c, "jacobi"));
  std::vector<PotentialField> alpha_fields;
  Vec center;
  if (flat) {
    center = c.basepoint.size() > 0 ? c.basepoint : Vec(bg.coord_count());
    if (c.basepoint.size() == 0) {
      for (const Factor& f : bg.factors()) {
        for (int i = 0; i < f.dim; ++i) center(f.offset + i) = 0.5 * f.lattice[i];
      }
    }
    for (double a : c.alphas) alpha_fields.push_back(PotentialField::quadratic(bg, a, center));
  }
  std::vector<Job> jobs;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0; k < c.tracks; ++k) {
    const Vec x = random_point(bg, rng);
    jobs.push_back({&c.potential, x, nan});
  }
  for (std::size_t a = 0; a < alpha_fields.size(); ++a) {
    for (int k = 0; k < c.tracks; ++k) {
      // stay inside the cell where the quadratic is smooth
      Vec x = center;
      for (const Factor& f : bg.factors()) {
        for (int i = 0; i < f.dim; ++i) x(f.offset + i) += rng.uniform(-0.25, 0.25) * f.lattice[i];
      }
      jobs.push_back({&alpha_fields[a], bg.canonical(x), c.alphas[a]});
    }
  }
  const std::vector<double> s = uniform_s_nodes(c.tau1, c.tau2, std::max(c.geodesic.nodes, kMinPathNodes));
  const std::vector<TrackStats> stats = parallel_map<TrackStats>(jobs.size(), [&](std::size_t i) {
    const Job& job = jobs[i];
    const LGeodesic geo = shoot_on_nodes(bg, job.x, job.phi->flow_datum(bg, job.x, c.tau1), s, c.geodesic);
    const JacobiTrack tr = jacobi_track(bg, geo, *job.phi, opts);
    TrackStats st;
    const double r2 = trace_identity_residual(bg, tr, geo, 2);
    st.trace = r2;
    if (curved) st.order = std::log2(trace_identity_residual(bg, tr, geo, 4) / r2);
    st.h = h_samples(bg, geo, tr);
    st.convexity = min_second_difference(st.h);
    st.symmetry = symmetry_defect(tr);
    st.frame = tr.frame_error;
    for (std::size_t k = 0; k < tr.t_nodes.size(); ++k) st.det.emplace_back(tr.t_nodes[k], tr.detA[k]);
    if (!std::isnan(job.alpha)) {
      double worst = 0.0;
      for (std::size_t k = 0; k < tr.s_nodes.size(); ++k) {
        const double want =
            std::pow(1.0 + job.alpha * (std::sqrt(c.tau1) - tr.s_nodes[k]), bg.dim());
        worst = std::max(worst, std::abs(tr.detA[k] - want));
      }
      st.closed_form = worst;
    }
    return st;
  });
  const double ms = clock.ms();

  double trace = 0.0, order_gap = 0.0, convex = std::numeric_limits<double>::infinity();
  double sym = 0.0, frame = 0.0, closed = -1.0;
  double order_lo = std::numeric_limits<double>::infinity(), order_hi = -order_lo;
  for (const TrackStats& st : stats) {
    trace = std::max(trace, st.trace);
    convex = std::min(convex, st.convexity);
    sym = std::max(sym, st.symmetry);
    frame = std::max(frame, st.frame);
    closed = std::max(closed, st.closed_form);
    if (curved) {
      order_gap = std::max(order_gap, std::abs(st.order - 2.0));
      order_lo = std::min(order_lo, st.order);
      order_hi = std::max(order_hi, st.order);
    }
  }
  Json& out = ctx.summary;
  out["tracks"] = stats.size();
  out["max_trace_residual"] = trace;
  if (curved) out["trace_order_range"] = {order_lo, order_hi};
  out["min_h_second_difference"] = convex;
  out["max_symmetry_defect"] = sym;
  out["max_frame_error"] = frame;
  if (closed >= 0.0) {
    out["alphas"] = c.alphas;
    out["max_detA_error"] = closed;
    add_row(ctx, "jacobi.detA_closed_form", closed, Relation::AtMost, 1e-6, ms);
  }
  add_row(ctx, "jacobi.trace_identity", trace, Relation::AtMost, 1e-3, ms);
  if (curved) add_row(ctx, "jacobi.trace_order", order_gap, Relation::AtMost, 0.3, ms);
  add_row(ctx, "jacobi.h_convexity", convex, Relation::AtLeast, -1e-6, ms);
  add_row(ctx, "jacobi.symmetry", sym, Relation::AtMost, 1e-5, ms);
  add_row(ctx, "jacobi.frame", frame, Relation::AtMost, 1e-8, ms);
  if (!stats.empty()) {
    ctx.report.plots.push_back({"h", stats.front().h});
    ctx.report.plots.push_back({"detA", stats.front().det});
  }
}

TheoremScenario theorem_scenario(const ScenarioConfig& c) {
  TheoremScenario sc;
  sc.tau1 = c.tau1;
  sc.tau = c.tau;
  sc.tau2 = c.tau2;
  sc.u1 = c.u1;
  sc.u2 = c.u2;
  sc.guide = c.potential;
  sc.sampling = c.sampling;
  sc.options.geodesic = c.geodesic;
  return sc;
}

void suite_corollary(Context& ctx) {
  const ScenarioConfig& c = ctx.config;
  const FlowBackground& bg = ctx.bg;
  const TheoremScenario sc = theorem_scenario(c);
  Json& out = ctx.summary;
  out["lambda"] = validate_scenario(bg, sc);
  const Stopwatch clock;
  SeededRng rng(suite_seed(c, "corollary"));
  std::vector<Vec> xs;
  for (int i = 0; i < c.sampling.jacobian_samples; ++i) xs.push_back(random_point(bg, rng));
  const std::vector<DensitySlack> slacks = parallel_map<DensitySlack>(
      xs.size(), [&](std::size_t i) { return density_inequality(bg, sc, c.potential, xs[i]); });
  double jac = std::numeric_limits<double>::infinity(), dens = jac;
  for (const DensitySlack& d : slacks) {
    jac = std::min(jac, d.jacobian.slack);
    dens = std::min(dens, d.slack);
  }
  const double ms = clock.ms();
  out["samples"] = xs.size();
  out["min_jacobian_slack"] = jac;
  out["min_density_slack"] = dens;
  add_row(ctx, "corollary.jacobian_slack", jac, Relation::AtLeast, -1e-5, ms);
  add_row(ctx, "corollary.density_slack", dens, Relation::AtLeast, -1e-4, ms);
  if (bg.compact()) {
    const Stopwatch mass_clock;
    const double mass = corollary_mass(bg, sc, c.potential);
    out["mass_v"] = mass;
    add_row(ctx, "corollary.mass", mass, Relation::AtLeast, 1.0 - 5e-3, mass_clock.ms());
  } else {
    out["mass_v"] = "skipped: non-compact background";
  }
}

void suite_theorem2(Context& ctx) {
  const ScenarioConfig& c = ctx.config;
  const Stopwatch clock;
  const Theorem2Result r = theorem2_check(ctx.bg, theorem_scenario(c));
  Json& out = ctx.summary;
  out["lambda"] = r.lambda;
  out["mass_v"] = r.mass_v;
  out["mass_u1"] = r.mass_u1;
  out["mass_u2"] = r.mass_u2;
  out["bound"] = r.bound;
  out["slack"] = r.slack;
  out["samples_used"] = r.samples_used;
  out["samples_dropped"] = r.samples_dropped;
  out["cells_hit"] = r.cells_hit;
  out["cells_total"] = r.cells_total;
  add_row(ctx, "theorem2.slack", r.slack, Relation::AtLeast, -5e-3, clock.ms());
}

// Largest weight mismatch between the interpolated support and the expected
// one; 1 when a point is missing or extra.
double support_mismatch(const WeightedPoints& got, const std::vector<Vec>& pts,
                        const std::vector<double>& weights) {
  std::vector<Vec> want;
  std::vector<double> mass;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto it = std::find_if(want.begin(), want.end(), [&](const Vec& v) { return v == pts[i]; });
    if (it == want.end()) {
      want.push_back(pts[i]);
      mass.push_back(weights[i]);
    } else {
      mass[it - want.begin()] += weights[i];
    }
  }
  if (got.points.size() != want.size()) return 1.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < got.points.size(); ++i) {
    auto it = std::find_if(want.begin(), want.end(), [&](const Vec& v) { return v == got.points[i]; });
    if (it == want.end()) return 1.0;
    worst = std::max(worst, std::abs(mass[it - want.begin()] - got.weights[i]));
  }
  return worst;
}

void suite_ot(Context& ctx) {
  const ScenarioConfig& c = ctx.config;
  const FlowBackground& bg = ctx.bg;
  const Stopwatch clock;
  SeededRng rng(suite_seed(c, "ot"));
  const double tau_mid = c.tau > c.tau1 ? c.tau : 0.5 * (c.tau1 + c.tau2);
  double gap = 0.0, marg = 0.0, ends = 0.0, interior = 0.0;
  for (int inst = 0; inst < c.ot_instances; ++inst) {
    const int n = 2 + inst % (c.ot_max_points - 1);
    std::vector<Vec> a, b;
    for (int i = 0; i < n; ++i) a.push_back(random_point(bg, rng));
    for (int i = 0; i < n; ++i) b.push_back(random_point(bg, rng));
    const std::vector<double> w(n, 1.0 / n);
    const TransportPlan plan = transport_plan(bg, a, w, c.tau1, b, w, c.tau2, c.geodesic);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double brute = std::numeric_limits<double>::infinity();
    do {
      double cost = 0.0;
      for (int i = 0; i < n; ++i) cost += plan.costs(i, perm[i]) / n;
      brute = std::min(brute, cost);
    } while (std::next_permutation(perm.begin(), perm.end()));
    gap = std::max(gap, std::abs(plan.cost - brute) / std::max(1.0, std::abs(brute)));
    marg = std::max(marg, marginal_error(plan));
    ends = std::max(ends, support_mismatch(interpolate_plan(bg, plan, c.tau1, c.tau1, c.tau2, c.geodesic),
                                           plan.source_points, plan.source_weights));
    ends = std::max(ends, support_mismatch(interpolate_plan(bg, plan, c.tau1, c.tau2, c.tau2, c.geodesic),
                                           plan.target_points, plan.target_weights));
    const WeightedPoints mid = interpolate_plan(bg, plan, c.tau1, tau_mid, c.tau2, c.geodesic);
    double total = 0.0;
    for (double v : mid.weights) total += v;
    interior = std::max(interior, std::abs(total - 1.0));
  }
  const double ms = clock.ms();
  Json& out = ctx.summary;
  out["instances"] = c.ot_instances;
  out["max_cost_gap"] = gap;
  out["max_marginal_error"] = marg;
  out["max_endpoint_mismatch"] = ends;
  out["max_interior_mass_error"] = interior;
  add_row(ctx, "ot.cost_gap", gap, Relation::AtMost, 1e-9, ms);
  add_row(ctx, "ot.marginals", std::max(marg, interior), Relation::AtMost, 1e-9, ms);
  add_row(ctx, "ot.endpoints", ends, Relation::AtMost, 1e-12, ms);
}

// Flat regime: every torus side at least 20 sqrt(tau_max) in g(0) lengths.
bool flat_regime(const FlowBackground& bg, double tau_max) {
  if (!all_flat(bg)) return false;
  for (const Factor& f : bg.factors()) {
    for (double side : f.lattice) {
      if (side * std::sqrt(f.scale0) < 20.0 * std::sqrt(tau_max)) return false;
    }
  }
  return true;
}

void suite_reduced_volume(Context& ctx) {
  const ScenarioConfig& c = ctx.config;
  const FlowBackground& bg = ctx.bg;
  const Stopwatch clock;
  const ReducedVolumeCurve curve = monotonicity_curve(bg, c.basepoint, c.tau_grid, c.volume);
  const double ms = clock.ms();
  Json& out = ctx.summary;
  out["basepoint"] = vec_json(c.basepoint);
  out["tau_grid"] = curve.tau_grid;
  out["values"] = curve.values;
  out["quadrature_error_estimate"] = curve.quadrature_error_estimate;
  out["worst_violation"] = curve.worst_violation;
  double resolution = 0.0;
  for (std::size_t k = 0; k < curve.values.size(); ++k) {
    resolution = std::max(resolution, curve.quadrature_error_estimate[k] / curve.values[k]);
  }
  add_row(ctx, "reduced_volume.monotone", curve.worst_violation, Relation::AtMost, 0.0, ms);
  add_row(ctx, "reduced_volume.resolution", resolution, Relation::AtMost, c.volume.budget, ms);
  const double gaussian = std::pow(4.0 * std::numbers::pi, 0.5 * bg.dim());
  if (flat_regime(bg, c.tau_grid.back())) {
    double worst = 0.0;
    for (double v : curve.values) worst = std::max(worst, std::abs(v / gaussian - 1.0));
    out["flat_value"] = gaussian;
    add_row(ctx, "reduced_volume.flat_constancy", worst, Relation::AtMost, 1e-3, ms);
  } else if (bg.kind() == ModelKind::RoundSphere) {
    double excess = -std::numeric_limits<double>::infinity();
    for (double v : curve.values) excess = std::max(excess, v - gaussian);
    out["flat_value"] = gaussian;
    add_row(ctx, "reduced_volume.below_flat", excess, Relation::Below, 0.0, ms);
  }
  PlotSeries plot{"reduced_volume", {}};
  for (std::size_t k = 0; k < curve.values.size(); ++k) {
    plot.points.emplace_back(curve.tau_grid[k], curve.values[k]);
  }
  ctx.report.plots.push_back(plot);
}

void suite_section3(Context& ctx) {
  const ScenarioConfig& c = ctx.config;
  const Stopwatch clock;
  Section3Options opts;
  opts.n_samples = c.n_samples;
  opts.volume = c.volume;
  const Section3Result r =
      section3_experiment(ctx.bg, c.basepoint, c.tau, c.tau2, c.tau1_list, opts);
  const double ms = clock.ms();
  Json& out = ctx.summary;
  out["tau"] = c.tau;
  out["tau2"] = c.tau2;
  out["volume_tau"] = r.volume_tau.value;
  out["volume_tau_error"] = r.volume_tau.error;
  out["volume_tau2"] = r.volume_tau2.value;
  out["volume_tau2_error"] = r.volume_tau2.error;
  Json rows = Json::array();
  double u1_step = -std::numeric_limits<double>::infinity();
  double u2_step = u1_step;
  for (std::size_t k = 0; k < r.rows.size(); ++k) {
    const Section3Row& w = r.rows[k];
    rows.push_back({{"tau1", w.tau1},
                    {"lambda", w.lambda},
                    {"N", w.N},
                    {"mass_u1", w.mass_u1},
                    {"mass_u1_pow", w.mass_u1_pow},
                    {"mass_u2", w.mass_u2},
                    {"mass_u2_pow", w.mass_u2_pow},
                    {"slack", w.slack}});
    if (k > 0) {
      const Section3Row& prev = r.rows[k - 1];
      u1_step = std::max(u1_step, std::abs(w.mass_u1_pow - 1.0) - std::abs(prev.mass_u1_pow - 1.0));
      u2_step = std::max(u2_step, std::abs(w.mass_u2_pow - r.volume_tau2.value) -
                                      std::abs(prev.mass_u2_pow - r.volume_tau2.value));
    }
  }
  out["rows"] = rows;
  out["u2_gap"] = r.u2_gap;
  add_row(ctx, "section3.slack", r.min_slack, Relation::AtLeast, 0.0, ms);
  add_row(ctx, "section3.u1_limit", std::abs(r.rows.back().mass_u1_pow - 1.0), Relation::AtMost,
          0.05, ms);
  if (r.rows.size() > 1) {
    add_row(ctx, "section3.u1_trend", u1_step, Relation::Below, 0.0, ms);
    add_row(ctx, "section3.u2_trend", u2_step, Relation::Below, 0.0, ms);
  }
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9e", v);
  return buf;
}

}  // namespace

std::vector<std::string> known_checks() {
  return {"ldist.pair",           "ldist.flat_oracle",         "ldist.stationarity",
          "ldist.additivity",     "ldist.dqdt",                "jacobi.detA_closed_form",
          "jacobi.trace_identity", "jacobi.trace_order",       "jacobi.h_convexity",
          "jacobi.symmetry",      "jacobi.frame",              "corollary.jacobian_slack",
          "corollary.density_slack", "corollary.mass",         "theorem2.slack",
          "ot.cost_gap",          "ot.marginals",              "ot.endpoints",
          "reduced_volume.monotone", "reduced_volume.resolution", "reduced_volume.flat_constancy",
          "reduced_volume.below_flat", "section3.slack",       "section3.u1_limit",
          "section3.u1_trend",    "section3.u2_trend"};
}

const char* to_string(Relation r) {
  switch (r) {
    case Relation::AtMost: return "<=";
    case Relation::AtLeast: return ">=";
    case Relation::Below: return "<";
  }
  return "?";
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool Report::passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.pass; });
}

const ReportRow* Report::find(const std::string& check) const {
  for (const ReportRow& r : rows) {
    if (r.check == check) return &r;
  }
  return nullptr;
}

std::string Report::csv() const {
  std::string out = "check,inputs_digest,measured,relation,threshold,pass\n";
  for (const ReportRow& r : rows) {
    out += r.check + "," + hex(r.digest) + "," + number(r.measured) + "," + to_string(r.relation) +
           "," + number(r.threshold) + "," + (r.pass ? "true" : "false") + "\n";
  }
  return out;
}

std::string Report::runtime_csv() const {
  std::string out = "check,runtime_ms\n";
  for (const ReportRow& r : rows) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3f", r.runtime_ms);
    out += r.check + "," + buf + "\n";
  }
  return out;
}

Report run_scenario(const ScenarioConfig& config, const std::vector<std::string>& suites) {
  Report report;
  report.scenario = config.name;
  std::vector<std::string> order;
  for (const std::string& s : suites) {
    if (s == "all") {
      order.insert(order.end(), config.suites.begin(), config.suites.end());
    } else {
      const std::vector<std::string> names = known_suites();
      if (std::find(names.begin(), names.end(), s) == names.end()) {
        fail(ErrorCode::InvalidArgument, "unknown suite '" + s + "'");
      }
      order.push_back(s);
    }
  }
  const FlowBackground& bg = *config.background;
  Json summary;
  summary["scenario"] = config.name;
  summary["inputs_digest"] = hex(fnv1a(config.canonical));
  summary["background"] = {{"kind", to_string(bg.kind())}, {"dim", bg.dim()}, {"T", bg.t_max()}};
  summary["seed"] = config.sampling.seed;
  Json suite_out = Json::object();
  const std::map<std::string, std::function<void(Context&)>> table = {
      {"ldist", suite_ldist},         {"jacobi", suite_jacobi},
      {"corollary", suite_corollary}, {"theorem2", suite_theorem2},
      {"ot", suite_ot},               {"reduced-volume", suite_reduced_volume},
      {"section3", suite_section3}};
  for (const std::string& name : order) {
    Json details = Json::object();
    Context ctx{config, bg, report, details};
    const Stopwatch clock;
    try {
      table.at(name)(ctx);
    } catch (const std::exception& e) {
      // record the failure and keep going
      details["error"] = e.what();
      ReportRow row;
      row.check = (name == "reduced-volume" ? std::string("reduced_volume") : name) + ".error";
      row.digest = fnv1a(config.canonical + "\n" + row.check);
      row.measured = 1.0;
      row.relation = Relation::AtMost;
      row.threshold = 0.0;
      row.pass = false;
      row.runtime_ms = clock.ms();
      report.rows.push_back(row);
    }
    suite_out[name] = details;
  }
  summary["suites"] = suite_out;
  std::size_t passed = 0;
  Json checks = Json::array();
  for (const ReportRow& r : report.rows) {
    passed += r.pass ? 1 : 0;
    checks.push_back({{"check", r.check},
                      {"measured", r.measured},
                      {"relation", to_string(r.relation)},
                      {"threshold", r.threshold},
                      {"pass", r.pass}});
  }
  summary["checks"] = checks;
  summary["totals"] = {{"checks", report.rows.size()},
                       {"passed", passed},
                       {"failed", report.rows.size() - passed}};
  summary["passed"] = report.passed();
  report.summary = summary.dump(2) + "\n";
  return report;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

void write_report(const Report& report, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const std::filesystem::path base = std::filesystem::path(dir) / report.scenario;
  write_text(base.string() + ".csv", report.csv());
  write_text(base.string() + ".summary.json", report.summary);
  write_text(base.string() + ".runtime.csv", report.runtime_csv());
}

void write_plotdata(const Report& report, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  for (const PlotSeries& s : report.plots) {
    std::string text = "# x y\n";
    for (const auto& [x, y] : s.points) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.12e %.12e\n", x, y);
      text += buf;
    }
    write_text((std::filesystem::path(dir) / (report.scenario + "_" + s.name + ".dat")).string(),
               text);
  }
}

}  // namespace lflow
