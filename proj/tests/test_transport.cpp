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

#include "doctest.h"
#include "lflow/error.hpp"
#include "lflow/parallel.hpp"
#include "lflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace lflow;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<int>(v.size()));
  int i = 0;
  for (double a : v) out[i++] = a;
  return out;
}

Vec sphere_point(double theta, double phi) {
  return vec({std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)});
}

double brute_force_assignment(const Mat& c) {
  const int n = static_cast<int>(c.rows());
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  double best = 1e300;
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += c(i, p[i]);
    best = std::min(best, s);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

TheoremScenario flat_scenario() {
  TheoremScenario sc;
  sc.tau1 = 1.0;
  sc.tau2 = 4.0;
  sc.tau = tau_from_lambda(1.0, 4.0, 0.5);
  sc.sampling.quad_cells = 16;
  sc.sampling.z_cells = 16;
  sc.sampling.sample_cells = 16;
  return sc;
}

}  // namespace

TEST_CASE("quadrature oracles") {
  auto torus = FlowBackground::flat_torus(2);
  QuadratureGrid tg(torus, 32);
  CHECK(tg.total_weight() == doctest::Approx(1.0).epsilon(1e-14));
  const double sigma = 0.1;
  auto g = DensityField::gaussian(torus, vec({0.3, 0.7}), sigma);
  CHECK(std::abs(g.mass(torus, tg, 0.0) - 2 * std::numbers::pi * sigma * sigma) < 1e-10);

  auto s2 = FlowBackground::round_sphere(2, 1.0, 10.0);
  QuadratureGrid sg(s2, 64);
  CHECK(sg.total_weight() == doctest::Approx(4 * std::numbers::pi).epsilon(1e-13));
  auto vm = DensityField::von_mises(s2, vec({0.0, 0.0, 1.0}), 2.0);
  const double oracle = 4 * std::numbers::pi * std::sinh(2.0) / 2.0;
  CHECK(std::abs(vm.mass(s2, sg, 0.0) / oracle - 1.0) < 1e-3);
  // mass in g(t) scales by c(t)^{n/2}
  CHECK(vm.mass(s2, sg, 0.5) == doctest::Approx(2.0 * vm.mass(s2, sg, 0.0)).epsilon(1e-13));

  auto s3 = FlowBackground::round_sphere(3, 1.0, 10.0);
  QuadratureGrid g3(s3, 8);
  CHECK(g3.total_weight() == doctest::Approx(2 * std::numbers::pi * std::numbers::pi).epsilon(1e-13));

  for (std::size_t i = 0; i < sg.size(); i += 97) CHECK(sg.locate(sg.point(i)) == i);
  Mat rot = Eigen::AngleAxisd(0.4, Eigen::Vector3d(1, 1, 0).normalized()).toRotationMatrix();
  QuadratureGrid rg(s2, 16, rot);
  for (std::size_t i = 0; i < rg.size(); i += 7) CHECK(rg.locate(rg.point(i)) == i);
  auto hyp = FlowBackground::hyperbolic(2, 10.0, 4.0);
  CHECK_THROWS_AS(QuadratureGrid(hyp, 8), Error);
}

TEST_CASE("pushforward densities") {
  auto bg = FlowBackground::flat_torus(2);
  const Vec x = vec({0.3, 0.3});
  auto u1 = DensityField::uniform();
  CHECK(pushforward_density(bg, PotentialField(), u1, 1.0, 4.0, x).value == doctest::Approx(1.0));
  auto phi = PotentialField::quadratic(bg, 0.3, vec({0.5, 0.5}));
  const Pushforward p = pushforward_density(bg, phi, u1, 1.0, 4.0, x);
  CHECK(std::abs(p.value - 1.0 / 0.49) < 1e-6);

  // total image volume: int J(x, t) dvol_{tau1} = vol_{g(t)}(M)
  auto sphere = FlowBackground::round_sphere(2, 1.0, 10.0);
  auto zon = PotentialField::zonal(sphere, 0.2, vec({0.0, 0.0, 1.0}), {0.0, 1.0, 0.5});
  QuadratureGrid grid(sphere, 12);
  double vol = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    vol += grid.weight(i) *
           pushforward_density(sphere, zon, u1, 1.0, 2.0, grid.point(i)).jacobian;
  }
  vol *= sphere.volume_factor(1.0);
  CHECK(std::abs(vol / (4 * std::numbers::pi * 5.0) - 1.0) < 2e-3);
}

TEST_CASE("density inequality slack") {
  auto bg = FlowBackground::flat_torus(2);
  TheoremScenario sc = flat_scenario();
  DensitySlack d = density_inequality(bg, sc, PotentialField(), vec({0.2, 0.4}));
  CHECK(d.slack >= 0.0);
  // phi = 0 and u1 = 1: the density slack is tau^{n/2} times the Jacobian slack
  CHECK(std::abs(d.slack - sc.tau * d.jacobian.slack) < 1e-12);
  auto phi = PotentialField::quadratic(bg, 0.3, vec({0.5, 0.5}));
  sc.u1 = DensityField::gaussian(bg, vec({0.5, 0.5}), 0.2);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 8; ++i) {
    CHECK(density_inequality_slack(bg, sc, phi, vec({u(rng), u(rng)})) >= -1e-8);
  }
  auto sphere = FlowBackground::round_sphere(2, 1.0, 10.0);
  TheoremScenario ss = flat_scenario();
  ss.u1 = DensityField::von_mises(sphere, vec({0.0, 0.0, 1.0}), 1.0);
  auto zon = PotentialField::zonal(sphere, 0.2, vec({0.0, 0.0, 1.0}), {0.0, 1.0, 0.5});
  for (int i = 0; i < 8; ++i) {
    const Vec x = sphere_point(0.2 + 2.7 * u(rng), 6.0 * u(rng));
    CHECK(density_inequality_slack(sphere, ss, zon, x) >= -1e-4);
  }
}

TEST_CASE("corollary mass") {
  auto bg = FlowBackground::flat_torus(2);
  TheoremScenario sc = flat_scenario();
  QuadratureGrid grid(bg, 8);
  CHECK(corollary_mass(bg, grid, std::vector<double>(grid.size(), 1.0), sc.tau) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(corollary_mass(bg, sc, PotentialField()) >= 1.0);
  sc.u1 = DensityField::gaussian(bg, vec({0.5, 0.5}), 0.2);
  sc.u1.normalize(bg, QuadratureGrid(bg, sc.sampling.quad_cells), sc.tau1);
  auto phi = PotentialField::quadratic(bg, 0.3, vec({0.5, 0.5}));
  CHECK(corollary_mass(bg, sc, phi) >= 1.0 - 2e-3);
}

TEST_CASE("minimal admissible v") {
  auto bg = FlowBackground::flat_torus(2);
  TheoremScenario sc = flat_scenario();
  sc.u1 = DensityField::gaussian(bg, vec({0.4, 0.5}), 0.15);
  sc.u2 = DensityField::gaussian(bg, vec({0.6, 0.5}), 0.15);
  // one straight geodesic through the center cell
  const Vec x = vec({0.45, 0.5});
  const Vec z = vec({0.06, 0.0});
  AdmissibleV v = minimal_admissible_v(bg, sc, {{x, z}});
  const double st = std::sqrt(sc.tau);
  const Vec at_tau = x + 2 * z * (st - 1.0);
  const Vec at_end = x + 2 * z * (2.0 - 1.0);
  const double q1 = (at_tau - x).squaredNorm() / (2 * (st - 1.0));
  const double q2 = (at_end - at_tau).squaredNorm() / (2 * (2.0 - st));
  const double l = 0.5;
  const double oracle = std::pow(std::sqrt(4.0) / sc.tau, 1.0) * std::exp(-(1 - l) / 2.0 * q1) *
                        std::sqrt(sc.u1.value(bg, x)) * std::exp(l / 4.0 * q2) *
                        std::sqrt(sc.u2.value(bg, at_end));
  const std::size_t cell = v.grid.locate(at_tau);
  CHECK(std::abs(v.values[cell] - oracle) < 1e-6);
  CHECK(v.used == 1);
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    CHECK(v.values[i] >= 0.0);
    if (i != cell) CHECK(v.values[i] == 0.0);
  }

  TheoremScenario zero = flat_scenario();
  zero.u1 = DensityField::uniform(0.0);
  Theorem2Result r = theorem2_check(bg, zero);
  CHECK(r.mass_v == 0.0);
  CHECK(r.slack == 0.0);
}

TEST_CASE("theorem 2 on flat uniform densities") {
  auto bg = FlowBackground::flat_torus(2);
  TheoremScenario sc = flat_scenario();
  Theorem2Result r = theorem2_check(bg, sc);
  CHECK(r.slack >= -2e-3);
  CHECK(r.cells_hit == r.cells_total);
  CHECK(r.samples_dropped == 0);
}

TEST_CASE("cost matrices") {
  auto bg = FlowBackground::flat_torus(2);
  const Mat c1 = cost_matrix(bg, {vec({0.2, 0.2})}, 1.0, {vec({0.2, 0.2})}, 4.0);
  CHECK(std::abs(c1(0, 0)) < 1e-14);
  const Mat c = cost_matrix(bg, {vec({0, 0}), vec({0.5, 0})}, 1.0, {vec({0.4, 0}), vec({0.9, 0})},
                            4.0);
  CHECK(std::abs(c(0, 0) - 0.08) < 1e-12);
  CHECK(std::abs(c(0, 1) - 0.005) < 1e-12);
  CHECK(std::abs(c(1, 0) - 0.005) < 1e-12);
  CHECK(std::abs(c(1, 1) - 0.08) < 1e-12);

  auto sphere = FlowBackground::round_sphere(2, 1.0, 10.0);
  std::vector<Vec> a = {sphere_point(0.3, 0.1), sphere_point(1.0, 2.0), sphere_point(2.0, -1.0)};
  std::vector<Vec> b = {sphere_point(0.5, 0.7), sphere_point(1.4, 2.5), sphere_point(2.6, 0.3)};
  const Mat rot = Eigen::AngleAxisd(1.1, Eigen::Vector3d(0.3, -0.5, 0.8).normalized())
                      .toRotationMatrix();
  std::vector<Vec> ra, rb;
  for (const Vec& p : a) ra.push_back(rot * p);
  for (const Vec& p : b) rb.push_back(rot * p);
  const Mat cs = cost_matrix(sphere, a, 1.0, b, 2.0);
  const Mat cr = cost_matrix(sphere, ra, 1.0, rb, 2.0);
  CHECK((cs - cr).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("discrete transport is exact") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 7;
    Mat c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = u(rng);
    const std::vector<double> w(n, 1.0 / n);
    const TransportPlan p = solve_discrete_ot(c, w, w);
    CHECK(marginal_error(p) <= 1e-9);
    CHECK(std::abs(p.cost - brute_force_assignment(c) / n) <= 1e-12);
    // never worse than the product coupling
    CHECK(p.cost <= c.sum() / (n * n) + 1e-15);
  }
  CHECK(solve_discrete_ot(Mat::Constant(1, 1, 0.7), {1.0}, {1.0}).weights(0, 0) == 1.0);
  // sorted supports on a line with quadratic cost: identity matching
  const int n = 7;
  Mat c(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c(i, j) = std::pow(0.1 * i - (0.13 * j + 0.05), 2);
  const TransportPlan p = solve_discrete_ot(c, std::vector<double>(n, 1.0), std::vector<double>(n, 1.0));
  for (int i = 0; i < n; ++i) CHECK(p.weights(i, i) == 1.0);
  // unequal weights
  const TransportPlan q = solve_discrete_ot(Mat::Random(3, 4).cwiseAbs(), {0.5, 0.3, 0.2},
                                            {0.1, 0.2, 0.3, 0.4});
  CHECK(marginal_error(q) <= 1e-12);
  CHECK_THROWS_AS(solve_discrete_ot(Mat::Zero(2, 2), {0.5, 0.5}, {0.5, 0.6}), Error);
}

TEST_CASE("plan interpolation") {
  auto bg = FlowBackground::flat_torus(2);
  const std::vector<Vec> src = {vec({0, 0}), vec({0.5, 0.5})};
  const std::vector<Vec> dst = {vec({0.4, 0}), vec({0.5, 0.7})};
  const std::vector<double> w = {0.5, 0.5};
  const TransportPlan plan = transport_plan(bg, src, w, 1.0, dst, w, 4.0);
  WeightedPoints a = interpolate_plan(bg, plan, 1.0, 1.0, 4.0);
  CHECK(a.points == src);
  CHECK(a.weights == w);
  WeightedPoints b = interpolate_plan(bg, plan, 1.0, 4.0, 4.0);
  CHECK(b.points == dst);
  const double tau = 16.0 / 9.0;
  WeightedPoints m = interpolate_plan(bg, plan, 1.0, tau, 4.0);
  CHECK((m.points[0] - vec({0.4 / 3.0, 0.0})).norm() < 1e-9);
  for (std::size_t k = 0; k < src.size(); ++k) {
    const double whole = l_distance(bg, src[k], 1.0, dst[k], 4.0).q;
    const double parts = l_distance(bg, src[k], 1.0, m.points[k], tau).q +
                         l_distance(bg, m.points[k], tau, dst[k], 4.0).q;
    CHECK(std::abs(whole - parts) <= 1e-5);
  }
}

TEST_CASE("parallel results do not depend on the worker count") {
  auto bg = FlowBackground::round_sphere(2, 1.0, 10.0);
  std::vector<Vec> a, b;
  for (int i = 0; i < 5; ++i) {
    a.push_back(sphere_point(0.3 + 0.4 * i, 0.5 * i));
    b.push_back(sphere_point(2.5 - 0.3 * i, 1.0 - 0.2 * i));
  }
  set_worker_count(1);
  const Mat c1 = cost_matrix(bg, a, 1.0, b, 2.0);
  set_worker_count(4);
  const Mat c4 = cost_matrix(bg, a, 1.0, b, 2.0);
  set_worker_count(0);
  CHECK(c1 == c4);
}
