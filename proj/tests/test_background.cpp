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
#include "lflow/background.hpp"
#include "lflow/error.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace lflow;

namespace {

Vec sphere_point(double theta, double phi) {
  Vec x(3);
  x << std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta);
  return x;
}

Vec hyperboloid_point(const Vec& u) {
  Vec x(u.size() + 1);
  x[0] = std::sqrt(1.0 + u.squaredNorm());
  x.tail(u.size()) = u;
  return x;
}

}  // namespace

TEST_CASE("flat metric is the static identity") {
  auto bg = FlowBackground::flat_torus(2);
  Vec x(2);
  x << 0.3, 0.9;
  const Mat g = metric_at(bg, x, 0.7);
  CHECK((g - Mat::Identity(2, 2)).norm() == 0.0);
  const CurvatureData cd = curvature_at(bg, x, 0.7);
  CHECK(cd.scal == 0.0);
  CHECK(cd.dscal_dt == 0.0);
  CHECK(cd.ricci.norm() == 0.0);
  for (double c : christoffel_at(bg, x, 0.7)) CHECK(c == 0.0);
  CHECK(flow_residual(bg, x, 0.7, 1e-4) == 0.0);
}

TEST_CASE("sphere metric scales with c(t)") {
  auto bg = FlowBackground::round_sphere(2, 1.0, 10.0);
  const Vec x = sphere_point(0.7, 0.4);
  // stereographic chart metric at u is 4/(1+|u|^2)^2 times identity
  const Vec u = bg.to_chart(x);
  const double conformal = 4.0 / std::pow(1.0 + u.squaredNorm(), 2);
  const Mat g = metric_at(bg, x, 0.5);
  CHECK(g(0, 0) == doctest::Approx(2.0 * conformal).epsilon(1e-13));
  CHECK(g(1, 1) == doctest::Approx(2.0 * conformal).epsilon(1e-13));
  CHECK(std::abs(g(0, 1)) < 1e-14);
}

TEST_CASE("hyperbolic metric scales with c(t)") {
  auto bg = FlowBackground::hyperbolic(2, 10.0, 4.0);
  Vec u(2);
  u << 0.3, -0.2;
  const Vec x = hyperboloid_point(u);
  const Vec b = bg.to_chart(x);
  const double conformal = 4.0 / std::pow(1.0 - b.squaredNorm(), 2);
  const Mat g = metric_at(bg, x, 1.0);
  CHECK(g(0, 0) == doctest::Approx(8.0 * conformal).epsilon(1e-13));
}

TEST_CASE("sphere curvature data") {
  auto bg = FlowBackground::round_sphere(2, 1.0, 10.0);
  const Vec x = sphere_point(1.1, 2.0);
  CurvatureData cd = curvature_at(bg, x, 0.0);
  CHECK(cd.scal == doctest::Approx(2.0).epsilon(1e-14));
  cd = curvature_at(bg, x, 0.5);
  CHECK(cd.scal == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cd.dscal_dt == doctest::Approx(-1.0).epsilon(1e-14));
  const double h = 1e-4;
  const double fd = (curvature_at(bg, x, 0.5 + h).scal - curvature_at(bg, x, 0.5 - h).scal) / (2 * h);
  CHECK(std::abs(fd - cd.dscal_dt) < 1e-6);
  CHECK(cd.grad_scal.norm() == 0.0);
  // Ric = (n-1)/c(t) g(t)
  const Mat g = metric_at(bg, x, 0.5);
  CHECK((cd.ricci - 0.5 * g).norm() < 1e-13);
}

TEST_CASE("christoffel symbols match metric finite differences") {
  // polar chart on the sphere at colatitude pi/4 and a stereographic chart on
  // the hyperbolic plane; oracle is the Levi-Civita formula applied to
  // centered differences of metric_at
  struct Case {
    FlowBackground bg;
    Vec x;
    Chart chart;
  };
  Vec hu(2);
  hu << 0.2, 0.35;
  std::vector<Case> cases = {
      {FlowBackground::round_sphere(2, 1.0, 10.0), sphere_point(std::numbers::pi / 4, 0.3),
       Chart::Polar},
      {FlowBackground::round_sphere(2, 1.5, 10.0), sphere_point(1.2, -0.7), Chart::Standard},
      {FlowBackground::hyperbolic(2, 10.0, 4.0), hyperboloid_point(hu), Chart::Standard},
  };
  for (const Case& c : cases) {
    const double t = 0.6;
    const Vec u0 = c.bg.to_chart(c.x, c.chart);
    const int n = static_cast<int>(u0.size());
    const double h = 1e-5;
    std::vector<Mat> dg(n);
    for (int l = 0; l < n; ++l) {
      Vec up = u0, um = u0;
      up[l] += h;
      um[l] -= h;
      dg[l] = (metric_at(c.bg, c.bg.from_chart(up, c.chart), t, c.chart) -
               metric_at(c.bg, c.bg.from_chart(um, c.chart), t, c.chart)) /
              (2 * h);
    }
    const Mat ginv = metric_at(c.bg, c.x, t, c.chart).inverse();
    const std::vector<double> gam = christoffel_at(c.bg, c.x, t, c.chart);
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          double oracle = 0.0;
          for (int l = 0; l < n; ++l) {
            oracle += 0.5 * ginv(k, l) * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
          }
          CHECK(std::abs(gam[k * n * n + i * n + j] - oracle) < 1e-7);
          CHECK(gam[k * n * n + i * n + j] == gam[k * n * n + j * n + i]);
        }
      }
    }
  }
}

TEST_CASE("flow residual is finite-difference small") {
  auto sphere = FlowBackground::round_sphere(2, 1.0, 10.0);
  CHECK(flow_residual(sphere, sphere_point(0.9, 0.1), 0.5, 1e-4) <= 1e-7);
  auto hyp = FlowBackground::hyperbolic(3, 20.0, 4.0);
  Vec u(3);
  u << 0.1, 0.2, -0.3;
  CHECK(flow_residual(hyp, hyperboloid_point(u), 1.0, 1e-4) <= 1e-7);
  auto prod = FlowBackground::product_sphere_flat(2, 1, 1.0, {1.0}, 10.0);
  Vec p(4);
  p << 0.6, 0.0, 0.8, 0.25;
  CHECK(flow_residual(prod, p, 0.3, 1e-4) <= 1e-6);
}

TEST_CASE("metric positive definite and scal homogeneous over samples") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> th(0.05, std::numbers::pi - 0.05), ph(-3.0, 3.0);
  auto bg = FlowBackground::round_sphere(2, 1.0, 10.0);
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i < 50; ++i) {
    const Vec x = sphere_point(th(rng), ph(rng));
    const double t = 0.2 * (i % 7);
    Eigen::SelfAdjointEigenSolver<Mat> es(metric_at(bg, x, t, Chart::Polar));
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    CHECK(flow_residual(bg, x, t + 0.1, 1e-4) <= 1e-6);
    const double s = curvature_at(bg, x, 1.0).scal;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  CHECK(hi - lo <= 1e-12);
}

TEST_CASE("errors on bad input") {
  auto bg = FlowBackground::round_sphere(2, 1.0, 10.0);
  Vec bad(3);
  bad << 1.0, 1.0, 0.0;
  CHECK_THROWS_AS(metric_at(bg, bad, 0.1), Error);
  CHECK_THROWS_AS(metric_at(bg, sphere_point(0.3, 0.3), 11.0), Error);
  CHECK_THROWS_AS(FlowBackground::hyperbolic(2, 1.0, 1.0), Error);
}

TEST_CASE("torus canonical wraps into the lattice cell") {
  auto bg = FlowBackground::flat_torus(2, {1.0, 2.0});
  Vec x(2);
  x << -0.25, 4.5;
  const Vec c = bg.canonical(x);
  CHECK(c[0] == doctest::Approx(0.75));
  CHECK(c[1] == doctest::Approx(0.5));
}

TEST_CASE("chart round trips") {
  auto bg = FlowBackground::product_sphere_flat(2, 2, 1.0, {1.0, 1.0}, 10.0);
  Vec x(5);
  x << 0.0, 0.6, 0.8, 0.1, 0.7;
  for (Chart c : {Chart::Standard, Chart::Polar}) {
    const Vec back = bg.from_chart(bg.to_chart(x, c), c);
    CHECK((back - x).norm() < 1e-13);
  }
}
