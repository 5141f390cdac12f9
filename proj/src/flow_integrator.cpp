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

#include "flow_integrator.hpp"

#include "lflow/error.hpp"

#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <sstream>

namespace lflow::detail {
namespace {

namespace odeint = boost::numeric::odeint;
using State = std::vector<double>;
using Stepper = odeint::runge_kutta_dopri5<State>;

constexpr int kMaxSteps = 200000;

double block_inner(const Factor& f, const double* u, const double* v) {
  double s = 0.0;
  const int m = f.coord_count();
  for (int i = 0; i < m; ++i) s += u[i] * v[i];
  if (f.kind == FactorKind::Hyperbolic) s -= 2.0 * u[0] * v[0];
  return s;
}

struct Rhs {
  const FlowBackground* bg;
  int coords;
  int frames;

  void operator()(const State& y, State& dy, double s) const {
    const int n = coords;
    const double t = s * s;
    for (int i = 0; i < n; ++i) dy[i] = y[n + i];
    for (const Factor& f : bg->factors()) {
      const int m = f.coord_count();
      const double c = f.scale(t);
      const double damping = 2.0 * s * f.rate() / c;
      const double sign = f.curvature_sign();
      const double* x = y.data() + f.offset;
      const double* v = y.data() + n + f.offset;
      double* a = dy.data() + n + f.offset;
      const double vv = sign != 0.0 ? block_inner(f, v, v) : 0.0;
      for (int i = 0; i < m; ++i) a[i] = -damping * v[i] - sign * vv * x[i];
      const double ric = 2.0 * s * sign * (f.dim - 1) / c;
      for (int k = 0; k < frames; ++k) {
        const double* e = y.data() + (2 + k) * n + f.offset;
        double* de = dy.data() + (2 + k) * n + f.offset;
        const double ev = sign != 0.0 ? block_inner(f, e, v) : 0.0;
        for (int i = 0; i < m; ++i) de[i] = -sign * ev * x[i] - ric * e[i];
      }
    }
  }
};

State pack(const Vec& x0, const Vec& v0, const Mat& frame0) {
  const int n = static_cast<int>(x0.size());
  const int frames = static_cast<int>(frame0.cols());
  State y(static_cast<std::size_t>(n) * (2 + frames));
  Eigen::Map<Vec>(y.data(), n) = x0;
  Eigen::Map<Vec>(y.data() + n, n) = v0;
  for (int k = 0; k < frames; ++k) {
    Eigen::Map<Vec>(y.data() + (2 + k) * n, n) = frame0.col(k);
  }
  return y;
}

void record_node(const FlowBackground& bg, const State& y, int frames, FlowTrajectory& out) {
  const int n = bg.coord_count();
  const Vec x = bg.retract(Eigen::Map<const Vec>(y.data(), n));
  out.points.push_back(x);
  out.velocities.push_back(bg.project(x, Eigen::Map<const Vec>(y.data() + n, n)));
  if (frames > 0) {
    Mat e(n, frames);
    for (int k = 0; k < frames; ++k) {
      e.col(k) = bg.project(x, Eigen::Map<const Vec>(y.data() + (2 + k) * n, n));
    }
    out.frames.push_back(std::move(e));
  }
}

void check_speed(const FlowBackground& bg, const State& y, double s, double bound) {
  const int n = bg.coord_count();
  const Vec v = Eigen::Map<const Vec>(y.data() + n, n);
  const double speed = std::sqrt(std::max(bg.inner(v, v, s * s), 0.0));
  if (!std::isfinite(speed) || speed > bound) {
    std::ostringstream os;
    os << "geodesic speed |dx/ds| = " << speed << " exceeds the bound " << bound
       << " at s = " << s;
    fail(ErrorCode::Numerical, os.str());
  }
}

}  // namespace

FlowIntegrator::FlowIntegrator(const FlowBackground& bg, IntegratorSettings settings)
    : bg_(bg), settings_(settings) {}

FlowTrajectory FlowIntegrator::integrate(const Vec& x0, const Vec& v0, const Mat& frame0,
                                         const std::vector<double>& s_nodes) const {
  const int frames = static_cast<int>(frame0.cols());
  Rhs rhs{&bg_, bg_.coord_count(), frames};
  State y = pack(x0, v0, frame0);
  auto stepper = odeint::make_controlled(settings_.atol, settings_.rtol, Stepper());

  FlowTrajectory out;
  record_node(bg_, y, frames, out);
  double s = s_nodes.front();
  double ds = (s_nodes.back() - s_nodes.front()) / 64.0;
  int steps = 0;
  for (std::size_t k = 1; k < s_nodes.size(); ++k) {
    const double target = s_nodes[k];
    while (s < target) {
      const bool clipped = s + ds >= target;
      double step = clipped ? target - s : ds;
      const double s_before = s;
      double t_odeint = s;
      if (stepper.try_step(rhs, y, t_odeint, step) == odeint::success) {
        const double taken = clipped ? target - s_before : t_odeint - s_before;
        out.steps.emplace_back(s_before, taken);
        s = clipped ? target : t_odeint;
        // keep the proposal from the controller unless the clip shrank it
        ds = clipped ? std::max(step, ds) : step;
        check_speed(bg_, y, s, settings_.max_speed);
      } else {
        ds = step;
      }
      if (ds < 1e-14 * std::max(1.0, std::abs(s))) {
        std::ostringstream os;
        os << "step size underflow at s = " << s;
        fail(ErrorCode::Numerical, os.str());
      }
      if (++steps > kMaxSteps) {
        std::ostringstream os;
        os << "step budget exhausted at s = " << s;
        fail(ErrorCode::Numerical, os.str());
      }
    }
    record_node(bg_, y, frames, out);
  }
  return out;
}

FlowTrajectory FlowIntegrator::replay(const Vec& x0, const Vec& v0,
                                      const std::vector<double>& s_nodes,
                                      const std::vector<std::pair<double, double>>& steps) const {
  Rhs rhs{&bg_, bg_.coord_count(), 0};
  State y = pack(x0, v0, Mat(bg_.coord_count(), 0));
  Stepper stepper;
  FlowTrajectory out;
  record_node(bg_, y, 0, out);
  std::size_t node = 1;
  for (const auto& [s_start, ds] : steps) {
    stepper.do_step(rhs, y, s_start, ds);
    const double s_end = s_start + ds;
    while (node < s_nodes.size() && std::abs(s_end - s_nodes[node]) <= 1e-13 * (1.0 + s_end)) {
      record_node(bg_, y, 0, out);
      ++node;
    }
  }
  if (out.points.size() != s_nodes.size()) {
    fail(ErrorCode::Numerical, "replayed step sequence does not match the node grid");
  }
  return out;
}

}  // namespace lflow::detail
