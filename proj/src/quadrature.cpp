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

#include "lflow/quadrature.hpp"

#include "lflow/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lflow {

double sine_power_integral(int k, double a, double b) {
  if (k == 0) return b - a;
  if (k == 1) return std::cos(a) - std::cos(b);
  const auto term = [k](double x) { return -std::pow(std::sin(x), k - 1) * std::cos(x) / k; };
  return term(b) - term(a) + (k - 1.0) / k * sine_power_integral(k - 2, a, b);
}

Vec sphere_angles(const Vec& x) {
  const int d = static_cast<int>(x.size()) - 1;
  Vec q(d);
  for (int j = 0; j + 1 < d; ++j) q[j] = std::atan2(x.head(d - j).norm(), x[d - j]);
  double az = std::atan2(x[1], x[0]);
  if (az < 0.0) az += 2.0 * std::numbers::pi;
  q[d - 1] = az;
  return q;
}

Vec sphere_from_angles(const Vec& q) {
  const int d = static_cast<int>(q.size());
  Vec x(d + 1);
  double p = 1.0;
  for (int j = 0; j + 1 < d; ++j) {
    x[d - j] = p * std::cos(q[j]);
    p *= std::sin(q[j]);
  }
  x[1] = p * std::sin(q[d - 1]);
  x[0] = p * std::cos(q[d - 1]);
  return x;
}

QuadratureGrid::QuadratureGrid(const FlowBackground& bg, int cells, const Mat& rotation)
    : bg_(&bg), cells_(cells), rotation_(rotation) {
  if (cells < 1) fail(ErrorCode::InvalidArgument, "quadrature needs at least one cell per axis");
  if (!bg.compact()) fail(ErrorCode::Domain, "global quadrature needs a compact model");
  int fi = 0;
  for (const Factor& f : bg.factors()) {
    if (f.kind == FactorKind::Flat) {
      for (int i = 0; i < f.dim; ++i) axes_.push_back({fi, cells, 0.0, f.lattice[i]});
    } else {
      if (rotation_.size() > 0 && (rotation_.rows() != f.dim + 1 || rotation_.cols() != f.dim + 1)) {
        fail(ErrorCode::InvalidArgument, "quadrature rotation has the wrong size");
      }
      for (int i = 0; i + 1 < f.dim; ++i) axes_.push_back({fi, cells, 0.0, std::numbers::pi});
      axes_.push_back({fi, 2 * cells, 0.0, 2.0 * std::numbers::pi});
    }
    ++fi;
  }
  std::size_t total = 1;
  for (const Axis& a : axes_) total *= static_cast<std::size_t>(a.count);
  points_.reserve(total);
  weights_.reserve(total);
  std::vector<int> idx(axes_.size(), 0);
  for (std::size_t cell = 0; cell < total; ++cell) {
    // last axis varies fastest
    std::size_t c = cell;
    for (std::size_t a = axes_.size(); a-- > 0;) {
      idx[a] = static_cast<int>(c % axes_[a].count);
      c /= axes_[a].count;
    }
    Vec x(bg.coord_count());
    double w = 1.0;
    std::size_t a = 0;
    for (const Factor& f : bg.factors()) {
      if (f.kind == FactorKind::Flat) {
        for (int i = 0; i < f.dim; ++i, ++a) {
          const double h = (axes_[a].hi - axes_[a].lo) / axes_[a].count;
          x[f.offset + i] = axes_[a].lo + (idx[a] + 0.5) * h;
          w *= h;
        }
      } else {
        Vec q(f.dim);
        for (int i = 0; i < f.dim; ++i, ++a) {
          const double h = (axes_[a].hi - axes_[a].lo) / axes_[a].count;
          const double lo = axes_[a].lo + idx[a] * h;
          q[i] = lo + 0.5 * h;
          // colatitude i carries sin^{d-1-i}
          w *= i + 1 < f.dim ? sine_power_integral(f.dim - 1 - i, lo, lo + h) : h;
        }
        Vec xb = sphere_from_angles(q);
        if (rotation_.size() > 0) xb = rotation_ * xb;
        x.segment(f.offset, f.coord_count()) = xb;
      }
    }
    points_.push_back(std::move(x));
    weights_.push_back(w);
  }
}

double QuadratureGrid::total_weight() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

std::size_t QuadratureGrid::locate(const Vec& x) const {
  const Vec c = bg_->canonical(x);
  std::size_t cell = 0;
  std::size_t a = 0;
  for (const Factor& f : bg_->factors()) {
    std::vector<double> coords;
    if (f.kind == FactorKind::Flat) {
      for (int i = 0; i < f.dim; ++i) coords.push_back(c[f.offset + i]);
    } else {
      Vec xb = c.segment(f.offset, f.coord_count());
      if (rotation_.size() > 0) xb = rotation_.transpose() * xb;
      const Vec q = sphere_angles(xb);
      for (int i = 0; i < f.dim; ++i) coords.push_back(q[i]);
    }
    for (double v : coords) {
      const Axis& ax = axes_[a++];
      const double h = (ax.hi - ax.lo) / ax.count;
      const int k = std::clamp(static_cast<int>(std::floor((v - ax.lo) / h)), 0, ax.count - 1);
      cell = cell * ax.count + k;
    }
  }
  return cell;
}

}  // namespace lflow
