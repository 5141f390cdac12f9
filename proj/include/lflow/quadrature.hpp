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

// Product-cell quadrature over compact models. Flat factors use a tensor
// midpoint rule on the lattice cell; sphere factors use hyperspherical
// angle cells (colatitudes on [0, pi], azimuth on [0, 2 pi)) with exact cell
// volumes and the cell's angular midpoint as node. Weights are unit-model
// volumes; multiply by FlowBackground::volume_factor(t) for dvol_{g(t)}.

#ifndef LFLOW_QUADRATURE_HPP
#define LFLOW_QUADRATURE_HPP

#include "lflow/background.hpp"

#include <cstddef>
#include <vector>

namespace lflow {

class QuadratureGrid {
 public:
  // cells: per axis for flat factors and colatitudes; azimuths get 2 cells.
  // rotation (optional, (d+1) x (d+1)) is applied to every sphere factor.
  QuadratureGrid(const FlowBackground& bg, int cells, const Mat& rotation = Mat());

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  const Vec& point(std::size_t i) const { return points_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  int cells() const { return cells_; }
  double total_weight() const;

  // Index of the cell containing x.
  std::size_t locate(const Vec& x) const;

 private:
  struct Axis {
    int factor;
    int count;
    double lo, hi;
  };
  const FlowBackground* bg_;
  int cells_;
  Mat rotation_;
  std::vector<Axis> axes_;
  std::vector<Vec> points_;
  std::vector<double> weights_;
};

// int_a^b sin^k
double sine_power_integral(int k, double a, double b);

// Hyperspherical angles (colatitudes then azimuth in [0, 2 pi)) of a unit
// vector and back.
Vec sphere_angles(const Vec& x);
Vec sphere_from_angles(const Vec& q);

}  // namespace lflow

#endif  // LFLOW_QUADRATURE_HPP
