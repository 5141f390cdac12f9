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

#include "lflow/background.hpp"

#include "lflow/error.hpp"

#include <cmath>
#include <sstream>

namespace lflow {
namespace {

constexpr double kPointTol = 1e-9;

double minkowski(const Eigen::Ref<const Vec>& u, const Eigen::Ref<const Vec>& v) {
  return -u[0] * v[0] + u.tail(u.size() - 1).dot(v.tail(v.size() - 1));
}

double block_inner(const Factor& f, const Eigen::Ref<const Vec>& u,
                   const Eigen::Ref<const Vec>& v) {
  return f.kind == FactorKind::Hyperbolic ? minkowski(u, v) : u.dot(v);
}

// Unit-model chart metric of one factor at chart coordinates u, plus its
// partial derivatives.
struct ChartMetric {
  Mat g;
  std::vector<Mat> dg;
};

ChartMetric conformal_metric(const Vec& u, double sign) {
  // e^{2f} = 4 / (1 + sign |u|^2)^2
  const int d = static_cast<int>(u.size());
  const double q = 1.0 + sign * u.squaredNorm();
  const double conf = 4.0 / (q * q);
  ChartMetric m{conf * Mat::Identity(d, d), {}};
  for (int l = 0; l < d; ++l) {
    const double dfl = -2.0 * sign * u[l] / q;
    m.dg.push_back(2.0 * dfl * conf * Mat::Identity(d, d));
  }
  return m;
}

ChartMetric polar_metric(const Vec& q) {
  const int d = static_cast<int>(q.size());
  ChartMetric m{Mat::Zero(d, d), {}};
  for (int j = 0; j < d; ++j) {
    double p = 1.0;
    for (int i = 0; i < j; ++i) p *= std::sin(q[i]) * std::sin(q[i]);
    m.g(j, j) = p;
  }
  for (int l = 0; l < d; ++l) {
    Mat dg = Mat::Zero(d, d);
    const double cot = std::cos(q[l]) / std::sin(q[l]);
    for (int j = l + 1; j < d; ++j) dg(j, j) = 2.0 * cot * m.g(j, j);
    m.dg.push_back(dg);
  }
  return m;
}

Vec sphere_to_polar(const Vec& x) {
  const int d = static_cast<int>(x.size()) - 1;
  Vec q(d);
  for (int j = 0; j + 1 < d; ++j) {
    q[j] = std::atan2(x.head(d - j).norm(), x[d - j]);
  }
  q[d - 1] = std::atan2(x[1], x[0]);
  double p = 1.0;
  for (int j = 0; j + 1 < d; ++j) p *= std::sin(q[j]);
  if (std::abs(p) < 1e-8) {
    fail(ErrorCode::Domain, "point lies on the singular set of the polar chart");
  }
  return q;
}

Vec polar_to_sphere(const Vec& q) {
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

ChartMetric factor_chart_metric(const Factor& f, const Vec& x_block, Chart chart) {
  const int d = f.dim;
  switch (f.kind) {
    case FactorKind::Flat: {
      ChartMetric m{Mat::Identity(d, d), {}};
      for (int l = 0; l < d; ++l) m.dg.push_back(Mat::Zero(d, d));
      return m;
    }
    case FactorKind::Sphere: {
      if (chart == Chart::Polar) return polar_metric(sphere_to_polar(x_block));
      if (x_block[d] < -1.0 + 1e-9) {
        fail(ErrorCode::Domain, "south pole is outside the stereographic chart");
      }
      return conformal_metric(x_block.head(d) / (1.0 + x_block[d]), 1.0);
    }
    case FactorKind::Hyperbolic:
      return conformal_metric(x_block.tail(d) / (1.0 + x_block[0]), -1.0);
  }
  fail(ErrorCode::InvalidArgument, "unknown factor kind");
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::FlatTorus: return "flat_torus";
    case ModelKind::RoundSphere: return "round_sphere";
    case ModelKind::HyperbolicQuotient: return "hyperbolic_quotient";
    case ModelKind::ProductSphereFlat: return "product_sphere_flat";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "flat_torus") return ModelKind::FlatTorus;
  if (name == "round_sphere") return ModelKind::RoundSphere;
  if (name == "hyperbolic_quotient") return ModelKind::HyperbolicQuotient;
  if (name == "product_sphere_flat") return ModelKind::ProductSphereFlat;
  fail(ErrorCode::Config, "unknown background kind '" + name + "'");
}

double Factor::curvature_sign() const {
  switch (kind) {
    case FactorKind::Flat: return 0.0;
    case FactorKind::Sphere: return 1.0;
    case FactorKind::Hyperbolic: return -1.0;
  }
  return 0.0;
}

FlowBackground FlowBackground::flat_torus(int n, std::vector<double> lattice, double scale0,
                                          double t_max) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "dimension must be >= 1");
  if (lattice.empty()) lattice.assign(n, 1.0);
  if (static_cast<int>(lattice.size()) != n) {
    fail(ErrorCode::InvalidArgument, "lattice needs one side length per dimension");
  }
  FlowBackground bg;
  bg.kind_ = ModelKind::FlatTorus;
  bg.dim_ = n;
  bg.scale0_ = scale0;
  bg.t_max_ = t_max;
  bg.factors_.push_back(Factor{FactorKind::Flat, n, scale0, std::move(lattice)});
  bg.finalize();
  return bg;
}

FlowBackground FlowBackground::round_sphere(int n, double scale0, double t_max) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "dimension must be >= 1");
  FlowBackground bg;
  bg.kind_ = ModelKind::RoundSphere;
  bg.dim_ = n;
  bg.scale0_ = scale0;
  bg.t_max_ = t_max;
  bg.factors_.push_back(Factor{FactorKind::Sphere, n, scale0, {}});
  bg.finalize();
  return bg;
}

FlowBackground FlowBackground::hyperbolic(int n, double scale0, double t_max) {
  if (n < 2) fail(ErrorCode::InvalidArgument, "hyperbolic model needs dimension >= 2");
  FlowBackground bg;
  bg.kind_ = ModelKind::HyperbolicQuotient;
  bg.dim_ = n;
  bg.scale0_ = scale0;
  bg.t_max_ = t_max;
  bg.factors_.push_back(Factor{FactorKind::Hyperbolic, n, scale0, {}});
  bg.finalize();
  return bg;
}

FlowBackground FlowBackground::product_sphere_flat(int sphere_dim, int flat_dim, double scale0,
                                                   std::vector<double> lattice, double t_max) {
  if (sphere_dim < 1 || flat_dim < 1) {
    fail(ErrorCode::InvalidArgument, "product factors need dimension >= 1");
  }
  if (lattice.empty()) lattice.assign(flat_dim, 1.0);
  if (static_cast<int>(lattice.size()) != flat_dim) {
    fail(ErrorCode::InvalidArgument, "lattice needs one side length per flat dimension");
  }
  FlowBackground bg;
  bg.kind_ = ModelKind::ProductSphereFlat;
  bg.dim_ = sphere_dim + flat_dim;
  bg.scale0_ = scale0;
  bg.t_max_ = t_max;
  bg.factors_.push_back(Factor{FactorKind::Sphere, sphere_dim, scale0, {}});
  bg.factors_.push_back(Factor{FactorKind::Flat, flat_dim, 1.0, std::move(lattice)});
  bg.finalize();
  return bg;
}

void FlowBackground::finalize() {
  if (!(scale0_ > 0.0)) fail(ErrorCode::InvalidArgument, "scale0 must be positive");
  if (!(t_max_ > 0.0)) fail(ErrorCode::InvalidArgument, "t_max must be positive");
  int offset = 0;
  int chart_offset = 0;
  for (auto& f : factors_) {
    f.offset = offset;
    f.chart_offset = chart_offset;
    offset += f.coord_count();
    chart_offset += f.dim;
    for (double side : f.lattice) {
      if (!(side > 0.0)) fail(ErrorCode::InvalidArgument, "lattice sides must be positive");
    }
    if (!(f.scale(t_max_) > 0.0)) {
      std::ostringstream os;
      os << "scale factor vanishes inside the time window; need t_max < "
         << f.scale0 / std::abs(f.rate());
      fail(ErrorCode::InvalidArgument, os.str());
    }
  }
  coord_count_ = offset;
}

bool FlowBackground::compact() const {
  for (const auto& f : factors_) {
    if (f.kind == FactorKind::Hyperbolic) return false;
  }
  return true;
}

double FlowBackground::scal(double t) const {
  double s = 0.0;
  for (const auto& f : factors_) s += f.scal(t);
  return s;
}

double FlowBackground::dscal_dt(double t) const {
  double s = 0.0;
  for (const auto& f : factors_) {
    const double c = f.scale(t);
    s -= f.curvature_sign() * f.dim * (f.dim - 1) * f.rate() / (c * c);
  }
  return s;
}

double FlowBackground::volume_factor(double t) const {
  double v = 1.0;
  for (const auto& f : factors_) v *= std::pow(f.scale(t), 0.5 * f.dim);
  return v;
}

void FlowBackground::check_time(double t) const {
  if (!std::isfinite(t) || t < 0.0 || t > t_max_ * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "time " << t << " outside the valid window [0, " << t_max_ << "]";
    fail(ErrorCode::Domain, os.str());
  }
}

void FlowBackground::check_point(const Vec& x) const {
  if (x.size() != coord_count_) {
    std::ostringstream os;
    os << "point has " << x.size() << " coordinates, model expects " << coord_count_;
    fail(ErrorCode::Domain, os.str());
  }
  if (!x.allFinite()) fail(ErrorCode::Domain, "point has non-finite coordinates");
  for (const auto& f : factors_) {
    const Vec b = x.segment(f.offset, f.coord_count());
    if (f.kind == FactorKind::Sphere && std::abs(b.norm() - 1.0) > kPointTol) {
      fail(ErrorCode::Domain, "sphere coordinates must have unit norm");
    }
    if (f.kind == FactorKind::Hyperbolic &&
        (b[0] <= 0.0 || std::abs(minkowski(b, b) + 1.0) > kPointTol * (1.0 + b.squaredNorm()))) {
      fail(ErrorCode::Domain, "hyperboloid coordinates must satisfy <x,x> = -1, x0 > 0");
    }
  }
}

void FlowBackground::check_tangent(const Vec& x, const Vec& v) const {
  if (v.size() != coord_count_) fail(ErrorCode::InvalidArgument, "tangent vector has wrong size");
  if (!v.allFinite()) fail(ErrorCode::InvalidArgument, "tangent vector is not finite");
  const Vec normal = v - project(x, v);
  if (normal.norm() > 1e-8 * (1.0 + v.norm())) {
    fail(ErrorCode::InvalidArgument, "vector is not tangent at the base point");
  }
}

Vec FlowBackground::retract(const Vec& x) const {
  Vec y = x;
  for (const auto& f : factors_) {
    auto b = y.segment(f.offset, f.coord_count());
    if (f.kind == FactorKind::Sphere) {
      b /= b.norm();
    } else if (f.kind == FactorKind::Hyperbolic) {
      b[0] = std::sqrt(1.0 + b.tail(f.dim).squaredNorm());
    }
  }
  return y;
}

Vec FlowBackground::canonical(const Vec& x) const {
  Vec y = retract(x);
  for (const auto& f : factors_) {
    if (f.kind != FactorKind::Flat) continue;
    for (int i = 0; i < f.dim; ++i) {
      const double side = f.lattice[i];
      double& c = y[f.offset + i];
      c -= side * std::floor(c / side);
      if (c >= side) c -= side;
    }
  }
  return y;
}

double FlowBackground::inner_model(const Vec& u, const Vec& v) const {
  double s = 0.0;
  for (const auto& f : factors_) {
    s += block_inner(f, u.segment(f.offset, f.coord_count()), v.segment(f.offset, f.coord_count()));
  }
  return s;
}

double FlowBackground::inner(const Vec& u, const Vec& v, double t) const {
  double s = 0.0;
  for (const auto& f : factors_) {
    s += f.scale(t) *
         block_inner(f, u.segment(f.offset, f.coord_count()), v.segment(f.offset, f.coord_count()));
  }
  return s;
}

Vec FlowBackground::project(const Vec& x, const Vec& v) const {
  Vec out = v;
  for (const auto& f : factors_) {
    const int m = f.coord_count();
    const auto xb = x.segment(f.offset, m);
    auto ob = out.segment(f.offset, m);
    if (f.kind == FactorKind::Sphere) {
      ob -= xb.dot(ob) * xb;
    } else if (f.kind == FactorKind::Hyperbolic) {
      const Vec copy = ob;
      ob += minkowski(copy, xb) * xb;
    }
  }
  return out;
}

Vec FlowBackground::exp_model(const Vec& x, const Vec& v) const {
  Vec out = x;
  for (const auto& f : factors_) {
    const int m = f.coord_count();
    const Vec xb = x.segment(f.offset, m);
    const Vec vb = v.segment(f.offset, m);
    auto ob = out.segment(f.offset, m);
    if (f.kind == FactorKind::Flat) {
      ob = xb + vb;
      continue;
    }
    const double len = std::sqrt(std::max(block_inner(f, vb, vb), 0.0));
    if (len < 1e-300) continue;
    if (f.kind == FactorKind::Sphere) {
      ob = std::cos(len) * xb + (std::sin(len) / len) * vb;
    } else {
      ob = std::cosh(len) * xb + (std::sinh(len) / len) * vb;
    }
  }
  return retract(out);
}

Vec FlowBackground::log_model(const Vec& x, const Vec& y) const {
  Vec out = Vec::Zero(coord_count_);
  for (const auto& f : factors_) {
    const int m = f.coord_count();
    const Vec xb = x.segment(f.offset, m);
    const Vec yb = y.segment(f.offset, m);
    auto ob = out.segment(f.offset, m);
    if (f.kind == FactorKind::Flat) {
      ob = yb - xb;
    } else if (f.kind == FactorKind::Sphere) {
      const double cs = xb.dot(yb);
      const Vec w = yb - cs * xb;
      const double sn = w.norm();
      if (sn < 1e-300) {
        if (cs < 0.0) fail(ErrorCode::Numerical, "logarithm of an antipodal pair is not unique");
        continue;
      }
      ob = (std::atan2(sn, cs) / sn) * w;
    } else {
      const double ip = minkowski(xb, yb);
      const Vec w = yb + ip * xb;
      const double sn = std::sqrt(std::max(minkowski(w, w), 0.0));
      if (sn < 1e-300) continue;
      ob = (std::asinh(sn) / sn) * w;
    }
  }
  return out;
}

Mat FlowBackground::tangent_basis(const Vec& x) const {
  Mat basis = Mat::Zero(coord_count_, dim_);
  for (const auto& f : factors_) {
    const int m = f.coord_count();
    const Vec xb = x.segment(f.offset, m);
    auto block = basis.block(f.offset, f.chart_offset, m, f.dim);
    if (f.kind == FactorKind::Flat) {
      block.setIdentity();
    } else if (f.kind == FactorKind::Sphere) {
      const Mat column = xb;
      Eigen::HouseholderQR<Mat> qr(column);
      const Mat q = qr.householderQ() * Mat::Identity(m, m);
      block = q.rightCols(f.dim);
    } else {
      // Lorentz boost taking e0 to x; its spatial columns span T_x.
      const Vec xs = xb.tail(f.dim);
      Mat boost(m, m);
      boost(0, 0) = xb[0];
      boost.block(0, 1, 1, f.dim) = xs.transpose();
      boost.block(1, 0, f.dim, 1) = xs;
      boost.block(1, 1, f.dim, f.dim) =
          Mat::Identity(f.dim, f.dim) + xs * xs.transpose() / (1.0 + xb[0]);
      block = boost.rightCols(f.dim);
    }
  }
  return basis;
}

Mat FlowBackground::orthonormal_frame(const Vec& x, double t) const {
  Mat basis = tangent_basis(x);
  for (const auto& f : factors_) {
    basis.block(f.offset, f.chart_offset, f.coord_count(), f.dim) /= std::sqrt(f.scale(t));
  }
  return basis;
}

Vec FlowBackground::scale_by_factor(const Vec& v, const std::vector<double>& a) const {
  Vec out = v;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    out.segment(factors_[i].offset, factors_[i].coord_count()) *= a[i];
  }
  return out;
}

Vec FlowBackground::to_chart(const Vec& x, Chart chart) const {
  check_point(x);
  Vec u(dim_);
  for (const auto& f : factors_) {
    const Vec xb = x.segment(f.offset, f.coord_count());
    auto ub = u.segment(f.chart_offset, f.dim);
    if (f.kind == FactorKind::Flat) {
      ub = xb;
    } else if (f.kind == FactorKind::Sphere) {
      if (chart == Chart::Polar) {
        ub = sphere_to_polar(xb);
      } else {
        if (xb[f.dim] < -1.0 + 1e-9) {
          fail(ErrorCode::Domain, "south pole is outside the stereographic chart");
        }
        ub = xb.head(f.dim) / (1.0 + xb[f.dim]);
      }
    } else {
      ub = xb.tail(f.dim) / (1.0 + xb[0]);
    }
  }
  return u;
}

Vec FlowBackground::from_chart(const Vec& u, Chart chart) const {
  if (u.size() != dim_) fail(ErrorCode::InvalidArgument, "chart point has wrong size");
  Vec x(coord_count_);
  for (const auto& f : factors_) {
    const Vec ub = u.segment(f.chart_offset, f.dim);
    auto xb = x.segment(f.offset, f.coord_count());
    if (f.kind == FactorKind::Flat) {
      xb = ub;
    } else if (f.kind == FactorKind::Sphere) {
      if (chart == Chart::Polar) {
        xb = polar_to_sphere(ub);
      } else {
        const double r2 = ub.squaredNorm();
        xb.head(f.dim) = 2.0 * ub / (1.0 + r2);
        xb[f.dim] = (1.0 - r2) / (1.0 + r2);
      }
    } else {
      const double r2 = ub.squaredNorm();
      if (r2 >= 1.0) fail(ErrorCode::Domain, "chart point outside the Poincare ball");
      xb[0] = (1.0 + r2) / (1.0 - r2);
      xb.tail(f.dim) = 2.0 * ub / (1.0 - r2);
    }
  }
  return x;
}

Mat metric_at(const FlowBackground& bg, const Vec& x, double t, Chart chart) {
  bg.check_time(t);
  bg.check_point(x);
  const int n = bg.dim();
  Mat g = Mat::Zero(n, n);
  for (const auto& f : bg.factors()) {
    const ChartMetric m = factor_chart_metric(f, x.segment(f.offset, f.coord_count()), chart);
    g.block(f.chart_offset, f.chart_offset, f.dim, f.dim) = f.scale(t) * m.g;
  }
  return g;
}

std::vector<Mat> metric_derivatives(const FlowBackground& bg, const Vec& x, double t,
                                    Chart chart) {
  bg.check_time(t);
  bg.check_point(x);
  const int n = bg.dim();
  std::vector<Mat> dg(n, Mat::Zero(n, n));
  for (const auto& f : bg.factors()) {
    const ChartMetric m = factor_chart_metric(f, x.segment(f.offset, f.coord_count()), chart);
    for (int l = 0; l < f.dim; ++l) {
      dg[f.chart_offset + l].block(f.chart_offset, f.chart_offset, f.dim, f.dim) =
          f.scale(t) * m.dg[l];
    }
  }
  return dg;
}

CurvatureData curvature_at(const FlowBackground& bg, const Vec& x, double t, Chart chart) {
  const Mat g = metric_at(bg, x, t, chart);
  CurvatureData c;
  c.scal = bg.scal(t);
  c.dscal_dt = bg.dscal_dt(t);
  c.grad_scal = Vec::Zero(bg.dim());
  c.ricci = Mat::Zero(bg.dim(), bg.dim());
  for (const auto& f : bg.factors()) {
    const double k = f.curvature_sign() * (f.dim - 1) / f.scale(t);
    c.ricci.block(f.chart_offset, f.chart_offset, f.dim, f.dim) =
        k * g.block(f.chart_offset, f.chart_offset, f.dim, f.dim);
  }
  return c;
}

std::vector<double> christoffel_at(const FlowBackground& bg, const Vec& x, double t,
                                   Chart chart) {
  const Mat g = metric_at(bg, x, t, chart);
  const std::vector<Mat> dg = metric_derivatives(bg, x, t, chart);
  const Mat ginv = g.inverse();
  const int n = bg.dim();
  std::vector<double> gamma(static_cast<std::size_t>(n) * n * n, 0.0);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) {
          s += ginv(k, l) * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
        }
        gamma[(static_cast<std::size_t>(k) * n + i) * n + j] = 0.5 * s;
      }
    }
  }
  return gamma;
}

double flow_residual(const FlowBackground& bg, const Vec& x, double t, double dt, Chart chart) {
  if (!(dt > 0.0)) fail(ErrorCode::InvalidArgument, "dt must be positive");
  bg.check_time(t - dt);
  bg.check_time(t + dt);
  const Mat dg = (metric_at(bg, x, t + dt, chart) - metric_at(bg, x, t - dt, chart)) / (2.0 * dt);
  const Mat ric = curvature_at(bg, x, t, chart).ricci;
  return (dg - 2.0 * ric).cwiseAbs().maxCoeff();
}

}  // namespace lflow
