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

#include "lflow/error.hpp"
#include "lflow/harness.hpp"
#include "lflow/quadrature.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace lflow {
namespace {

class Field {
 public:
  Field(YAML::Node node, std::string path, const std::string* origin, YAML::Mark mark)
      : node_(std::move(node)), path_(std::move(path)), origin_(origin), mark_(mark) {
    if (node_.IsDefined() && !node_.IsNull()) mark_ = node_.Mark();
  }

  [[noreturn]] void error(const std::string& message) const {
    std::ostringstream os;
    os << *origin_;
    if (!mark_.is_null()) os << ":" << mark_.line + 1 << ":" << mark_.column + 1;
    os << ": field '" << path_ << "': " << message;
    fail(ErrorCode::Config, os.str());
  }

  const std::string& path() const { return path_; }
  bool present() const { return node_.IsDefined() && !node_.IsNull(); }
  bool is_map() const { return node_.IsMap(); }
  bool is_seq() const { return node_.IsSequence(); }

  Field child(const std::string& key) const {
    if (!node_.IsMap()) error("expected a mapping");
    return Field(node_[key], path_.empty() ? key : path_ + "." + key, origin_, mark_);
  }
  Field required(const std::string& key) const {
    Field f = child(key);
    if (!f.present()) f.error("missing required field");
    return f;
  }
  std::size_t size() const {
    if (!node_.IsSequence()) error("expected a list");
    return node_.size();
  }
  Field item(std::size_t i) const {
    return Field(node_[i], path_ + "[" + std::to_string(i) + "]", origin_, mark_);
  }

  void allow(std::initializer_list<const char*> keys) const {
    if (!node_.IsMap()) error("expected a mapping");
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) ==
          keys.end()) {
        Field(kv.second, path_.empty() ? key : path_ + "." + key, origin_, kv.first.Mark())
            .error("unknown field");
      }
    }
  }

  template <typename T>
  T as(const char* what) const {
    if (!node_.IsScalar()) error(std::string("expected ") + what);
    try {
      return node_.as<T>();
    } catch (const YAML::Exception&) {
      error(std::string("expected ") + what + ", got '" + node_.Scalar() + "'");
    }
  }
  double number() const {
    const double v = as<double>("a number");
    if (!std::isfinite(v)) error("must be finite");
    return v;
  }
  double positive() const {
    const double v = number();
    if (!(v > 0.0)) error("must be positive");
    return v;
  }
  int integer(int lo) const {
    const int v = as<int>("an integer");
    if (v < lo) error("must be at least " + std::to_string(lo));
    return v;
  }
  std::string text() const { return as<std::string>("a string"); }
  bool flag() const { return as<bool>("true or false"); }
  std::vector<double> numbers() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(item(i).number());
    return out;
  }
  Vec vec() const {
    const std::vector<double> v = numbers();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  std::vector<int> integers() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(item(i).as<int>("an integer"));
    return out;
  }

 private:
  YAML::Node node_;
  std::string path_;
  const std::string* origin_;
  YAML::Mark mark_;
};

// Runs f, turning library errors into diagnostics on field.
template <typename F>
auto guarded(const Field& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    // already positioned
    if (e.code() == ErrorCode::Config && std::string(e.what()).find(": field '") != std::string::npos) {
      throw;
    }
    field.error(e.what());
  }
}

FlowBackground parse_background(const Field& b) {
  b.allow({"kind", "n", "flat_dim", "c0", "lattice", "T"});
  const Field kind_field = b.required("kind");
  const std::string kind = kind_field.text();
  const ModelKind model = guarded(kind_field, [&] { return model_kind_from_string(kind); });
  const int n = b.required("n").integer(1);
  const double c0 = b.child("c0").present() ? b.child("c0").positive() : 1.0;
  const Field t_field = b.required("T");
  const double t_max = t_field.positive();
  const int flat_dim =
      b.child("flat_dim").present() ? b.child("flat_dim").integer(1) : (model == ModelKind::ProductSphereFlat ? 1 : 0);
  if (model != ModelKind::ProductSphereFlat && b.child("flat_dim").present()) {
    b.child("flat_dim").error("only product backgrounds take flat_dim");
  }
  std::vector<double> lattice;
  const Field lat = b.child("lattice");
  if (lat.present()) {
    if (model == ModelKind::RoundSphere || model == ModelKind::HyperbolicQuotient) {
      lat.error("only backgrounds with a flat factor take a lattice");
    }
    lattice = lat.numbers();
    const std::size_t want = model == ModelKind::FlatTorus ? n : flat_dim;
    if (lattice.size() != want) lat.error("expected " + std::to_string(want) + " side lengths");
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      if (!(lattice[i] > 0.0)) lat.item(i).error("must be positive");
    }
  }
  return guarded(b, [&] {
    switch (model) {
      case ModelKind::FlatTorus:
        return FlowBackground::flat_torus(n, lattice, c0, t_max);
      case ModelKind::RoundSphere:
        return FlowBackground::round_sphere(n, c0, t_max);
      case ModelKind::HyperbolicQuotient:
        return FlowBackground::hyperbolic(n, c0, t_max);
      case ModelKind::ProductSphereFlat:
        if (lattice.empty()) lattice.assign(flat_dim, 1.0);
        return FlowBackground::product_sphere_flat(n, flat_dim, c0, lattice, t_max);
    }
    fail(ErrorCode::Config, "unhandled background kind");
  });
}

int factor_index(const Field& term, const FlowBackground& bg) {
  const Field f = term.child("factor");
  if (!f.present()) return 0;
  const int i = f.integer(0);
  if (i >= static_cast<int>(bg.factors().size())) f.error("no such factor");
  return i;
}

Vec point_on(const Field& f, const FlowBackground& bg) {
  const Vec x = f.vec();
  guarded(f, [&] {
    bg.check_point(x);
    return 0;
  });
  return x;
}

PotentialField parse_potential(const Field& list, const FlowBackground& bg) {
  PotentialField out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Field t = list.item(i);
    const std::string family = t.required("family").text();
    const int factor = factor_index(t, bg);
    PotentialField one;
    if (family == "quadratic") {
      t.allow({"family", "factor", "alpha", "center"});
      const double alpha = t.required("alpha").number();
      const Vec center = t.required("center").vec();
      one = guarded(t, [&] { return PotentialField::quadratic(bg, alpha, center, factor); });
    } else if (family == "cosine") {
      t.allow({"family", "factor", "amplitude", "wave", "phase"});
      const double amp = t.required("amplitude").number();
      const std::vector<int> wave = t.required("wave").integers();
      const double phase = t.child("phase").present() ? t.child("phase").number() : 0.0;
      one = guarded(t, [&] { return PotentialField::cosine(bg, amp, wave, phase, factor); });
    } else if (family == "zonal") {
      t.allow({"family", "factor", "amplitude", "axis", "coeffs"});
      const double amp = t.required("amplitude").number();
      const Vec axis = t.required("axis").vec();
      const std::vector<double> coeffs = t.required("coeffs").numbers();
      one = guarded(t, [&] { return PotentialField::zonal(bg, amp, axis, coeffs, factor); });
    } else {
      t.child("family").error("unknown potential family '" + family + "'");
    }
    if (out.is_zero()) {
      out = one;
    } else {
      guarded(t, [&] {
        out.add(bg, one.terms().front());
        return 0;
      });
    }
  }
  return out;
}

DensityField parse_density(const Field& spec, const FlowBackground& bg) {
  DensityField out;
  auto one = [&](const Field& t) {
    const std::string family = t.required("family").text();
    if (family == "uniform") {
      t.allow({"family", "value"});
      const double v = t.child("value").present() ? t.child("value").positive() : 1.0;
      out.scale_by(v);
    } else if (family == "gaussian") {
      t.allow({"family", "factor", "center", "sigma"});
      DensityTerm term;
      term.kind = DensityTerm::Kind::Gaussian;
      term.factor = factor_index(t, bg);
      term.center = t.required("center").vec();
      term.sigma = t.required("sigma").positive();
      guarded(t, [&] {
        out.times(bg, term);
        return 0;
      });
    } else if (family == "von_mises") {
      t.allow({"family", "factor", "axis", "concentration"});
      DensityTerm term;
      term.kind = DensityTerm::Kind::VonMises;
      term.factor = factor_index(t, bg);
      term.axis = t.required("axis").vec();
      term.concentration = t.required("concentration").number();
      guarded(t, [&] {
        out.times(bg, term);
        return 0;
      });
    } else {
      t.child("family").error("unknown density family '" + family + "'");
    }
  };
  if (spec.is_seq()) {
    for (std::size_t i = 0; i < spec.size(); ++i) one(spec.item(i));
  } else {
    one(spec);
  }
  return out;
}

void check_time(const Field& f, double t, const FlowBackground& bg) {
  if (!(t >= 0.0 && t < bg.t_max())) {
    std::ostringstream os;
    os << "must lie in [0, T) = [0, " << bg.t_max() << ")";
    f.error(os.str());
  }
}

std::vector<double> increasing_times(const Field& f, const FlowBackground& bg, bool positive) {
  const std::vector<double> v = f.numbers();
  if (v.empty()) f.error("must not be empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    check_time(f.item(i), v[i], bg);
    if (positive && !(v[i] > 0.0)) f.item(i).error("must be positive");
    if (i > 0 && !(v[i] > v[i - 1])) f.item(i).error("times must be increasing");
  }
  return v;
}

}  // namespace

std::vector<std::string> known_suites() {
  return {"ldist", "jacobi", "theorem2", "corollary", "reduced-volume", "section3", "ot"};
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    std::ostringstream os;
    os << origin << ":" << e.mark.line + 1 << ":" << e.mark.column + 1 << ": " << e.msg;
    fail(ErrorCode::Config, os.str());
  }
  const Field top(root, "", &origin, YAML::Mark::null_mark());
  if (!top.is_map()) top.error("a scenario file is a mapping of blocks");
  top.allow({"name", "background", "times", "basepoint", "potential", "densities", "sampling",
             "geodesic", "tolerances", "suites", "ldist", "jacobi", "ot", "reduced_volume",
             "section3"});

  ScenarioConfig c;
  c.canonical = YAML::Dump(root);
  c.name = top.required("name").text();
  c.background = std::make_shared<const FlowBackground>(parse_background(top.required("background")));
  const FlowBackground& bg = *c.background;

  if (const Field t = top.child("times"); t.present()) {
    t.allow({"tau1", "tau", "lambda", "tau2", "tau_grid", "tau1_list"});
    if (t.child("tau1").present()) {
      c.tau1 = t.child("tau1").number();
      check_time(t.child("tau1"), c.tau1, bg);
    }
    if (t.child("tau2").present()) {
      c.tau2 = t.child("tau2").number();
      check_time(t.child("tau2"), c.tau2, bg);
      if (!(c.tau2 > c.tau1)) t.child("tau2").error("must exceed times.tau1");
    }
    if (t.child("tau").present() && t.child("lambda").present()) {
      t.child("lambda").error("give either times.tau or times.lambda");
    }
    if (t.child("tau").present()) {
      c.tau = t.child("tau").number();
      if (!(c.tau1 < c.tau && c.tau < c.tau2)) {
        t.child("tau").error("must lie strictly between times.tau1 and times.tau2");
      }
    }
    if (t.child("lambda").present()) {
      const double l = t.child("lambda").number();
      if (!(l > 0.0 && l < 1.0)) t.child("lambda").error("must lie in (0, 1)");
      if (!(c.tau1 > 0.0 && c.tau2 > c.tau1)) {
        t.child("lambda").error("needs times.tau1 > 0 and times.tau2");
      }
      c.tau = tau_from_lambda(c.tau1, c.tau2, l);
    }
    if (t.child("tau_grid").present()) c.tau_grid = increasing_times(t.child("tau_grid"), bg, true);
    if (t.child("tau1_list").present()) {
      c.tau1_list = t.child("tau1_list").numbers();
      for (std::size_t i = 0; i < c.tau1_list.size(); ++i) {
        if (!(c.tau1_list[i] > 0.0)) t.child("tau1_list").item(i).error("must be positive");
      }
    }
  }

  if (const Field p = top.child("basepoint"); p.present()) c.basepoint = point_on(p, bg);
  if (const Field p = top.child("potential"); p.present()) c.potential = parse_potential(p, bg);

  if (const Field s = top.child("sampling"); s.present()) {
    s.allow({"quad_cells", "z_cells", "sample_cells", "offset_radius", "offset_steps",
             "jacobian_samples", "seed"});
    SamplingSpec& sp = c.sampling;
    if (s.child("quad_cells").present()) sp.quad_cells = s.child("quad_cells").integer(1);
    if (s.child("z_cells").present()) sp.z_cells = s.child("z_cells").integer(1);
    if (s.child("sample_cells").present()) sp.sample_cells = s.child("sample_cells").integer(1);
    if (s.child("offset_radius").present()) {
      sp.offset_radius = s.child("offset_radius").number();
      if (sp.offset_radius < 0.0) s.child("offset_radius").error("must be nonnegative");
    }
    if (s.child("offset_steps").present()) sp.offset_steps = s.child("offset_steps").integer(0);
    if (s.child("jacobian_samples").present()) {
      sp.jacobian_samples = s.child("jacobian_samples").integer(1);
    }
    sp.seed = s.required("seed").as<unsigned long long>("a nonnegative integer");
  } else {
    top.required("sampling");
  }

  if (const Field d = top.child("densities"); d.present()) {
    d.allow({"u1", "u2", "normalize"});
    if (d.child("u1").present()) c.u1 = parse_density(d.child("u1"), bg);
    if (d.child("u2").present()) c.u2 = parse_density(d.child("u2"), bg);
    if (d.child("normalize").present()) c.normalize = d.child("normalize").flag();
  }
  if (c.normalize && bg.compact()) {
    const QuadratureGrid grid(bg, c.sampling.quad_cells);
    c.u1.normalize(bg, grid, c.tau1);
    c.u2.normalize(bg, grid, c.tau2);
  }

  if (const Field g = top.child("geodesic"); g.present()) {
    g.allow({"nodes", "starts", "atol", "rtol"});
    if (g.child("nodes").present()) c.geodesic.nodes = g.child("nodes").integer(kMinPathNodes);
    if (g.child("starts").present()) c.geodesic.starts = g.child("starts").integer(1);
    if (g.child("atol").present()) c.geodesic.atol = g.child("atol").positive();
    if (g.child("rtol").present()) c.geodesic.rtol = g.child("rtol").positive();
  }
  c.volume.geodesic.starts = c.geodesic.starts;
  c.volume.geodesic.atol = c.geodesic.atol;
  c.volume.geodesic.rtol = c.geodesic.rtol;

  if (const Field t = top.child("tolerances"); t.present()) {
    if (!t.is_map()) t.error("expected a mapping of check names to thresholds");
    const std::vector<std::string> checks = known_checks();
    for (const auto& kv : YAML::Node(root["tolerances"])) {
      const std::string key = kv.first.as<std::string>();
      const Field f = t.child(key);
      if (std::find(checks.begin(), checks.end(), key) == checks.end()) {
        f.error("no check named '" + key + "'");
      }
      c.tolerances[key] = f.number();
    }
  }

  if (const Field s = top.child("suites"); s.present()) {
    const std::vector<std::string> names = known_suites();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string name = s.item(i).text();
      if (std::find(names.begin(), names.end(), name) == names.end()) {
        s.item(i).error("unknown suite '" + name + "'");
      }
      c.suites.push_back(name);
    }
  }

  if (const Field l = top.child("ldist"); l.present()) {
    l.allow({"pairs", "random_pairs", "shots", "minimizers", "shot_speed"});
    if (const Field ps = l.child("pairs"); ps.present()) {
      for (std::size_t i = 0; i < ps.size(); ++i) {
        const Field p = ps.item(i);
        p.allow({"x", "tau1", "y", "tau2", "q"});
        LdistPair pair;
        pair.x = point_on(p.required("x"), bg);
        pair.y = point_on(p.required("y"), bg);
        pair.tau1 = p.required("tau1").number();
        check_time(p.child("tau1"), pair.tau1, bg);
        pair.tau2 = p.required("tau2").number();
        check_time(p.child("tau2"), pair.tau2, bg);
        if (!(pair.tau2 > pair.tau1)) p.child("tau2").error("must exceed tau1");
        if (p.child("q").present()) pair.expected = p.child("q").number();
        c.pairs.push_back(pair);
      }
    }
    if (l.child("random_pairs").present()) c.random_pairs = l.child("random_pairs").integer(0);
    if (l.child("shots").present()) c.shots = l.child("shots").integer(0);
    if (l.child("minimizers").present()) c.minimizers = l.child("minimizers").integer(0);
    if (l.child("shot_speed").present()) c.shot_speed = l.child("shot_speed").positive();
  }
  if (const Field j = top.child("jacobi"); j.present()) {
    j.allow({"alphas", "tracks"});
    if (j.child("alphas").present()) c.alphas = j.child("alphas").numbers();
    if (j.child("tracks").present()) c.tracks = j.child("tracks").integer(1);
  }
  if (const Field o = top.child("ot"); o.present()) {
    o.allow({"instances", "max_points"});
    if (o.child("instances").present()) c.ot_instances = o.child("instances").integer(0);
    if (o.child("max_points").present()) {
      c.ot_max_points = o.child("max_points").integer(2);
      if (c.ot_max_points > 9) o.child("max_points").error("brute force supports at most 9 points");
    }
  }
  if (const Field r = top.child("reduced_volume"); r.present()) {
    r.allow({"cells", "resolution", "budget"});
    if (r.child("cells").present()) c.volume.cells = r.child("cells").integer(0);
    if (r.child("resolution").present()) c.volume.resolution = r.child("resolution").positive();
    if (r.child("budget").present()) c.volume.budget = r.child("budget").positive();
  }
  if (const Field s = top.child("section3"); s.present()) {
    s.allow({"n_samples"});
    if (s.child("n_samples").present()) c.n_samples = s.child("n_samples").integer(1);
  }

  // suite prerequisites
  auto need = [&](const std::string& suite, bool ok, const std::string& field,
                  const std::string& what) {
    if (std::find(c.suites.begin(), c.suites.end(), suite) == c.suites.end() || ok) return;
    top.child(field).error("suite '" + suite + "' needs " + what);
  };
  const bool window = c.tau1 < c.tau && c.tau < c.tau2;
  need("theorem2", window, "times", "times.tau1 < times.tau < times.tau2");
  need("corollary", window, "times", "times.tau1 < times.tau < times.tau2");
  need("jacobi", c.tau2 > c.tau1 && c.tau1 > 0.0, "times", "times.tau1 > 0 and times.tau2");
  need("ot", c.tau2 > c.tau1, "times", "times.tau1 and times.tau2");
  need("reduced-volume", c.basepoint.size() > 0, "basepoint", "a basepoint");
  need("reduced-volume", !c.tau_grid.empty(), "times", "times.tau_grid");
  need("section3", c.basepoint.size() > 0, "basepoint", "a basepoint");
  need("section3", !c.tau1_list.empty() && c.tau > 0.0 && c.tau2 > c.tau, "times",
       "times.tau, times.tau2 and times.tau1_list");
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot read scenario file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_scenario(os.str(), path);
}

FlowBackground load_background(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot read background file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  YAML::Node root;
  try {
    root = YAML::Load(os.str());
  } catch (const YAML::Exception& e) {
    std::ostringstream msg;
    msg << path << ":" << e.mark.line + 1 << ":" << e.mark.column + 1 << ": " << e.msg;
    fail(ErrorCode::Config, msg.str());
  }
  const Field top(root, "", &path, YAML::Mark::null_mark());
  if (!top.is_map()) top.error("a scenario file is a mapping of blocks");
  return parse_background(top.required("background"));
}

}  // namespace lflow
