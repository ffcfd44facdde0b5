#include "bbm/potential.hpp"

#include <algorithm>
#include <cmath>

#include "bbm/errors.hpp"

namespace bbm {

namespace {

// C^2 step, 0 below t=0 and 1 above t=1.
double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("potential: " + what);
}

} // namespace

double norm(const Point& x, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += x[i] * x[i];
  return std::sqrt(s);
}

Potential::Potential(PotentialSpec spec) : spec_(std::move(spec)) {
  const auto& s = spec_;
  require(s.dim == 1 || s.dim == 3, "dim must be 1 or 3");
  require(std::isfinite(s.center), "center must be finite");
  require(s.dim == 1 || s.center == 0.0, "3D shapes are radial about the origin");

  switch (s.shape) {
  case ShapeKind::Bump:
  case ShapeKind::IndicatorSmoothed:
    require(s.radius > 0.0 && std::isfinite(s.radius), "radius must be positive");
    require(s.height >= 0.0 && std::isfinite(s.height), "height must be nonnegative");
    if (s.shape == ShapeKind::IndicatorSmoothed) {
      require(s.smoothing > 0.0 && s.smoothing < s.radius,
              "smoothing width must lie in (0, radius)");
    }
    v_max_ = s.height;
    if (s.dim == 1) {
      lo_ = s.center - s.radius;
      hi_ = s.center + s.radius;
    } else {
      lo_ = 0.0;
      hi_ = s.radius;
    }
    break;
  case ShapeKind::Table: {
    require(s.xs.size() >= 2 && s.xs.size() == s.vs.size(),
            "table needs matching abscissae and values (at least two)");
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      require(std::isfinite(s.xs[i]) && std::isfinite(s.vs[i]), "table entries must be finite");
      require(s.vs[i] >= 0.0, "table values must be nonnegative");
      if (i > 0) require(s.xs[i] > s.xs[i - 1], "table abscissae must be strictly increasing");
    }
    require(s.vs.back() == 0.0, "table must end with value 0");
    if (s.dim == 1) {
      require(s.vs.front() == 0.0, "table must start with value 0");
    } else {
      require(s.xs.front() == 0.0, "radial table must start at r=0");
    }
    v_max_ = *std::max_element(s.vs.begin(), s.vs.end());
    // Support ends at the knots bracketing the nonzero values.
    std::size_t first = 0;
    while (first < s.vs.size() && s.vs[first] == 0.0) ++first;
    require(first < s.vs.size(), "v must not vanish identically");
    std::size_t last = s.vs.size() - 1;
    while (s.vs[last] == 0.0) --last;
    lo_ = s.dim == 1 ? s.xs[first - 1] : 0.0;
    hi_ = s.xs[last + 1];
    break;
  }
  }
  require(v_max_ > 0.0, "v must not vanish identically");
  support_radius_ = std::max(std::abs(lo_), std::abs(hi_));
  require(hi_ > lo_, "empty support");
}

double Potential::eval_scalar(double x) const {
  const auto& s = spec_;
  switch (s.shape) {
  case ShapeKind::Bump: {
    const double z = (x - s.center) / s.radius;
    const double z2 = z * z;
    if (z2 >= 1.0) return 0.0;
    return s.height * std::exp(1.0 - 1.0 / (1.0 - z2));
  }
  case ShapeKind::IndicatorSmoothed: {
    const double d = std::abs(x - s.center);
    return s.height * smoothstep((s.radius - d) / s.smoothing);
  }
  case ShapeKind::Table: {
    const auto& xs = s.xs;
    if (x <= xs.front()) return s.dim == 3 ? s.vs.front() : 0.0;
    if (x >= xs.back()) return 0.0;
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs.begin());
    const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return (1.0 - t) * s.vs[i - 1] + t * s.vs[i];
  }
  }
  return 0.0;
}

double Potential::operator()(const Point& x) const {
  return spec_.dim == 1 ? eval_scalar(x[0]) : eval_scalar(norm(x, 3));
}

std::vector<double> Potential::breakpoints() const {
  std::vector<double> bp{lo_, hi_};
  const auto& s = spec_;
  switch (s.shape) {
  case ShapeKind::Bump:
    if (s.dim == 1) bp.push_back(s.center);
    break;
  case ShapeKind::IndicatorSmoothed:
    if (s.dim == 1) {
      bp.push_back(s.center - s.radius + s.smoothing);
      bp.push_back(s.center + s.radius - s.smoothing);
    } else {
      bp.push_back(s.radius - s.smoothing);
    }
    break;
  case ShapeKind::Table:
    for (double x : s.xs)
      if (x > lo_ && x < hi_) bp.push_back(x);
    break;
  }
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  return bp;
}

Potential Potential::scaled(double factor) const {
  if (!(factor > 0.0)) throw ValidationError("potential: scale factor must be positive");
  PotentialSpec s = spec_;
  s.center *= factor;
  s.radius *= factor;
  s.smoothing *= factor;
  for (double& x : s.xs) x *= factor;
  return Potential(std::move(s));
}

Potential make_potential(const PotentialSpec& spec) { return Potential(spec); }

double eval_v(const Potential& p, const Point& x) { return p(x); }

Potential potential_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("potential: expected a JSON object");
  PotentialSpec s;
  try {
    s.dim = j.value("dim", 3);
    const std::string shape = j.at("shape").get<std::string>();
    if (shape == "bump") {
      s.shape = ShapeKind::Bump;
    } else if (shape == "table") {
      s.shape = ShapeKind::Table;
      s.xs = j.at("xs").get<std::vector<double>>();
      s.vs = j.at("vs").get<std::vector<double>>();
    } else if (shape == "indicator_smoothed") {
      s.shape = ShapeKind::IndicatorSmoothed;
      s.smoothing = j.at("smoothing").get<double>();
    } else {
      throw ValidationError("potential: unknown shape '" + shape + "'");
    }
    if (s.shape != ShapeKind::Table) {
      s.radius = j.at("radius").get<double>();
      s.height = j.value("height", 1.0);
    }
    s.center = j.value("center", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("potential: ") + e.what());
  }
  return Potential(std::move(s));
}

nlohmann::json potential_to_json(const Potential& p) {
  const auto& s = p.spec();
  nlohmann::json j;
  j["dim"] = s.dim;
  switch (s.shape) {
  case ShapeKind::Bump:
    j["shape"] = "bump";
    break;
  case ShapeKind::IndicatorSmoothed:
    j["shape"] = "indicator_smoothed";
    j["smoothing"] = s.smoothing;
    break;
  case ShapeKind::Table:
    j["shape"] = "table";
    j["xs"] = s.xs;
    j["vs"] = s.vs;
    break;
  }
  if (s.shape != ShapeKind::Table) {
    j["radius"] = s.radius;
    j["height"] = s.height;
  }
  if (s.center != 0.0) j["center"] = s.center;
  return j;
}

} // namespace bbm
