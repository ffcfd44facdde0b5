#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

namespace bbm {

/// A point in R^dim. Only the first `dim` coordinates are meaningful.
using Point = std::array<double, 3>;

double norm(const Point& x, int dim);

enum class ShapeKind { Bump, Table, IndicatorSmoothed };

/// Parameters for make_potential. Fields that do not apply to a shape are
/// ignored. In dim=3 every shape is radial about the origin and `center`
/// must be zero; table abscissae are then radii starting at 0.
struct PotentialSpec {
  int dim = 3;
  ShapeKind shape = ShapeKind::Bump;
  double center = 0.0;
  double radius = 1.0;
  double height = 1.0;
  double smoothing = 0.05;
  std::vector<double> xs;
  std::vector<double> vs;
};

/// Branching field v: continuous, nonnegative, compactly supported and not
/// identically zero. Immutable after construction.
class Potential {
public:
  /// Validates `spec`; throws ValidationError on any violated invariant.
  explicit Potential(PotentialSpec spec);

  int dim() const { return spec_.dim; }
  ShapeKind shape() const { return spec_.shape; }
  const PotentialSpec& spec() const { return spec_; }

  double v_max() const { return v_max_; }
  /// Smallest r with v = 0 outside |x| <= r.
  double support_radius() const { return support_radius_; }
  /// Support in the scalar coordinate: [lo, hi] on the line (dim=1), or the
  /// radial range [0, R] (dim=3).
  double support_lo() const { return lo_; }
  double support_hi() const { return hi_; }

  /// v evaluated in the scalar coordinate: position on the line (dim=1) or
  /// radius (dim=3).
  double eval_scalar(double s) const;
  double operator()(const Point& x) const;

  /// Points in [support_lo, support_hi] where v is not smooth, sorted,
  /// endpoints included. Quadrature panels are aligned to these.
  std::vector<double> breakpoints() const;

  /// The field x -> v(x / s).
  Potential scaled(double s) const;

private:
  PotentialSpec spec_;
  double v_max_ = 0.0;
  double support_radius_ = 0.0;
  double lo_ = 0.0;
  double hi_ = 0.0;
};

Potential make_potential(const PotentialSpec& spec);
double eval_v(const Potential& p, const Point& x);

/// Parses {"dim":3,"shape":"bump","radius":1.0,"height":1.0} and the
/// "table" / "indicator_smoothed" analogues.
Potential potential_from_json(const nlohmann::json& j);
nlohmann::json potential_to_json(const Potential& p);

} // namespace bbm
