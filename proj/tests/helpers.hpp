#pragma once

#include "bbm/potential.hpp"

namespace testing {

inline bbm::Potential bump(int dim = 3, double radius = 1.0, double height = 1.0) {
  bbm::PotentialSpec s;
  s.dim = dim;
  s.shape = bbm::ShapeKind::Bump;
  s.radius = radius;
  s.height = height;
  return bbm::make_potential(s);
}

inline bbm::Potential indicator(int dim, double eps, double radius = 1.0) {
  bbm::PotentialSpec s;
  s.dim = dim;
  s.shape = bbm::ShapeKind::IndicatorSmoothed;
  s.radius = radius;
  s.smoothing = eps;
  return bbm::make_potential(s);
}

inline bbm::Potential table(int dim, std::vector<double> xs, std::vector<double> vs) {
  bbm::PotentialSpec s;
  s.dim = dim;
  s.shape = bbm::ShapeKind::Table;
  s.xs = std::move(xs);
  s.vs = std::move(vs);
  return bbm::make_potential(s);
}

} // namespace testing
