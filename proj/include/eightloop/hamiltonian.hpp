#pragma once

// Geometry of the unperturbed Duffing Hamiltonian H = y^2/2 - x^2/2 + x^4/4
// and the cubic perturbation
//   x' = y,  y' = x - x^3 + l1 y + l2 x^2 + l3 x y + l4 x^2 y.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string_view>

#include "eightloop/error.hpp"

namespace eightloop {

struct PhasePoint {
  double x = 0.0;
  double y = 0.0;
};

struct PerturbationParams {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
  double lambda4 = 0.0;

  bool is_zero() const noexcept {
    return lambda1 == 0.0 && lambda2 == 0.0 && lambda3 == 0.0 && lambda4 == 0.0;
  }
  std::array<double, 4> as_array() const noexcept { return {lambda1, lambda2, lambda3, lambda4}; }
};

enum class LevelClass { ExteriorOval, EightLoop, InteriorPair, CenterPair, Empty };

constexpr std::string_view to_string(LevelClass c) noexcept {
  switch (c) {
    case LevelClass::ExteriorOval: return "ExteriorOval";
    case LevelClass::EightLoop: return "EightLoop";
    case LevelClass::InteriorPair: return "InteriorPair";
    case LevelClass::CenterPair: return "CenterPair";
    case LevelClass::Empty: return "Empty";
  }
  return "Unknown";
}

/// Exterior level oval H = h > 0.
///
/// The quartic x^4 - 2x^2 - 4h has roots x^2 = 1 + s and x^2 = 1 - s with
/// s = sqrt(1 + 4h), so y^2 = (x_plus^2 - x^2)(x^2 + x_minus_sq) / 2 where
/// x_minus_sq = s - 1. Orientation is the direction of the Hamiltonian flow
/// (clockwise), which makes every even moment integral positive.
struct OvalGeometry {
  double h = 0.0;
  double x_plus = 0.0;
  double x_plus_sq = 0.0;
  double x_minus_sq = 0.0;
  int orientation = +1;
};

inline double energy(const PhasePoint& p) noexcept {
  const double x2 = p.x * p.x;
  return 0.5 * p.y * p.y - 0.5 * x2 + 0.25 * x2 * x2;
}

/// Gradient (H_x, H_y).
inline std::array<double, 2> energy_gradient(const PhasePoint& p) noexcept {
  return {p.x * p.x * p.x - p.x, p.y};
}

/// The polynomial added to y' by the perturbation.
inline double perturbation_term(const PhasePoint& p, const PerturbationParams& lam) noexcept {
  const double x = p.x;
  const double y = p.y;
  return lam.lambda1 * y + lam.lambda2 * x * x + lam.lambda3 * x * y + lam.lambda4 * x * x * y;
}

inline std::array<double, 2> vector_field(const PhasePoint& p, const PerturbationParams& lam) noexcept {
  return {p.y, p.x - p.x * p.x * p.x + perturbation_term(p, lam)};
}

/// dH/dt along the perturbed flow: y times the perturbation term.
inline double energy_rate(const PhasePoint& p, const PerturbationParams& lam) noexcept {
  return p.y * perturbation_term(p, lam);
}

inline LevelClass classify_level(double h) noexcept {
  if (h > 0.0) return LevelClass::ExteriorOval;
  if (h == 0.0) return LevelClass::EightLoop;
  if (h > -0.25) return LevelClass::InteriorPair;
  if (h == -0.25) return LevelClass::CenterPair;
  return LevelClass::Empty;
}

inline OvalGeometry oval_geometry(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw Error(ErrorCode::NonPositiveEnergy, "exterior oval needs finite h > 0");
  }
  const double s = std::sqrt(1.0 + 4.0 * h);
  OvalGeometry g;
  g.h = h;
  g.x_plus_sq = 1.0 + s;
  g.x_plus = std::sqrt(g.x_plus_sq);
  // s - 1 loses digits for small h; 4h / (s + 1) does not.
  g.x_minus_sq = 4.0 * h / (s + 1.0);
  return g;
}

/// Outer turning point of the oval on the positive x axis.
inline double turning_point(double h) { return oval_geometry(h).x_plus; }

/// Upper branch y_+(x) >= 0 of the oval H = h.
inline double branch_y(double x, double h) {
  const OvalGeometry g = oval_geometry(h);
  const double x2 = x * x;
  // A few ulps of slack so that x = turning_point(h) is accepted.
  if (!(x2 <= g.x_plus_sq * (1.0 + 8.0 * std::numeric_limits<double>::epsilon()))) {
    throw Error(ErrorCode::OutOfRange, "|x| beyond the turning point of the oval");
  }
  const double gap = std::max(0.0, g.x_plus_sq - x2);
  return std::sqrt(0.5 * gap * (x2 + g.x_minus_sq));
}

}  // namespace eightloop
