#include "twintune/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace twintune {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

int polygon_sides(ShapeKind kind) {
  return kind == ShapeKind::kSquare ? 4 : 6;
}

/// Vertex k of the polygon in local plane coordinates.
Eigen::Vector2d polygon_vertex(const ShapeSpec& spec, int k) {
  const int n = polygon_sides(spec.kind);
  // Circumradius: square diagonal = size*sqrt(2); hexagon R = side.
  const double R = spec.kind == ShapeKind::kSquare
                       ? spec.size / std::numbers::sqrt2
                       : spec.size;
  const double ang = kTau * k / n;
  return {R * std::cos(ang), R * std::sin(ang)};
}

ReferenceSample eval_phi(const ShapeSpec& spec, double phi) {
  ReferenceSample out;
  out.R_des = spec.R_des;
  Eigen::Vector2d p, dp;  // position and d/dphi in plane coordinates
  if (spec.kind == ShapeKind::kCircle) {
    const double a = kTau * phi;
    p = {spec.size * std::cos(a), spec.size * std::sin(a)};
    dp = {-spec.size * kTau * std::sin(a), spec.size * kTau * std::cos(a)};
  } else {
    const int n = polygon_sides(spec.kind);
    const double s = phi * n;
    int edge = static_cast<int>(std::floor(s));
    if (edge >= n) edge = n - 1;  // phi == 1 lands on the closing vertex
    const double f = s - edge;
    const Eigen::Vector2d a = polygon_vertex(spec, edge);
    const Eigen::Vector2d b = polygon_vertex(spec, edge + 1 == n ? 0 : edge + 1);
    p = a + f * (b - a);
    dp = n * (b - a);
  }
  out.p_des = spec.center + spec.plane.leftCols<2>() * p;
  out.v_des = spec.plane.leftCols<2>() * dp / spec.duration;
  return out;
}

}  // namespace

void ShapeSpec::validate() const {
  if (!(size > 0.0)) throw std::invalid_argument("shape size must be > 0");
  if (!(duration > 0.0)) throw std::invalid_argument("shape duration must be > 0");
  if ((plane.transpose() * plane - Mat3::Identity()).norm() > 1e-9 ||
      (R_des.transpose() * R_des - Mat3::Identity()).norm() > 1e-9)
    throw std::invalid_argument("shape rotations must be orthonormal");
}

ShapeKind parse_shape_kind(const std::string& name) {
  if (name == "square") return ShapeKind::kSquare;
  if (name == "hexagon") return ShapeKind::kHexagon;
  if (name == "circle") return ShapeKind::kCircle;
  throw std::invalid_argument("unknown shape kind: " + name);
}

ReferenceSample sample_reference(const ShapeSpec& spec, double t) {
  if (t < 0.0 || t > spec.duration)
    throw std::out_of_range("reference time outside [0, duration]");
  return eval_phi(spec, t / spec.duration);
}

std::vector<ReferenceSample> trajectory_to_ocp_references(const ShapeSpec& spec,
                                                          double t0, int N,
                                                          double dt) {
  std::vector<ReferenceSample> out;
  out.reserve(N + 1);
  for (int k = 0; k <= N; ++k) {
    const double t = std::clamp(t0 + k * dt, 0.0, spec.duration);
    out.push_back(sample_reference(spec, t));
  }
  return out;
}

}  // namespace twintune
