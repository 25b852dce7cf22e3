#pragma once

#include "twintune/model.hpp"

namespace twintune {

enum class ShapeKind { kSquare, kHexagon, kCircle };

/// Task-space reference shape traced once over `duration` seconds at constant
/// path speed, laid out in the plane spanned by the first two columns of
/// `plane` around `center`. Polygons use the circumradius-from-side
/// convention (regular hexagon side == circumradius).
struct ShapeSpec {
  ShapeKind kind = ShapeKind::kHexagon;
  double size = 0.1;  // side length (polygons) or radius (circle), m
  Vec3 center = Vec3::Zero();
  Mat3 plane = Mat3::Identity();
  double duration = 30.0;
  Mat3 R_des = Mat3::Identity();  // held constant over the episode

  void validate() const;
};

struct ReferenceSample {
  Vec3 p_des = Vec3::Zero();
  Mat3 R_des = Mat3::Identity();
  Vec3 v_des = Vec3::Zero();
};

ShapeKind parse_shape_kind(const std::string& name);

/// Reference at time t; throws std::out_of_range if t is outside
/// [0, duration]. The path is closed: phi = 0 and phi = 1 coincide.
ReferenceSample sample_reference(const ShapeSpec& spec, double t);

/// N+1 samples at t0, t0+dt, ..., t0+N*dt, clamped to the final reference
/// past the end of the trajectory.
std::vector<ReferenceSample> trajectory_to_ocp_references(const ShapeSpec& spec,
                                                          double t0, int N,
                                                          double dt);

}  // namespace twintune
