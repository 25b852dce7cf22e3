#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <string>
#include <vector>

namespace twintune {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Iso3 = Eigen::Isometry3d;

/// One revolute joint and the link rigidly attached after it.
/// `origin` is the fixed transform from the parent link frame to the joint
/// frame; the joint rotates about `axis` (unit vector, joint frame).
/// Mass properties are expressed in the link (= rotated joint) frame.
struct Joint {
  std::string name;
  Iso3 origin = Iso3::Identity();
  Vec3 axis = Vec3::UnitZ();
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();  // about COM, link frame
  double q_min = 0.0, q_max = 0.0;
  double v_min = 0.0, v_max = 0.0;
  double u_min = 0.0, u_max = 0.0;
};

/// Fixed-base serial kinematic chain with an end-effector frame attached to
/// the last link. n_q = n_v = n_u = joints.size().
struct RobotModel {
  std::string name;
  std::vector<Joint> joints;
  Iso3 ee_offset = Iso3::Identity();  // last link frame -> end-effector frame
  Vec3 gravity{0.0, 0.0, -9.81};

  int nq() const { return static_cast<int>(joints.size()); }
  int nv() const { return nq(); }
  int nu() const { return nq(); }
  int nx() const { return nq() + nv(); }

  VecX q_min() const;
  VecX q_max() const;
  VecX v_min() const;
  VecX v_max() const;
  VecX u_min() const;
  VecX u_max() const;

  /// Throws std::invalid_argument on any violated invariant (non-positive
  /// mass, non-SPD inertia, inverted limits, ...).
  void validate() const;
};

struct JointState {
  VecX q;
  VecX v;
};

struct EePose {
  Vec3 p = Vec3::Zero();
  Mat3 R = Mat3::Identity();
};

/// Parses the versioned text model format (see models/README or the bundled
/// files). Throws std::runtime_error with a line-numbered message on any
/// syntax or invariant violation.
RobotModel load_robot_model(const std::string& path);
RobotModel parse_robot_model(std::istream& in, const std::string& origin_name);

/// Bundled analytic test models.
RobotModel make_planar_arm(int links, double link_length = 1.0, double link_mass = 1.0);
RobotModel make_point_mass_pendulum(double mass = 1.0, double length = 1.0);

}  // namespace twintune
