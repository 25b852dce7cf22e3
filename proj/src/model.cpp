#include "twintune/model.hpp"

#include <Eigen/Eigenvalues>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace twintune {

namespace {

VecX gather(const RobotModel& m, double Joint::* field) {
  VecX out(m.nq());
  for (int i = 0; i < m.nq(); ++i) out[i] = m.joints[i].*field;
  return out;
}

[[noreturn]] void fail_at(const std::string& origin, int line,
                          const std::string& msg) {
  throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + msg);
}

Iso3 make_origin(const Vec3& xyz, const Vec3& rpy) {
  Iso3 T = Iso3::Identity();
  T.linear() = (Eigen::AngleAxisd(rpy[2], Vec3::UnitZ()) *
                Eigen::AngleAxisd(rpy[1], Vec3::UnitY()) *
                Eigen::AngleAxisd(rpy[0], Vec3::UnitX()))
                   .toRotationMatrix();
  T.translation() = xyz;
  return T;
}

}  // namespace

VecX RobotModel::q_min() const { return gather(*this, &Joint::q_min); }
VecX RobotModel::q_max() const { return gather(*this, &Joint::q_max); }
VecX RobotModel::v_min() const { return gather(*this, &Joint::v_min); }
VecX RobotModel::v_max() const { return gather(*this, &Joint::v_max); }
VecX RobotModel::u_min() const { return gather(*this, &Joint::u_min); }
VecX RobotModel::u_max() const { return gather(*this, &Joint::u_max); }

void RobotModel::validate() const {
  if (joints.empty()) throw std::invalid_argument("model has no joints");
  for (const Joint& j : joints) {
    const std::string who = "joint '" + j.name + "': ";
    if (!(j.mass > 0.0)) throw std::invalid_argument(who + "mass must be > 0");
    if ((j.inertia - j.inertia.transpose()).norm() > 1e-12)
      throw std::invalid_argument(who + "inertia must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(j.inertia);
    if (es.eigenvalues().minCoeff() < 0.0)
      throw std::invalid_argument(who + "inertia must be positive semi-definite");
    if (std::abs(j.axis.norm() - 1.0) > 1e-9)
      throw std::invalid_argument(who + "axis must be a unit vector");
    if (!(j.q_min < j.q_max) || !(j.v_min < j.v_max) || !(j.u_min < j.u_max))
      throw std::invalid_argument(who + "limits must satisfy min < max");
  }
}

RobotModel parse_robot_model(std::istream& in, const std::string& origin_name) {
  RobotModel model;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  Joint* current = nullptr;
  bool in_ee = false;
  Vec3 ee_xyz = Vec3::Zero(), ee_rpy = Vec3::Zero();

  auto need_values = [&](std::istringstream& ss, double* out, int count,
                         const std::string& key) {
    for (int i = 0; i < count; ++i)
      if (!(ss >> out[i]))
        fail_at(origin_name, lineno,
                "key '" + key + "' expects " + std::to_string(count) + " numbers");
  };

  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;

    if (!have_header) {
      if (key != "twintune-robot")
        fail_at(origin_name, lineno, "missing 'twintune-robot <version>' header");
      int version = 0;
      if (!(ss >> version) || version != 1)
        fail_at(origin_name, lineno, "unsupported model format version");
      have_header = true;
      continue;
    }

    if (key == "name") {
      ss >> model.name;
    } else if (key == "gravity") {
      need_values(ss, model.gravity.data(), 3, key);
    } else if (key == "joint") {
      if (current || in_ee) fail_at(origin_name, lineno, "nested 'joint' block");
      model.joints.emplace_back();
      current = &model.joints.back();
      if (!(ss >> current->name))
        fail_at(origin_name, lineno, "'joint' requires a name");
    } else if (key == "ee") {
      if (current || in_ee) fail_at(origin_name, lineno, "nested 'ee' block");
      in_ee = true;
    } else if (key == "end") {
      if (!current && !in_ee) fail_at(origin_name, lineno, "'end' outside a block");
      if (current) current = nullptr;
      if (in_ee) {
        model.ee_offset = make_origin(ee_xyz, ee_rpy);
        in_ee = false;
      }
    } else if (current || in_ee) {
      Vec3 xyz = Vec3::Zero(), rpy = Vec3::Zero();
      if (key == "xyz") {
        need_values(ss, xyz.data(), 3, key);
        if (in_ee)
          ee_xyz = xyz;
        else
          current->origin.translation() = xyz;
      } else if (key == "rpy") {
        need_values(ss, rpy.data(), 3, key);
        if (in_ee) {
          ee_rpy = rpy;
        } else {
          const Vec3 t = current->origin.translation();
          current->origin = make_origin(t, rpy);
        }
      } else if (in_ee) {
        fail_at(origin_name, lineno, "unknown key in 'ee' block: " + key);
      } else if (key == "axis") {
        need_values(ss, current->axis.data(), 3, key);
        current->axis.normalize();
      } else if (key == "mass") {
        need_values(ss, &current->mass, 1, key);
      } else if (key == "com") {
        need_values(ss, current->com.data(), 3, key);
      } else if (key == "inertia") {
        double v[6];
        need_values(ss, v, 6, key);
        current->inertia << v[0], v[3], v[4], v[3], v[1], v[5], v[4], v[5], v[2];
      } else if (key == "limit_q") {
        need_values(ss, &current->q_min, 1, key);
        need_values(ss, &current->q_max, 1, key);
      } else if (key == "limit_v") {
        need_values(ss, &current->v_min, 1, key);
        need_values(ss, &current->v_max, 1, key);
      } else if (key == "limit_u") {
        need_values(ss, &current->u_min, 1, key);
        need_values(ss, &current->u_max, 1, key);
      } else {
        fail_at(origin_name, lineno, "unknown key in 'joint' block: " + key);
      }
    } else {
      fail_at(origin_name, lineno, "unknown top-level key: " + key);
    }
  }
  if (current || in_ee) fail_at(origin_name, lineno, "unterminated block at EOF");
  if (!have_header) fail_at(origin_name, lineno, "empty model file");

  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(origin_name + ": " + e.what());
  }
  return model;
}

RobotModel load_robot_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  return parse_robot_model(in, path);
}

RobotModel make_planar_arm(int links, double link_length, double link_mass) {
  RobotModel model;
  model.name = "planar" + std::to_string(links);
  for (int i = 0; i < links; ++i) {
    Joint j;
    j.name = "j" + std::to_string(i);
    j.origin = Iso3::Identity();
    if (i > 0) j.origin.translation() = Vec3(link_length, 0, 0);
    j.axis = Vec3::UnitZ();
    j.mass = link_mass;
    j.com = Vec3(link_length / 2.0, 0, 0);
    const double rod = link_mass * link_length * link_length / 12.0;
    j.inertia = Vec3(1e-6, rod, rod).asDiagonal();
    j.q_min = -10.0;
    j.q_max = 10.0;
    j.v_min = -50.0;
    j.v_max = 50.0;
    j.u_min = -500.0;
    j.u_max = 500.0;
    model.joints.push_back(j);
  }
  model.ee_offset.translation() = Vec3(link_length, 0, 0);
  model.gravity = Vec3(0, 0, -9.81);  // links move in the horizontal plane
  model.validate();
  return model;
}

RobotModel make_point_mass_pendulum(double mass, double length) {
  // q = 0 is horizontal along +x; positive q swings the tip upward in -z
  // convention such that free fall at q = 0 gives a = -g/l.
  RobotModel model;
  model.name = "pendulum";
  Joint j;
  j.name = "hinge";
  j.origin = Iso3::Identity();
  j.axis = -Vec3::UnitY();
  j.mass = mass;
  j.com = Vec3(length, 0, 0);
  j.inertia = Mat3::Zero();
  j.q_min = -10.0;
  j.q_max = 10.0;
  j.v_min = -100.0;
  j.v_max = 100.0;
  j.u_min = -1000.0;
  j.u_max = 1000.0;
  model.joints.push_back(j);
  model.ee_offset.translation() = Vec3(length, 0, 0);
  model.validate();
  return model;
}

}  // namespace twintune
