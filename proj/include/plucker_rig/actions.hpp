#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Geometry>

#include "plucker_rig/geometry.hpp"

namespace plucker {

using Quat = Eigen::Quaterniond;

enum class ActionSpace { kAbsEe, kDeltaEe, kAbsJoint, kDeltaJoint };

std::string_view to_string(ActionSpace space);
ActionSpace parse_action_space(std::string_view name);  // throws SchemaError
bool is_ee_space(ActionSpace space);
bool is_delta_space(ActionSpace space);

// Frame in which rotation deltas are expressed.
//   world: dq = q_k * q_{k-1}^-1, accumulated as q_k = dq * q_{k-1}
//   ee:    dq = q_{k-1}^-1 * q_k, accumulated as q_k = q_{k-1} * dq
// Position deltas are world-frame in both cases.
enum class RotationFrame { kWorld, kEndEffector };

RotationFrame parse_rotation_frame(std::string_view name);

// Unit quaternion with w >= 0. Throws SchemaError for zero/non-finite input.
Quat canonical(const Quat& q);

// Geodesic angle between two orientations, insensitive to the double cover.
double rotation_angle_between(const Quat& a, const Quat& b);

struct Se3Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();  // unit, w >= 0

  static Se3Pose from_matrix(const Vec3& position, const Mat3& rotation);
  static Se3Pose from_axis_angle(const Vec3& position, const Vec3& rotation_vector);

  Mat3 rotation_matrix() const;
  // Axis times angle, angle in [0, pi].
  Vec3 rotation_vector() const;
};

struct JointVector {
  std::vector<double> values;
  int dof() const { return static_cast<int>(values.size()); }
};

// Gripper commands ride along each step untouched by every conversion.
struct EeTrajectory {
  ActionSpace space = ActionSpace::kAbsEe;
  std::vector<Se3Pose> steps;
  std::vector<double> gripper;  // empty or one per step
  std::optional<Se3Pose> reference;
};

struct JointTrajectory {
  ActionSpace space = ActionSpace::kAbsJoint;
  std::vector<JointVector> steps;
  std::vector<double> gripper;
  std::optional<JointVector> reference;
};

using Trajectory = std::variant<EeTrajectory, JointTrajectory>;

// Delta step k is taken against step k-1; step 0 is taken against the
// trajectory's reference when one is stored and against pose 0 otherwise, so
// the output has the same length and carries that reference.
EeTrajectory ee_abs_to_delta(const EeTrajectory& traj, RotationFrame frame = RotationFrame::kWorld);
EeTrajectory ee_delta_to_abs(const EeTrajectory& traj, RotationFrame frame = RotationFrame::kWorld);
JointTrajectory joint_abs_to_delta(const JointTrajectory& traj);
JointTrajectory joint_delta_to_abs(const JointTrajectory& traj);

// Dispatches on (from, to); identity when they match. Throws SpaceMismatch when
// the trajectory's tag differs from `from` or the spaces are of different kinds.
Trajectory convert(const Trajectory& traj, ActionSpace from, ActionSpace to,
                   RotationFrame frame = RotationFrame::kWorld);

ActionSpace space_of(const Trajectory& traj);

}  // namespace plucker
