#include "plucker_rig/actions.hpp"

#include <algorithm>
#include <cmath>

#include "plucker_rig/error.hpp"

namespace plucker {

std::string_view to_string(ActionSpace space) {
  switch (space) {
    case ActionSpace::kAbsEe: return "abs_ee";
    case ActionSpace::kDeltaEe: return "delta_ee";
    case ActionSpace::kAbsJoint: return "abs_joint";
    case ActionSpace::kDeltaJoint: return "delta_joint";
  }
  return "unknown";
}

ActionSpace parse_action_space(std::string_view name) {
  for (ActionSpace s : {ActionSpace::kAbsEe, ActionSpace::kDeltaEe, ActionSpace::kAbsJoint,
                        ActionSpace::kDeltaJoint}) {
    if (name == to_string(s)) return s;
  }
  throw Error(ErrorCode::kSchemaError, "unknown action space '" + std::string(name) + "'");
}

bool is_ee_space(ActionSpace space) {
  return space == ActionSpace::kAbsEe || space == ActionSpace::kDeltaEe;
}

bool is_delta_space(ActionSpace space) {
  return space == ActionSpace::kDeltaEe || space == ActionSpace::kDeltaJoint;
}

RotationFrame parse_rotation_frame(std::string_view name) {
  if (name == "world") return RotationFrame::kWorld;
  if (name == "ee") return RotationFrame::kEndEffector;
  throw Error(ErrorCode::kSchemaError, "unknown rotation frame '" + std::string(name) + "'");
}

Quat canonical(const Quat& q) {
  const double norm = q.norm();
  if (!std::isfinite(norm) || norm == 0.0) {
    throw Error(ErrorCode::kSchemaError, "quaternion must be finite and nonzero");
  }
  Quat out(q.coeffs() / norm);
  if (out.w() < 0.0) out.coeffs() = -out.coeffs();
  return out;
}

double rotation_angle_between(const Quat& a, const Quat& b) {
  // atan2 form stays accurate for tiny angles, unlike acos(|dot|).
  const Quat rel = a.conjugate() * b;
  return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

Se3Pose Se3Pose::from_matrix(const Vec3& position, const Mat3& rotation) {
  return {position, canonical(Quat(rotation))};
}

Se3Pose Se3Pose::from_axis_angle(const Vec3& position, const Vec3& rotation_vector) {
  const double angle = rotation_vector.norm();
  if (angle == 0.0) return {position, Quat::Identity()};
  return {position, canonical(Quat(Eigen::AngleAxisd(angle, rotation_vector / angle)))};
}

Mat3 Se3Pose::rotation_matrix() const { return orientation.toRotationMatrix(); }

Vec3 Se3Pose::rotation_vector() const {
  const Quat q = canonical(orientation);
  const double s = q.vec().norm();
  if (s == 0.0) return Vec3::Zero();
  const double angle = 2.0 * std::atan2(s, q.w());
  return q.vec() / s * angle;
}

namespace {

void check_gripper(const std::vector<double>& gripper, std::size_t steps) {
  if (!gripper.empty() && gripper.size() != steps) {
    throw Error(ErrorCode::kShapeMismatch, "gripper channel length differs from step count");
  }
}

void require_space(ActionSpace actual, ActionSpace expected) {
  if (actual != expected) {
    throw Error(ErrorCode::kSpaceMismatch, "expected " + std::string(to_string(expected)) +
                                               " trajectory, got " +
                                               std::string(to_string(actual)));
  }
}

Quat relative_rotation(const Quat& prev, const Quat& next, RotationFrame frame) {
  return frame == RotationFrame::kWorld ? next * prev.conjugate() : prev.conjugate() * next;
}

Quat apply_rotation(const Quat& prev, const Quat& delta, RotationFrame frame) {
  return frame == RotationFrame::kWorld ? delta * prev : prev * delta;
}

void check_dof(const JointVector& j, int dof) {
  if (j.dof() != dof) {
    throw Error(ErrorCode::kDofMismatch, "joint vector has " + std::to_string(j.dof()) +
                                             " values, expected " + std::to_string(dof));
  }
}

}  // namespace

EeTrajectory ee_abs_to_delta(const EeTrajectory& traj, RotationFrame frame) {
  require_space(traj.space, ActionSpace::kAbsEe);
  if (traj.steps.empty()) throw Error(ErrorCode::kEmptyTrajectory, "no steps to difference");
  check_gripper(traj.gripper, traj.steps.size());

  const Se3Pose reference = traj.reference.value_or(traj.steps.front());
  EeTrajectory out;
  out.space = ActionSpace::kDeltaEe;
  out.gripper = traj.gripper;
  out.reference = reference;
  out.steps.reserve(traj.steps.size());
  const Se3Pose* prev = &reference;
  for (const Se3Pose& pose : traj.steps) {
    out.steps.push_back({pose.position - prev->position,
                         canonical(relative_rotation(prev->orientation, pose.orientation, frame))});
    prev = &pose;
  }
  return out;
}

EeTrajectory ee_delta_to_abs(const EeTrajectory& traj, RotationFrame frame) {
  require_space(traj.space, ActionSpace::kDeltaEe);
  if (!traj.reference) throw Error(ErrorCode::kMissingReference, "delta trajectory has no reference");
  check_gripper(traj.gripper, traj.steps.size());

  EeTrajectory out;
  out.space = ActionSpace::kAbsEe;
  out.gripper = traj.gripper;
  out.reference = traj.reference;
  out.steps.reserve(traj.steps.size());
  Se3Pose current{traj.reference->position, canonical(traj.reference->orientation)};
  for (const Se3Pose& delta : traj.steps) {
    current.position += delta.position;
    current.orientation = canonical(apply_rotation(current.orientation, delta.orientation, frame));
    out.steps.push_back(current);
  }
  return out;
}

JointTrajectory joint_abs_to_delta(const JointTrajectory& traj) {
  require_space(traj.space, ActionSpace::kAbsJoint);
  if (traj.steps.empty()) throw Error(ErrorCode::kEmptyTrajectory, "no steps to difference");
  check_gripper(traj.gripper, traj.steps.size());

  const JointVector reference = traj.reference.value_or(traj.steps.front());
  const int dof = reference.dof();
  JointTrajectory out;
  out.space = ActionSpace::kDeltaJoint;
  out.gripper = traj.gripper;
  out.reference = reference;
  out.steps.reserve(traj.steps.size());
  const JointVector* prev = &reference;
  for (const JointVector& j : traj.steps) {
    check_dof(j, dof);
    JointVector delta;
    delta.values.resize(dof);
    for (int i = 0; i < dof; ++i) delta.values[i] = j.values[i] - prev->values[i];
    out.steps.push_back(std::move(delta));
    prev = &j;
  }
  return out;
}

JointTrajectory joint_delta_to_abs(const JointTrajectory& traj) {
  require_space(traj.space, ActionSpace::kDeltaJoint);
  if (!traj.reference) throw Error(ErrorCode::kMissingReference, "delta trajectory has no reference");
  check_gripper(traj.gripper, traj.steps.size());

  const int dof = traj.reference->dof();
  JointTrajectory out;
  out.space = ActionSpace::kAbsJoint;
  out.gripper = traj.gripper;
  out.reference = traj.reference;
  out.steps.reserve(traj.steps.size());
  JointVector current = *traj.reference;
  for (const JointVector& delta : traj.steps) {
    check_dof(delta, dof);
    for (int i = 0; i < dof; ++i) current.values[i] += delta.values[i];
    out.steps.push_back(current);
  }
  return out;
}

ActionSpace space_of(const Trajectory& traj) {
  return std::visit([](const auto& t) { return t.space; }, traj);
}

Trajectory convert(const Trajectory& traj, ActionSpace from, ActionSpace to, RotationFrame frame) {
  require_space(space_of(traj), from);
  if (is_ee_space(from) != std::holds_alternative<EeTrajectory>(traj)) {
    throw Error(ErrorCode::kSpaceMismatch, "space tag does not match the step type");
  }
  if (from == to) return traj;
  if (is_ee_space(from) != is_ee_space(to)) {
    throw Error(ErrorCode::kSpaceMismatch, "cannot convert between end-effector and joint spaces");
  }
  if (is_ee_space(from)) {
    const auto& ee = std::get<EeTrajectory>(traj);
    return is_delta_space(to) ? ee_abs_to_delta(ee, frame) : ee_delta_to_abs(ee, frame);
  }
  const auto& joints = std::get<JointTrajectory>(traj);
  return is_delta_space(to) ? joint_abs_to_delta(joints) : joint_delta_to_abs(joints);
}

}  // namespace plucker
