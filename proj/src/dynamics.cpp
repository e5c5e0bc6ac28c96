#include "magswim/dynamics.hpp"

#include <string>

namespace magswim {

void validate(const Parameters& params) {
  if (!(params.a > 0.0) || !std::isfinite(params.a)) {
    throw std::invalid_argument("Mason number a must be positive, got " + std::to_string(params.a));
  }
  if (!(params.psi >= 0.0 && params.psi <= std::numbers::pi)) {
    throw std::invalid_argument("conical angle psi must lie in [0, pi], got " +
                                std::to_string(params.psi));
  }
}

VecX FrameState::to_vector() const {
  VecX y(9);
  y << e1, e2, e3;
  return y;
}

FrameState FrameState::from_vector(const VecX& y) {
  return {y.segment<3>(0), y.segment<3>(3), y.segment<3>(6)};
}

FrameState FrameState::from_matrix(const Mat3& columns) {
  return {columns.col(0), columns.col(1), columns.col(2)};
}

VecX EBState::to_vector() const {
  VecX y(6);
  y << e3, b;
  return y;
}

EBState EBState::from_vector(const VecX& y) { return {y.segment<3>(0), y.segment<3>(3)}; }

Vec3 field_lab(double t, const FrameState& state, const Parameters& params) {
  const double phase = params.a * t;
  return std::sin(params.psi) * (std::cos(phase) * state.e1 + std::sin(phase) * state.e2) +
         std::cos(params.psi) * state.e3;
}

FrameState rhs_frames(double t, const FrameState& state, const Parameters& params,
                      const SwimmerModel& model) {
  const Vec3 w = model.p * field_lab(t, state, params);
  return {-w.cross(state.e1), -w.cross(state.e2), -w.cross(state.e3)};
}

EBState rhs_eB(const EBState& state, const Parameters& params, const SwimmerModel& model) {
  const Vec3 w = model.p * state.b;
  return {-w.cross(state.e3), (params.a * state.e3 - w).cross(state.b)};
}

Vec4 quaternion_multiply(const Vec4& lhs, const Vec4& rhs) {
  const Vec3 u = lhs.head<3>();
  const Vec3 v = rhs.head<3>();
  const double s = lhs(3);
  const double t = rhs(3);
  Vec4 out;
  out.head<3>() = s * v + t * u + u.cross(v);
  out(3) = s * t - u.dot(v);
  return out;
}

Vec4 quaternion_from_rotation(const Mat3& rot) {
  const Eigen::Quaterniond quat(rot);
  Vec4 q = quat.coeffs().normalized();  // (x, y, z, w)
  if (q(3) < 0.0) q = -q;
  return q;
}

FrameState frames_from_quaternion(const Vec4& q, double t, const Parameters& params) {
  return FrameState::from_matrix(quat_to_rotation(q) * rotation_z(-params.a * t));
}

Vec4 quaternion_from_frames(const FrameState& frames, double t, const Parameters& params) {
  return quaternion_from_rotation(frames.matrix() * rotation_z(params.a * t));
}

EBState eb_from_quaternion(const Vec4& q, const Parameters& params) {
  const Mat3 rot = quat_to_rotation(q);
  return {rot.col(2), rot * params.field_magnetic()};
}

}  // namespace magswim
