#pragma once

#include <Eigen/Dense>

namespace magswim {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vector4 = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Skew matrix [a x] such that cross_matrix(a) * b == a.cross(b).
template <typename Derived>
Matrix3<typename Derived::Scalar> cross_matrix(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  Matrix3<Scalar> m;
  m << Scalar(0), -a(2), a(1),
       a(2), Scalar(0), -a(0),
       -a(1), a(0), Scalar(0);
  return m;
}

/// Rotation by phi about the third axis.
template <typename Scalar>
Matrix3<Scalar> rotation_z(const Scalar& phi) {
  using std::cos;
  using std::sin;
  const Scalar c = cos(phi);
  const Scalar s = sin(phi);
  Matrix3<Scalar> r;
  r << c, -s, Scalar(0),
       s, c, Scalar(0),
       Scalar(0), Scalar(0), Scalar(1);
  return r;
}

/// Rotation by phi about the second axis.
template <typename Scalar>
Matrix3<Scalar> rotation_y(const Scalar& phi) {
  using std::cos;
  using std::sin;
  const Scalar c = cos(phi);
  const Scalar s = sin(phi);
  Matrix3<Scalar> r;
  r << c, Scalar(0), s,
       Scalar(0), Scalar(1), Scalar(0),
       -s, Scalar(0), c;
  return r;
}

}  // namespace magswim
