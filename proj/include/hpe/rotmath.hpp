#pragma once

// Rotation representations for head pose.
//
// Euler convention: intrinsic yaw (about y), then pitch (about x), then roll
// (about z), so R = Ry(yaw) * Rx(pitch) * Rz(roll). Public angles are in
// degrees; axis-angle vectors are in radians.

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace hpe {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rotation matrix; see is_rotation() for the accepted tolerance.
using RotationMatrix = Mat3;

/// Rotation vector: direction is the axis, norm is the angle in radians.
using AxisAngle = Vec3;

struct EulerAngles {
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;

    friend bool operator==(const EulerAngles&, const EulerAngles&) = default;
};

/// Result of decomposing a matrix. When |pitch| is within 1e-6 deg of 90,
/// roll is pinned to 0 and yaw carries the remaining free angle.
struct EulerDecomposition {
    EulerAngles angles;
    bool gimbal_lock = false;
};

constexpr double kGimbalLockDeg = 1e-6;

double deg2rad(double deg) noexcept;
double rad2deg(double rad) noexcept;

/// Wraps into [-180, 180).
double wrap_degrees(double deg) noexcept;

/// ||M^T M - I||_inf <= tol and |det(M) - 1| <= tol.
bool is_rotation(const Mat3& m, double tol = 1e-9);

RotationMatrix euler_to_rotation(const EulerAngles& e);
EulerDecomposition rotation_to_euler(const RotationMatrix& r);

/// Rodrigues formula.
RotationMatrix axis_angle_to_rotation(const AxisAngle& a);

/// Inverse of axis_angle_to_rotation; the returned angle lies in [0, pi].
AxisAngle rotation_to_axis_angle(const RotationMatrix& r);

/// Cross-product matrix: skew(v) * u == v.cross(u).
Mat3 skew(const Vec3& v);

/// Wrap-aware absolute difference of two angles, in [0, 180].
double angle_error(double a_deg, double b_deg) noexcept;

}  // namespace hpe
