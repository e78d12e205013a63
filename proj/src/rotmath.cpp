#include "hpe/rotmath.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/LU>

namespace hpe {

namespace {

constexpr double kPi = std::numbers::pi;

Mat3 rot_x(double rad) {
    const double c = std::cos(rad), s = std::sin(rad);
    Mat3 m;
    m << 1, 0, 0,
         0, c, -s,
         0, s, c;
    return m;
}

Mat3 rot_y(double rad) {
    const double c = std::cos(rad), s = std::sin(rad);
    Mat3 m;
    m << c, 0, s,
         0, 1, 0,
         -s, 0, c;
    return m;
}

Mat3 rot_z(double rad) {
    const double c = std::cos(rad), s = std::sin(rad);
    Mat3 m;
    m << c, -s, 0,
         s, c, 0,
         0, 0, 1;
    return m;
}

}  // namespace

double deg2rad(double deg) noexcept { return deg * (kPi / 180.0); }
double rad2deg(double rad) noexcept { return rad * (180.0 / kPi); }

double wrap_degrees(double deg) noexcept {
    double w = std::fmod(deg + 180.0, 360.0);
    if (w < 0.0) w += 360.0;
    w -= 180.0;
    // fmod can land exactly on +180 after the shift for tiny negative inputs.
    return w >= 180.0 ? w - 360.0 : w;
}

bool is_rotation(const Mat3& m, double tol) {
    if (!m.allFinite()) return false;
    const Mat3 e = m.transpose() * m - Mat3::Identity();
    return e.cwiseAbs().maxCoeff() <= tol && std::abs(m.determinant() - 1.0) <= tol;
}

RotationMatrix euler_to_rotation(const EulerAngles& e) {
    return rot_y(deg2rad(e.yaw)) * rot_x(deg2rad(e.pitch)) * rot_z(deg2rad(e.roll));
}

EulerDecomposition rotation_to_euler(const RotationMatrix& r) {
    // R(1,2) = -sin(pitch); R(0,2), R(2,2) carry yaw; R(1,0), R(1,1) carry roll.
    const double cos_pitch = std::hypot(r(1, 0), r(1, 1));
    const double pitch = std::atan2(-r(1, 2), cos_pitch);

    EulerDecomposition out;
    out.angles.pitch = rad2deg(pitch);
    if (90.0 - std::abs(out.angles.pitch) <= kGimbalLockDeg) {
        out.gimbal_lock = true;
        out.angles.roll = 0.0;
        out.angles.yaw = wrap_degrees(rad2deg(std::atan2(-r(2, 0), r(0, 0))));
        return out;
    }
    out.angles.yaw = wrap_degrees(rad2deg(std::atan2(r(0, 2), r(2, 2))));
    out.angles.roll = wrap_degrees(rad2deg(std::atan2(r(1, 0), r(1, 1))));
    return out;
}

Mat3 skew(const Vec3& v) {
    Mat3 s;
    s << 0, -v.z(), v.y(),
         v.z(), 0, -v.x(),
         -v.y(), v.x(), 0;
    return s;
}

RotationMatrix axis_angle_to_rotation(const AxisAngle& a) {
    const double theta = a.norm();
    if (theta < 1e-12) {
        // Second-order expansion; exact to rounding at this size.
        const Mat3 k = skew(a);
        return Mat3::Identity() + k + 0.5 * k * k;
    }
    const Vec3 axis = a / theta;
    const Mat3 k = skew(axis);
    return Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
}

AxisAngle rotation_to_axis_angle(const RotationMatrix& r) {
    // sin(theta) * axis from the antisymmetric part, cos(theta) from the trace.
    const Vec3 v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    const double sin_theta = 0.5 * v.norm();
    const double cos_theta = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
    const double theta = std::atan2(sin_theta, cos_theta);

    if (theta < 1e-12) return 0.5 * v;
    if (cos_theta >= 0.0) return v * (theta / (2.0 * sin_theta));

    // Past pi/2 the antisymmetric part shrinks towards zero and loses digits. The symmetric part is
    // cos(theta) I + (1 - cos(theta)) a a^T, so recover a a^T from it and take
    // the column with the largest diagonal entry.
    const Mat3 b = (0.5 * (r + r.transpose()) - cos_theta * Mat3::Identity()) / (1.0 - cos_theta);
    int k = 0;
    b.diagonal().maxCoeff(&k);
    Vec3 axis = b.col(k) / std::sqrt(std::max(b(k, k), 1e-300));
    axis.normalize();
    // Resolve the sign with whatever antisymmetric signal remains.
    if (axis.dot(v) < 0.0) axis = -axis;
    return axis * theta;
}

double angle_error(double a_deg, double b_deg) noexcept {
    return std::abs(wrap_degrees(a_deg - b_deg));
}

}  // namespace hpe
