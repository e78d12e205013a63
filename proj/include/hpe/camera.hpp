#pragma once

#include <span>
#include <vector>

#include "hpe/rotmath.hpp"

namespace hpe {

/// Pinhole intrinsics, zero lens distortion.
struct CameraIntrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
};

/// Rigid transform model -> camera: X_cam = rotation * X_model + translation.
struct Pose {
    RotationMatrix rotation = RotationMatrix::Identity();
    Vec3 translation = Vec3::Zero();

    static Pose from_euler(const EulerAngles& e, const Vec3& t) {
        return Pose{euler_to_rotation(e), t};
    }
    EulerAngles euler() const { return rotation_to_euler(rotation).angles; }
};

/// Points closer than this to the camera plane are rejected.
constexpr double kMinDepth = 1e-9;

/// fx = fy = width, principal point at the image centre.
CameraIntrinsics default_intrinsics(int image_width, int image_height);

/// u = fx * x / z + cx, v = fy * y / z + cy. Throws BehindCamera if any
/// transformed point has z <= kMinDepth.
std::vector<Vec2> project(std::span<const Vec3> points, const Pose& pose,
                          const CameraIntrinsics& k);

Vec2 project_point(const Vec3& camera_point, const CameraIntrinsics& k);

}  // namespace hpe
