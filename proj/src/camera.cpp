#include "hpe/camera.hpp"

#include <string>

#include "hpe/errors.hpp"

namespace hpe {

CameraIntrinsics default_intrinsics(int image_width, int image_height) {
    if (image_width < 1 || image_height < 1) {
        throw OutOfRange("image dimensions must be >= 1, got " + std::to_string(image_width) +
                         "x" + std::to_string(image_height));
    }
    const double w = image_width;
    return CameraIntrinsics{w, w, 0.5 * w, 0.5 * static_cast<double>(image_height)};
}

Vec2 project_point(const Vec3& p, const CameraIntrinsics& k) {
    if (!(p.z() > kMinDepth)) {
        throw BehindCamera("point at depth " + std::to_string(p.z()) + " is not in front of the camera");
    }
    return Vec2(k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy);
}

std::vector<Vec2> project(std::span<const Vec3> points, const Pose& pose, const CameraIntrinsics& k) {
    std::vector<Vec2> out;
    out.reserve(points.size());
    for (const Vec3& p : points) {
        out.push_back(project_point(pose.rotation * p + pose.translation, k));
    }
    return out;
}

}  // namespace hpe
