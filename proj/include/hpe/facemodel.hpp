#pragma once

// 68-landmark mean face model (iBUG ordering, ids 1-68), keypoint subsets,
// perturbations, and synthetic scene generation.
//
// Model axes: +x towards image right, +y down, +z away from the camera; the
// identity pose therefore shows a frontal face.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hpe/camera.hpp"

namespace hpe {

constexpr int kNumLandmarks = 68;

struct FaceModel {
    /// points[id - 1] is landmark `id`.
    std::array<Vec3, kNumLandmarks> points{};

    const Vec3& landmark(int id) const { return points.at(static_cast<std::size_t>(id - 1)); }
    Vec3 centroid() const;
    double bounding_radius() const;
    /// Translates so the centroid is at the origin.
    void recenter();
};

struct KeypointSubset {
    std::string name;
    std::vector<int> ids;  ///< sorted, unique, each in 1..68
};

struct SyntheticScene {
    Pose true_pose;
    FaceModel model_used_for_truth;
    std::vector<Vec2> image_points;  ///< all 68, index = id - 1
    CameraIntrinsics intrinsics;
    std::uint64_t seed = 0;
};

/// Procedural ellipsoid-head face; bilaterally symmetric about x = 0.
FaceModel builtin_mean_face();

/// Text format: one "id x y z" per line, '#' starts a comment. The loaded
/// model is recentered.
FaceModel load_face_model(const std::filesystem::path& path);
FaceModel parse_face_model(std::string_view text);
void save_face_model(const FaceModel& model, const std::filesystem::path& path);
std::string format_face_model(const FaceModel& model);

/// Scales x by sx and y by sy, then recenters. Factors must lie in [0.5, 2].
FaceModel stretch_model(const FaceModel& model, double sx, double sy);

/// Independent uniform displacement in [-magnitude, magnitude] per coordinate.
std::vector<Vec2> jitter_landmarks(std::span<const Vec2> points, double magnitude,
                                   std::uint64_t seed);

/// Gaussian 3D displacement with std rigid_sigma on every point plus an
/// extra nonrigid_sigma on jaw (1-17) and mouth (49-68) points. Half of the
/// extra variance is one offset shared by the whole group.
FaceModel deform_subject(const FaceModel& model, double rigid_sigma, double nonrigid_sigma,
                         std::uint64_t seed);

/// True if id belongs to the jaw or mouth groups moved by deform_subject.
bool is_expression_landmark(int id);

SyntheticScene make_scene(const FaceModel& truth_model, const Pose& pose,
                          const CameraIntrinsics& intrinsics, std::uint64_t seed);

/// "rigid-6", "core-12", "no-mouth-48", "all-68", in increasing size.
const std::vector<KeypointSubset>& named_subsets();

/// Throws OutOfRange for an unknown name.
const KeypointSubset& find_subset(std::string_view name);

/// Throws OutOfRange if any id is out of 1..68, ids are unsorted or repeated,
/// or fewer than 4 ids are given.
void validate_subset(const KeypointSubset& subset);

std::vector<Vec3> select(const FaceModel& model, const KeypointSubset& subset);
std::vector<Vec2> select(std::span<const Vec2> landmarks68, const KeypointSubset& subset);

}  // namespace hpe
