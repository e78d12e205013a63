#pragma once

// Sensitivity studies on synthetic scenes.
//
// Every study is a pure function of its StudyConfig. Trial i draws from seed
// master_seed + i; trials may run on OpenMP threads, but their results are
// reduced in trial-index order, so serial and parallel runs agree bit for bit.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hpe/facemodel.hpp"
#include "hpe/pnp.hpp"
#include "hpe/raster.hpp"
#include "hpe/toynet.hpp"

namespace hpe {

enum class Execution { serial, parallel };

enum class StudyKind { subset, jitter, stretch, lowres, alpha };

std::string_view study_name(StudyKind kind);

/// Symmetric sampling ranges (degrees); poses are uniform inside them.
struct PoseRange {
    double yaw = 75.0;
    double pitch = 60.0;
    double roll = 50.0;
};

struct StudyConfig {
    StudyKind kind = StudyKind::subset;
    int trials = 500;
    std::uint64_t master_seed = 1;
    PoseRange ranges;
    std::vector<double> sweep;  ///< empty: study default
    Execution execution = Execution::parallel;

    // Scene geometry.
    int image_width = 450;
    int image_height = 450;
    double depth_min = 4.5;
    double depth_max = 5.5;
    double lateral_offset = 0.3;  ///< |tx|, |ty| bound in model units

    // PnP studies.
    std::vector<std::string> subsets;  ///< empty: all named subsets
    double rigid_sigma = 0.0;
    double nonrigid_sigma = 0.04;  ///< subset study only
    LMConfig lm;

    // Toy-network studies.
    int train_size = 2000;
    int epochs = 30;
    int hidden = 128;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double alpha = 1.0;  ///< lowres study regression weight
    int raster_size = 32;
    std::vector<std::string> schemes;  ///< lowres; empty: all four
    BinSpec spec;
};

/// Fills in study defaults and checks invariants; throws OutOfRange.
StudyConfig resolved(const StudyConfig& config);

std::vector<double> default_sweep(StudyKind kind);

struct StudyRow {
    double sweep = 0.0;
    double yaw_mae = 0.0;
    double pitch_mae = 0.0;
    double roll_mae = 0.0;
    double mae = 0.0;   ///< mean of the three
    int trials = 0;     ///< trials that contributed
    int excluded = 0;   ///< failed trials (solver error, divergence)

    friend bool operator==(const StudyRow&, const StudyRow&) = default;
};

/// One curve: e.g. a keypoint subset in the jitter study.
struct StudyResult {
    std::string study;
    std::string series;
    std::vector<StudyRow> rows;
};

using StudyReport = std::vector<StudyResult>;

/// Per-angle absolute errors of one trial for one cell, or nothing on failure.
using TrialErrors = std::optional<EulerAngles>;

/// Runs fn(i) for i in [0, count) and returns the results in index order.
/// The serial path is the reference implementation for the OpenMP one.
std::vector<std::vector<TrialErrors>> run_trials(int count,
                                                 const std::function<std::vector<TrialErrors>(int)>& fn,
                                                 Execution execution);

/// Mean errors over trials in index order for cell `cell`.
StudyRow reduce_cell(const std::vector<std::vector<TrialErrors>>& trials, std::size_t cell, double sweep);

/// Random pose in the configured ranges, drawn from `seed`.
Pose sample_pose(const StudyConfig& config, std::uint64_t seed);

/// Absolute per-angle errors of `estimate` against `truth`.
EulerAngles pose_errors(const Pose& estimate, const Pose& truth);

StudyReport run_subset_study(const StudyConfig& config);
StudyReport run_jitter_study(const StudyConfig& config);
StudyReport run_stretch_study(const StudyConfig& config);
StudyReport run_lowres_study(const StudyConfig& config);
StudyReport run_alpha_ablation(const StudyConfig& config);
StudyReport run_study(const StudyConfig& config);

/// Landmark features for the toy network: centred, scaled to unit RMS
/// radius, flattened (u1, v1, u2, v2, ...).
std::vector<double> landmark_features(std::span<const Vec2> points);

/// Clean scenes for toy training: inputs are landmark features
/// (raster_size == 0) or cropped rasters; targets are the true poses.
ToyDataset make_toy_dataset(const StudyConfig& config, int count, std::uint64_t seed, int raster_size);

}  // namespace hpe
