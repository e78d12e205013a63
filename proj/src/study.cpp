#include "hpe/study.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <string>

#include <omp.h>

#include "hpe/errors.hpp"
#include "hpe/random.hpp"

namespace hpe {

namespace {

// Training scenes for the toy studies come from a seed block disjoint from
// the held-out trial seeds (master_seed + i).
constexpr std::uint64_t kTrainSeedOffset = 1'000'000'000ull;

// Runs f(i) for i in [0, n). Exceptions are captured per index and the
// lowest-index one is rethrown after the loop, in either execution mode.
template <class F>
void for_each_index(int n, Execution execution, F&& f) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max(n, 0)));
    if (execution == Execution::serial) {
        for (int i = 0; i < n; ++i) {
            try {
                f(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    } else {
#pragma omp parallel for schedule(dynamic, 1)
        for (int i = 0; i < n; ++i) {
            try {
                f(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

const std::vector<KeypointSubset> resolve_subsets(const StudyConfig& c) {
    std::vector<KeypointSubset> out;
    for (const auto& name : c.subsets) out.push_back(find_subset(name));
    return out;
}

TrialErrors solve_cell(const FaceModel& model, const KeypointSubset& subset, std::span<const Vec2> image68,
                       const CameraIntrinsics& k, const Pose& truth, const LMConfig& lm) {
    try {
        const PnPProblem problem{select(model, subset), select(image68, subset), k};
        const PnPSolution sol = solve_pnp(problem, lm);
        if (sol.status == SolveStatus::singular) return std::nullopt;
        return pose_errors(sol.pose, truth);
    } catch (const Error&) {
        return std::nullopt;
    }
}

StudyRow invalid_row(double sweep, int excluded) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return StudyRow{sweep, nan, nan, nan, nan, 0, excluded};
}

StudyRow row_from_mae(double sweep, const AngleMae& m, int trials) {
    return StudyRow{sweep, m.yaw, m.pitch, m.roll, m.mean(), trials, 0};
}

void check_sweep(const StudyConfig& c) {
    for (double v : c.sweep) {
        if (!std::isfinite(v)) throw OutOfRange("sweep values must be finite");
        switch (c.kind) {
            case StudyKind::jitter:
                if (v < 0) throw OutOfRange("jitter magnitudes must be >= 0");
                break;
            case StudyKind::stretch:
                if (v < 0.5 || v > 2.0) throw OutOfRange("stretch factors must lie in [0.5, 2.0]");
                break;
            case StudyKind::lowres:
                if (v < 1 || v != std::floor(v)) throw OutOfRange("degradation factors must be integers >= 1");
                break;
            case StudyKind::alpha:
                if (v < 0) throw OutOfRange("alpha values must be >= 0");
                break;
            case StudyKind::subset:
                break;
        }
    }
}

}  // namespace

std::string_view study_name(StudyKind kind) {
    switch (kind) {
        case StudyKind::subset: return "subset";
        case StudyKind::jitter: return "jitter";
        case StudyKind::stretch: return "stretch";
        case StudyKind::lowres: return "lowres";
        case StudyKind::alpha: return "alpha";
    }
    return "unknown";
}

std::vector<double> default_sweep(StudyKind kind) {
    switch (kind) {
        case StudyKind::subset: return {};
        case StudyKind::jitter: return {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
        case StudyKind::stretch: return {0.6, 0.8, 1.0, 1.2, 1.4};
        case StudyKind::lowres: return {1, 5, 10, 15};
        case StudyKind::alpha: return {0, 0.01, 0.1, 1, 2, 4};
    }
    return {};
}

StudyConfig resolved(const StudyConfig& config) {
    StudyConfig c = config;
    if (c.trials < 1) throw OutOfRange("trials must be >= 1");
    for (double r : {c.ranges.yaw, c.ranges.pitch, c.ranges.roll}) {
        if (!(r >= 0.0) || r >= c.spec.max_angle || -r < c.spec.min_angle) {
            throw OutOfRange("pose ranges must lie inside the bin range");
        }
    }
    if (!(c.depth_min > 0) || c.depth_max < c.depth_min || !(c.lateral_offset >= 0)) {
        throw OutOfRange("invalid scene depth/offset range");
    }

    if (c.subsets.empty() && (c.kind == StudyKind::subset || c.kind == StudyKind::jitter)) {
        for (const auto& s : named_subsets()) c.subsets.push_back(s.name);
    }
    if (c.kind == StudyKind::stretch && c.subsets.empty()) c.subsets = {"all-68"};
    for (const auto& name : c.subsets) find_subset(name);

    if (c.kind == StudyKind::subset) {
        if (!c.sweep.empty()) throw OutOfRange("the subset study sweeps keypoint subsets; use subsets, not sweep");
        for (const auto& name : c.subsets) c.sweep.push_back(static_cast<double>(find_subset(name).ids.size()));
    }
    if (c.sweep.empty()) c.sweep = default_sweep(c.kind);
    if (c.sweep.empty()) throw OutOfRange("sweep must be nonempty");
    check_sweep(c);

    if (c.kind == StudyKind::lowres && c.schemes.empty()) {
        c.schemes = {"none", "fixed10", "uniform1to10", "set5"};
    }
    for (const auto& s : c.schemes) parse_scheme(s);
    if (c.kind == StudyKind::lowres || c.kind == StudyKind::alpha) {
        if (c.train_size < 2 || c.epochs < 1 || c.hidden < 1 || c.batch_size < 1) {
            throw OutOfRange("toy training needs train_size >= 2, epochs >= 1, hidden >= 1, batch >= 1");
        }
        if (c.kind == StudyKind::lowres && c.raster_size < 2) throw OutOfRange("raster_size must be >= 2");
    }
    return c;
}

std::vector<std::vector<TrialErrors>> run_trials(int count,
                                                 const std::function<std::vector<TrialErrors>(int)>& fn,
                                                 Execution execution) {
    std::vector<std::vector<TrialErrors>> out(static_cast<std::size_t>(std::max(count, 0)));
    // A trial that throws contributes no cells; reduce_cell counts it as excluded.
    for_each_index(count, execution, [&](int i) {
        try {
            out[static_cast<std::size_t>(i)] = fn(i);
        } catch (const Error&) {
            out[static_cast<std::size_t>(i)].clear();
        }
    });
    return out;
}

StudyRow reduce_cell(const std::vector<std::vector<TrialErrors>>& trials, std::size_t cell, double sweep) {
    StudyRow row;
    row.sweep = sweep;
    double yaw = 0.0, pitch = 0.0, roll = 0.0;
    for (const auto& t : trials) {
        if (cell < t.size() && t[cell]) {
            yaw += t[cell]->yaw;
            pitch += t[cell]->pitch;
            roll += t[cell]->roll;
            ++row.trials;
        } else {
            ++row.excluded;
        }
    }
    if (row.trials == 0) return invalid_row(sweep, row.excluded);
    const double n = row.trials;
    row.yaw_mae = yaw / n;
    row.pitch_mae = pitch / n;
    row.roll_mae = roll / n;
    row.mae = (row.yaw_mae + row.pitch_mae + row.roll_mae) / 3.0;
    return row;
}

Pose sample_pose(const StudyConfig& c, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0x9053);
    EulerAngles e;
    e.yaw = uniform(rng, -c.ranges.yaw, c.ranges.yaw);
    e.pitch = uniform(rng, -c.ranges.pitch, c.ranges.pitch);
    e.roll = uniform(rng, -c.ranges.roll, c.ranges.roll);
    Vec3 t;
    t.x() = uniform(rng, -c.lateral_offset, c.lateral_offset);
    t.y() = uniform(rng, -c.lateral_offset, c.lateral_offset);
    t.z() = uniform(rng, c.depth_min, c.depth_max);
    return Pose::from_euler(e, t);
}

EulerAngles pose_errors(const Pose& estimate, const Pose& truth) {
    const EulerAngles a = estimate.euler(), b = truth.euler();
    return EulerAngles{angle_error(a.yaw, b.yaw), angle_error(a.pitch, b.pitch), angle_error(a.roll, b.roll)};
}

StudyReport run_subset_study(const StudyConfig& config) {
    StudyConfig c = config;
    c.kind = StudyKind::subset;
    c = resolved(c);
    const auto subsets = resolve_subsets(c);
    const FaceModel mean = builtin_mean_face();
    const CameraIntrinsics k = default_intrinsics(c.image_width, c.image_height);

    const auto trials = run_trials(c.trials, [&](int i) {
        const std::uint64_t seed = c.master_seed + static_cast<std::uint64_t>(i);
        const Pose pose = sample_pose(c, seed);
        const FaceModel subject = deform_subject(mean, c.rigid_sigma, c.nonrigid_sigma, seed);
        const SyntheticScene scene = make_scene(subject, pose, k, seed);
        std::vector<TrialErrors> cells;
        for (const auto& s : subsets) cells.push_back(solve_cell(mean, s, scene.image_points, k, pose, c.lm));
        return cells;
    }, c.execution);

    StudyResult result{"subset", "subsets", {}};
    for (std::size_t s = 0; s < subsets.size(); ++s) result.rows.push_back(reduce_cell(trials, s, c.sweep[s]));
    return {result};
}

StudyReport run_jitter_study(const StudyConfig& config) {
    StudyConfig c = config;
    c.kind = StudyKind::jitter;
    c = resolved(c);
    const auto subsets = resolve_subsets(c);
    const FaceModel mean = builtin_mean_face();
    const CameraIntrinsics k = default_intrinsics(c.image_width, c.image_height);
    const std::size_t m = c.sweep.size();

    const auto trials = run_trials(c.trials, [&](int i) {
        const std::uint64_t seed = c.master_seed + static_cast<std::uint64_t>(i);
        const Pose pose = sample_pose(c, seed);
        const FaceModel subject = deform_subject(mean, c.rigid_sigma, 0.0, seed);
        const SyntheticScene scene = make_scene(subject, pose, k, seed);
        std::vector<TrialErrors> cells(subsets.size() * m);
        for (std::size_t j = 0; j < m; ++j) {
            // One noise pattern per trial, scaled by the magnitude.
            const auto noisy = jitter_landmarks(scene.image_points, c.sweep[j], seed);
            for (std::size_t s = 0; s < subsets.size(); ++s) {
                cells[s * m + j] = solve_cell(mean, subsets[s], noisy, k, pose, c.lm);
            }
        }
        return cells;
    }, c.execution);

    StudyReport report;
    for (std::size_t s = 0; s < subsets.size(); ++s) {
        StudyResult r{"jitter", subsets[s].name, {}};
        for (std::size_t j = 0; j < m; ++j) r.rows.push_back(reduce_cell(trials, s * m + j, c.sweep[j]));
        report.push_back(std::move(r));
    }
    return report;
}

StudyReport run_stretch_study(const StudyConfig& config) {
    StudyConfig c = config;
    c.kind = StudyKind::stretch;
    c = resolved(c);
    const KeypointSubset& subset = find_subset(c.subsets.front());
    const FaceModel mean = builtin_mean_face();
    const CameraIntrinsics k = default_intrinsics(c.image_width, c.image_height);
    const std::size_t m = c.sweep.size();

    std::vector<FaceModel> width_models, height_models;
    for (double s : c.sweep) {
        width_models.push_back(stretch_model(mean, s, 1.0));
        height_models.push_back(stretch_model(mean, 1.0, s));
    }

    const auto trials = run_trials(c.trials, [&](int i) {
        const std::uint64_t seed = c.master_seed + static_cast<std::uint64_t>(i);
        const Pose pose = sample_pose(c, seed);
        const FaceModel subject = deform_subject(mean, c.rigid_sigma, 0.0, seed);
        const SyntheticScene scene = make_scene(subject, pose, k, seed);
        std::vector<TrialErrors> cells(2 * m);
        for (std::size_t j = 0; j < m; ++j) {
            cells[j] = solve_cell(width_models[j], subset, scene.image_points, k, pose, c.lm);
            cells[m + j] = solve_cell(height_models[j], subset, scene.image_points, k, pose, c.lm);
        }
        return cells;
    }, c.execution);

    StudyResult width{"stretch", "width", {}}, height{"stretch", "height", {}};
    for (std::size_t j = 0; j < m; ++j) {
        width.rows.push_back(reduce_cell(trials, j, c.sweep[j]));
        height.rows.push_back(reduce_cell(trials, m + j, c.sweep[j]));
    }
    return {width, height};
}

std::vector<double> landmark_features(std::span<const Vec2> points) {
    Vec2 mean = Vec2::Zero();
    for (const auto& p : points) mean += p;
    mean /= static_cast<double>(points.size());
    double ms = 0.0;
    for (const auto& p : points) ms += (p - mean).squaredNorm();
    const double scale = 1.0 / std::sqrt(std::max(ms / static_cast<double>(points.size()), 1e-300));
    std::vector<double> out;
    out.reserve(2 * points.size());
    for (const auto& p : points) {
        out.push_back((p.x() - mean.x()) * scale);
        out.push_back((p.y() - mean.y()) * scale);
    }
    return out;
}

ToyDataset make_toy_dataset(const StudyConfig& config, int count, std::uint64_t seed, int raster_size) {
    const FaceModel mean = builtin_mean_face();
    const CameraIntrinsics k = default_intrinsics(config.image_width, config.image_height);
    ToyDataset data;
    data.input_dim = raster_size > 0 ? raster_size * raster_size : 2 * kNumLandmarks;
    data.inputs.reserve(static_cast<std::size_t>(count) * static_cast<std::size_t>(data.input_dim));
    for (int i = 0; i < count; ++i) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
        const Pose pose = sample_pose(config, s);
        const auto image = project(mean.points, pose, k);
        if (raster_size > 0) {
            const auto framed = crop_to_frame(image, raster_size, raster_size);
            const Raster r = rasterize(framed, raster_size, raster_size);
            data.inputs.insert(data.inputs.end(), r.values.begin(), r.values.end());
        } else {
            const auto f = landmark_features(image);
            data.inputs.insert(data.inputs.end(), f.begin(), f.end());
        }
        data.targets.push_back(pose.euler());
    }
    return data;
}

StudyReport run_lowres_study(const StudyConfig& config) {
    StudyConfig c = config;
    c.kind = StudyKind::lowres;
    c = resolved(c);
    const int side = c.raster_size;

    const ToyDataset train = make_toy_dataset(c, c.train_size, c.master_seed + kTrainSeedOffset, side);
    const ToyDataset test = make_toy_dataset(c, c.trials, c.master_seed, side);

    std::vector<ToyDataset> degraded_test;
    for (double f : c.sweep) {
        ToyDataset d = test;
        for (std::size_t i = 0; i < d.size(); ++i) {
            std::span<double> row(d.inputs.data() + i * static_cast<std::size_t>(d.input_dim),
                                  static_cast<std::size_t>(d.input_dim));
            degrade_in_place(row, side, side, static_cast<int>(f));
        }
        degraded_test.push_back(std::move(d));
    }

    StudyReport report(c.schemes.size());
    for_each_index(static_cast<int>(c.schemes.size()), c.execution, [&](int si) {
        const AugmentScheme scheme = parse_scheme(c.schemes[static_cast<std::size_t>(si)]);
        TrainConfig tc;
        tc.spec = c.spec;
        tc.loss.alpha = c.alpha;
        tc.epochs = c.epochs;
        tc.batch_size = c.batch_size;
        tc.hidden = c.hidden;
        tc.learning_rate = c.learning_rate;
        tc.seed = c.master_seed;
        const auto n_train = static_cast<std::uint64_t>(c.train_size);
        if (scheme != AugmentScheme::none) {
            tc.augment = [=](std::size_t sample, int epoch, std::span<double> row) {
                const std::uint64_t draw = static_cast<std::uint64_t>(epoch) * n_train + sample;
                degrade_in_place(row, side, side, augment_factor(scheme, mix_seed(c.master_seed, draw)));
            };
        }

        StudyResult& r = report[static_cast<std::size_t>(si)];
        r.study = "lowres";
        r.series = std::string(scheme_name(scheme));
        try {
            const TrainResult trained = train_toy(train, tc);
            for (std::size_t j = 0; j < c.sweep.size(); ++j) {
                r.rows.push_back(row_from_mae(c.sweep[j], evaluate_mae(trained.net, degraded_test[j]),
                                              static_cast<int>(test.size())));
            }
        } catch (const TrainingDiverged&) {
            for (double f : c.sweep) r.rows.push_back(invalid_row(f, static_cast<int>(test.size())));
        }
    });
    return report;
}

StudyReport run_alpha_ablation(const StudyConfig& config) {
    StudyConfig c = config;
    c.kind = StudyKind::alpha;
    c = resolved(c);

    const ToyDataset train = make_toy_dataset(c, c.train_size, c.master_seed + kTrainSeedOffset, 0);
    const ToyDataset heldout = make_toy_dataset(c, c.trials, c.master_seed, 0);

    StudyResult result{"alpha", "alpha", std::vector<StudyRow>(c.sweep.size())};
    for_each_index(static_cast<int>(c.sweep.size()), c.execution, [&](int j) {
        const double alpha = c.sweep[static_cast<std::size_t>(j)];
        TrainConfig tc;
        tc.spec = c.spec;
        tc.loss.alpha = alpha;
        tc.epochs = c.epochs;
        tc.batch_size = c.batch_size;
        tc.hidden = c.hidden;
        tc.learning_rate = c.learning_rate;
        tc.seed = c.master_seed;
        auto& row = result.rows[static_cast<std::size_t>(j)];
        try {
            const TrainResult trained = train_toy(train, tc);
            row = row_from_mae(alpha, evaluate_mae(trained.net, heldout), static_cast<int>(heldout.size()));
        } catch (const TrainingDiverged&) {
            row = invalid_row(alpha, static_cast<int>(heldout.size()));
        }
    });
    return {result};
}

StudyReport run_study(const StudyConfig& config) {
    switch (config.kind) {
        case StudyKind::subset: return run_subset_study(config);
        case StudyKind::jitter: return run_jitter_study(config);
        case StudyKind::stretch: return run_stretch_study(config);
        case StudyKind::lowres: return run_lowres_study(config);
        case StudyKind::alpha: return run_alpha_ablation(config);
    }
    throw OutOfRange("unknown study kind");
}

}  // namespace hpe
