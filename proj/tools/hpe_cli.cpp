// hpe: sensitivity studies, one-shot PnP and toy training from the command line.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hpe/errors.hpp"
#include "hpe/facemodel.hpp"
#include "hpe/pnp.hpp"
#include "hpe/raster.hpp"
#include "hpe/report.hpp"
#include "hpe/study.hpp"
#include "hpe/toynet.hpp"

using namespace hpe;

namespace {

struct StudyOptions {
    StudyConfig config;
    std::string out = "results";
    bool serial = false;
};

void add_common(CLI::App* cmd, StudyOptions& o) {
    cmd->add_option("--trials", o.config.trials, "Trials (held-out scenes for toy studies)")->capture_default_str();
    cmd->add_option("--seed", o.config.master_seed, "Master seed; trial i uses seed + i")->capture_default_str();
    cmd->add_option("--out", o.out, "Output directory for CSV and SVG files")->capture_default_str();
    cmd->add_flag("--serial", o.serial, "Run trials on one thread");
}

void add_sweep(CLI::App* cmd, StudyOptions& o, const char* what) {
    cmd->add_option("--sweep", o.config.sweep, what)->delimiter(',');
}

void add_toy(CLI::App* cmd, StudyOptions& o) {
    cmd->add_option("--train-size", o.config.train_size, "Training scenes")->capture_default_str();
    cmd->add_option("--epochs", o.config.epochs)->capture_default_str();
    cmd->add_option("--hidden", o.config.hidden, "Hidden units")->capture_default_str();
    cmd->add_option("--batch", o.config.batch_size)->capture_default_str();
    cmd->add_option("--lr", o.config.learning_rate, "Adam learning rate")->capture_default_str();
}

std::string cell(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%10.4f", v);
    return buf;
}

void print_report(const StudyReport& report) {
    int excluded = 0;
    for (const auto& r : report) {
        std::cout << r.study << " / " << r.series << "\n";
        std::cout << "     sweep        yaw      pitch       roll        mae  trials\n";
        for (const auto& row : r.rows) {
            std::cout << cell(row.sweep) << " " << cell(row.yaw_mae) << " " << cell(row.pitch_mae) << " "
                      << cell(row.roll_mae) << " " << cell(row.mae) << "  " << row.trials << "\n";
            excluded += row.excluded;
        }
    }
    std::cout << "excluded trials: " << excluded << "\n";
}

int run_and_emit(StudyOptions& o, StudyKind kind) {
    o.config.kind = kind;
    o.config.execution = o.serial ? Execution::serial : Execution::parallel;
    const StudyReport report = run_study(o.config);
    print_report(report);
    for (const auto& p : emit_report(report, o.out)) std::cout << "wrote " << p.string() << "\n";
    return 0;
}

std::map<int, Vec2> load_landmarks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open landmark file '" + path.string() + "'");
    std::map<int, Vec2> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        std::string tok[3], extra;
        if (!(ss >> tok[0])) continue;
        if (!(ss >> tok[1] >> tok[2]) || (ss >> extra)) throw ParseError("expected \"id u v\"", line_no);
        int id = 0;
        double u = 0, v = 0;
        auto parse = [&](const std::string& t, auto& dst) {
            const auto r = std::from_chars(t.data(), t.data() + t.size(), dst);
            if (r.ec != std::errc{} || r.ptr != t.data() + t.size()) throw ParseError("bad value '" + t + "'", line_no);
        };
        parse(tok[0], id);
        parse(tok[1], u);
        parse(tok[2], v);
        if (id < 1 || id > kNumLandmarks) throw ParseError("landmark id outside 1..68", line_no);
        if (!out.emplace(id, Vec2(u, v)).second) throw DuplicateId("landmark id " + std::to_string(id) + " repeated");
    }
    return out;
}

std::string shortest(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Head pose estimation: landmark-to-pose sensitivity studies and multi-loss toy training"};
    app.require_subcommand(1);

    StudyOptions subset_o, jitter_o, stretch_o, lowres_o, alpha_o;

    auto* subset = app.add_subcommand("study-subset", "MAE per keypoint subset under non-rigid mouth/jaw deformation");
    add_common(subset, subset_o);
    subset->add_option("--subsets", subset_o.config.subsets, "Subset names (default: all)")->delimiter(',');
    subset->add_option("--nonrigid-sigma", subset_o.config.nonrigid_sigma, "Jaw/mouth deformation std")
        ->capture_default_str();
    subset->add_option("--rigid-sigma", subset_o.config.rigid_sigma, "Whole-face shape std")->capture_default_str();

    auto* jitter = app.add_subcommand("study-jitter", "MAE versus landmark jitter magnitude (pixels)");
    add_common(jitter, jitter_o);
    add_sweep(jitter, jitter_o, "Jitter magnitudes in pixels (default 0..10)");
    jitter->add_option("--subsets", jitter_o.config.subsets, "Subset names (default: all)")->delimiter(',');

    auto* stretch = app.add_subcommand("study-stretch", "MAE versus mean-face width/height stretch");
    add_common(stretch, stretch_o);
    add_sweep(stretch, stretch_o, "Scale factors (default 0.6,0.8,1,1.2,1.4)");
    std::string stretch_subset = "all-68";
    stretch->add_option("--subset", stretch_subset, "Keypoint subset")->capture_default_str();

    auto* lowres = app.add_subcommand("study-lowres", "Toy network robustness to nearest-neighbour degradation");
    add_common(lowres, lowres_o);
    add_sweep(lowres, lowres_o, "Degradation factors (default 1,5,10,15)");
    add_toy(lowres, lowres_o);
    lowres->add_option("--schemes", lowres_o.config.schemes, "Augmentation schemes: none,fixed10,uniform1to10,set5")
        ->delimiter(',');
    lowres->add_option("--alpha", lowres_o.config.alpha, "Regression weight")->capture_default_str();
    lowres->add_option("--raster-size", lowres_o.config.raster_size, "Raster side in pixels")->capture_default_str();

    auto* alpha = app.add_subcommand("ablate-alpha", "Toy network validation MAE per regression weight");
    add_common(alpha, alpha_o);
    add_sweep(alpha, alpha_o, "Regression weights (default 0,0.01,0.1,1,2,4)");
    add_toy(alpha, alpha_o);

    auto* solve = app.add_subcommand("solve-pnp", "Estimate head pose from a landmark file");
    std::string model_path, landmark_path, solve_subset;
    int width = 450, height = 450;
    bool numeric = false;
    solve->add_option("--model", model_path, "Face model file (default: built-in mean face)");
    solve->add_option("--landmarks", landmark_path, "Landmark file, one \"id u v\" per line")->required();
    solve->add_option("--width", width)->capture_default_str();
    solve->add_option("--height", height)->capture_default_str();
    solve->add_option("--subset", solve_subset, "Use only this keypoint subset");
    solve->add_flag("--numeric-jacobian", numeric);

    auto* train = app.add_subcommand("train-toy", "Train the toy network on clean landmark features");
    StudyConfig train_cfg;
    double train_alpha = 2.0;
    std::string train_out;
    train->add_option("--train-size", train_cfg.train_size)->capture_default_str();
    train->add_option("--epochs", train_cfg.epochs)->capture_default_str();
    train->add_option("--hidden", train_cfg.hidden)->capture_default_str();
    train->add_option("--batch", train_cfg.batch_size)->capture_default_str();
    train->add_option("--lr", train_cfg.learning_rate)->capture_default_str();
    train->add_option("--alpha", train_alpha, "Regression weight")->capture_default_str();
    train->add_option("--seed", train_cfg.master_seed)->capture_default_str();
    train->add_option("--out", train_out, "Write the trained network here");

    auto* export_model = app.add_subcommand("export-model", "Write the built-in mean face model");
    std::string export_out;
    export_model->add_option("--out", export_out)->required();

    auto* render = app.add_subcommand("render", "Project the mean face at a pose");
    double r_yaw = 0, r_pitch = 0, r_roll = 0, r_depth = 5.0;
    std::string r_landmarks, r_pgm;
    int r_size = 450;
    render->add_option("--yaw", r_yaw)->capture_default_str();
    render->add_option("--pitch", r_pitch)->capture_default_str();
    render->add_option("--roll", r_roll)->capture_default_str();
    render->add_option("--depth", r_depth)->capture_default_str();
    render->add_option("--size", r_size, "Square image side")->capture_default_str();
    render->add_option("--landmarks", r_landmarks, "Write \"id u v\" lines here");
    render->add_option("--pgm", r_pgm, "Write a landmark raster (PGM) here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*subset) return run_and_emit(subset_o, StudyKind::subset);
        if (*jitter) return run_and_emit(jitter_o, StudyKind::jitter);
        if (*stretch) {
            stretch_o.config.subsets = {stretch_subset};
            return run_and_emit(stretch_o, StudyKind::stretch);
        }
        if (*lowres) return run_and_emit(lowres_o, StudyKind::lowres);
        if (*alpha) return run_and_emit(alpha_o, StudyKind::alpha);

        if (*solve) {
            const FaceModel model = model_path.empty() ? builtin_mean_face() : load_face_model(model_path);
            const auto marks = load_landmarks(landmark_path);
            PnPProblem problem;
            problem.intrinsics = default_intrinsics(width, height);
            std::vector<int> ids;
            if (solve_subset.empty()) {
                for (const auto& [id, uv] : marks) ids.push_back(id);
            } else {
                ids = find_subset(solve_subset).ids;
            }
            for (int id : ids) {
                const auto it = marks.find(id);
                if (it == marks.end()) throw WrongCount("landmark " + std::to_string(id) + " missing from file");
                problem.model_points.push_back(model.landmark(id));
                problem.image_points.push_back(it->second);
            }
            LMConfig lm;
            if (numeric) lm.jacobian = JacobianMode::numeric;
            const PnPSolution sol = solve_pnp(problem, lm);
            const EulerAngles e = sol.pose.euler();
            std::printf("yaw %.4f pitch %.4f roll %.4f\n", e.yaw, e.pitch, e.roll);
            std::printf("translation %.6f %.6f %.6f\n", sol.pose.translation.x(), sol.pose.translation.y(),
                        sol.pose.translation.z());
            std::printf("points %zu rmse %.3g px iterations %d %s\n", ids.size(), sol.rmse, sol.iterations,
                        sol.converged ? "converged" : "not converged");
            return sol.status == SolveStatus::singular ? 2 : 0;
        }

        if (*train) {
            train_cfg.kind = StudyKind::alpha;
            train_cfg = resolved(train_cfg);
            const ToyDataset data = make_toy_dataset(train_cfg, train_cfg.train_size, train_cfg.master_seed, 0);
            TrainConfig tc;
            tc.spec = train_cfg.spec;
            tc.loss.alpha = train_alpha;
            tc.epochs = train_cfg.epochs;
            tc.batch_size = train_cfg.batch_size;
            tc.hidden = train_cfg.hidden;
            tc.learning_rate = train_cfg.learning_rate;
            tc.seed = train_cfg.master_seed;
            const TrainResult r = train_toy(data, tc);
            std::printf("epoch 0 val_mae %.4f\n", r.initial_val_mae);
            for (const auto& s : r.curve) {
                std::printf("epoch %d loss %.4f train_mae %.4f val_mae %.4f\n", s.epoch, s.train_loss, s.train_mae,
                            s.val_mae);
            }
            if (!train_out.empty()) {
                save_toynet(r.net, train_out);
                std::printf("wrote %s\n", train_out.c_str());
            }
            return 0;
        }

        if (*export_model) {
            save_face_model(builtin_mean_face(), export_out);
            std::printf("wrote %s\n", export_out.c_str());
            return 0;
        }

        if (*render) {
            const FaceModel face = builtin_mean_face();
            const Pose pose = Pose::from_euler({r_yaw, r_pitch, r_roll}, Vec3(0, 0, r_depth));
            const auto uv = project(face.points, pose, default_intrinsics(r_size, r_size));
            if (!r_landmarks.empty()) {
                std::ofstream out(r_landmarks);
                if (!out) throw IoError("cannot write '" + r_landmarks + "'");
                for (int id = 1; id <= kNumLandmarks; ++id) {
                    const Vec2& p = uv[static_cast<std::size_t>(id - 1)];
                    out << id << ' ' << shortest(p.x()) << ' ' << shortest(p.y()) << '\n';
                }
                std::printf("wrote %s\n", r_landmarks.c_str());
            }
            if (!r_pgm.empty()) {
                write_pgm(rasterize(uv, r_size, r_size), r_pgm);
                std::printf("wrote %s\n", r_pgm.c_str());
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
