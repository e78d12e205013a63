#include "hpe/facemodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "hpe/errors.hpp"
#include "hpe/random.hpp"

namespace hpe {

namespace {

// Front surface of the head ellipsoid, semi-axes in model units.
constexpr double kHeadHalfWidth = 0.80;
constexpr double kHeadHalfHeight = 1.00;
constexpr double kHeadDepth = 0.60;

double surface_depth(double x, double y) {
    const double q = 1.0 - (x / kHeadHalfWidth) * (x / kHeadHalfWidth) -
                     (y / kHeadHalfHeight) * (y / kHeadHalfHeight);
    return -kHeadDepth * std::sqrt(std::max(q, 0.0));
}

class FaceBuilder {
public:
    // `relief` is added to the surface depth; negative values stand out
    // towards the camera.
    void set(int id, double x, double y, double relief) {
        model_.points[static_cast<std::size_t>(id - 1)] = Vec3(x, y, surface_depth(x, y) + relief);
    }
    void mirror(int from, int to) {
        const Vec3& p = model_.landmark(from);
        model_.points[static_cast<std::size_t>(to - 1)] = Vec3(-p.x(), p.y(), p.z());
    }
    FaceModel finish() {
        Vec3 c = model_.centroid();
        c.x() = 0.0;  // symmetric by construction; keep the mirror exact
        for (auto& p : model_.points) p -= c;
        return model_;
    }

private:
    FaceModel model_;
};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
    const char* end = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(tok.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

void append_double(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

std::vector<KeypointSubset> build_subsets() {
    std::vector<KeypointSubset> subsets;
    subsets.push_back({"rigid-6", {9, 34, 37, 40, 43, 46}});
    subsets.push_back({"core-12", {9, 20, 25, 28, 31, 32, 34, 36, 37, 40, 43, 46}});
    KeypointSubset no_mouth{"no-mouth-48", {}};
    for (int id = 1; id <= 48; ++id) no_mouth.ids.push_back(id);
    subsets.push_back(no_mouth);
    KeypointSubset all{"all-68", {}};
    for (int id = 1; id <= kNumLandmarks; ++id) all.ids.push_back(id);
    subsets.push_back(all);
    for (const auto& s : subsets) validate_subset(s);
    return subsets;
}

}  // namespace

Vec3 FaceModel::centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : points) c += p;
    return c / static_cast<double>(kNumLandmarks);
}

double FaceModel::bounding_radius() const {
    const Vec3 c = centroid();
    double r = 0.0;
    for (const auto& p : points) r = std::max(r, (p - c).norm());
    return r;
}

void FaceModel::recenter() {
    const Vec3 c = centroid();
    for (auto& p : points) p -= c;
}

FaceModel builtin_mean_face() {
    FaceBuilder b;

    // Jaw 1-17 along a U from the right ear (image left) through the chin (9).
    for (int k = 0; k < 8; ++k) {
        const double phi = k * std::numbers::pi / 16.0;
        b.set(1 + k, -0.72 * std::cos(phi), -0.05 + 0.85 * std::sin(phi), 0.0);
        b.mirror(1 + k, 17 - k);
    }
    b.set(9, 0.0, 0.80, 0.0);

    // Brows: 18 (outer) .. 22 (inner), mirrored onto 27 .. 23.
    const double brow_x[] = {-0.60, -0.50, -0.38, -0.26, -0.13};
    const double brow_y[] = {-0.36, -0.42, -0.44, -0.42, -0.38};
    for (int k = 0; k < 5; ++k) {
        b.set(18 + k, brow_x[k], brow_y[k], -0.04);
        b.mirror(18 + k, 27 - k);
    }

    // Nose bridge 28-31 down to the tip, then the nostril base 32-36.
    const double bridge_y[] = {-0.22, -0.10, 0.02, 0.14};
    const double bridge_relief[] = {-0.06, -0.12, -0.18, -0.26};
    for (int k = 0; k < 4; ++k) b.set(28 + k, 0.0, bridge_y[k], bridge_relief[k]);
    b.set(32, -0.13, 0.24, -0.08);
    b.set(33, -0.07, 0.26, -0.12);
    b.set(34, 0.0, 0.27, -0.15);
    b.mirror(33, 35);
    b.mirror(32, 36);

    // Right eye 37-42 (image left), mirrored onto the left eye 43-48.
    b.set(37, -0.47, -0.20, 0.02);
    b.set(38, -0.38, -0.25, -0.01);
    b.set(39, -0.28, -0.25, -0.01);
    b.set(40, -0.19, -0.19, 0.03);
    b.set(41, -0.28, -0.16, 0.0);
    b.set(42, -0.38, -0.16, 0.0);
    b.mirror(40, 43);
    b.mirror(39, 44);
    b.mirror(38, 45);
    b.mirror(37, 46);
    b.mirror(42, 47);
    b.mirror(41, 48);

    // Outer lip 49-60, inner lip 61-68.
    b.set(49, -0.26, 0.48, -0.02);
    b.set(50, -0.16, 0.43, -0.06);
    b.set(51, -0.06, 0.41, -0.08);
    b.set(52, 0.0, 0.42, -0.08);
    b.mirror(51, 53);
    b.mirror(50, 54);
    b.mirror(49, 55);
    b.set(60, -0.16, 0.55, -0.05);
    b.set(59, -0.07, 0.58, -0.07);
    b.set(58, 0.0, 0.59, -0.07);
    b.mirror(59, 57);
    b.mirror(60, 56);
    b.set(61, -0.21, 0.48, -0.03);
    b.set(62, -0.07, 0.46, -0.06);
    b.set(63, 0.0, 0.46, -0.06);
    b.mirror(62, 64);
    b.mirror(61, 65);
    b.set(68, -0.07, 0.50, -0.06);
    b.set(67, 0.0, 0.50, -0.06);
    b.mirror(68, 66);

    return b.finish();
}

FaceModel parse_face_model(std::string_view text) {
    FaceModel model;
    std::array<bool, kNumLandmarks> seen{};
    int count = 0;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const auto tok = split_ws(line);
        if (tok.size() != 4) throw ParseError("expected \"id x y z\", got " + std::to_string(tok.size()) + " fields", line_no);
        int id = 0;
        if (!parse_number(tok[0], id)) throw ParseError("bad landmark id '" + std::string(tok[0]) + "'", line_no);
        if (id < 1 || id > kNumLandmarks) throw ParseError("landmark id " + std::to_string(id) + " outside 1..68", line_no);
        Vec3 p;
        for (int c = 0; c < 3; ++c) {
            if (!parse_number(tok[static_cast<std::size_t>(c + 1)], p(c)) || !std::isfinite(p(c))) {
                throw ParseError("bad coordinate '" + std::string(tok[static_cast<std::size_t>(c + 1)]) + "'", line_no);
            }
        }
        auto& flag = seen[static_cast<std::size_t>(id - 1)];
        if (flag) throw DuplicateId("landmark id " + std::to_string(id) + " repeated at line " + std::to_string(line_no));
        flag = true;
        model.points[static_cast<std::size_t>(id - 1)] = p;
        ++count;
    }
    if (count != kNumLandmarks) {
        throw WrongCount("face model needs 68 landmarks, found " + std::to_string(count));
    }
    model.recenter();
    return model;
}

FaceModel load_face_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open face model '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_face_model(ss.str());
}

std::string format_face_model(const FaceModel& model) {
    std::string out = "# id x y z\n";
    for (int id = 1; id <= kNumLandmarks; ++id) {
        const Vec3& p = model.landmark(id);
        out += std::to_string(id);
        for (int c = 0; c < 3; ++c) {
            out += ' ';
            append_double(out, p(c));
        }
        out += '\n';
    }
    return out;
}

void save_face_model(const FaceModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write face model '" + path.string() + "'");
    out << format_face_model(model);
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

FaceModel stretch_model(const FaceModel& model, double sx, double sy) {
    if (!(sx >= 0.5 && sx <= 2.0) || !(sy >= 0.5 && sy <= 2.0)) {
        throw OutOfRange("stretch factors must lie in [0.5, 2.0]");
    }
    FaceModel out = model;
    for (auto& p : out.points) {
        p.x() *= sx;
        p.y() *= sy;
    }
    out.recenter();
    return out;
}

std::vector<Vec2> jitter_landmarks(std::span<const Vec2> points, double magnitude, std::uint64_t seed) {
    if (!(magnitude >= 0.0)) throw OutOfRange("jitter magnitude must be >= 0");
    Rng rng = make_rng(seed, 0x6a17);
    std::vector<Vec2> out(points.begin(), points.end());
    for (auto& p : out) {
        p.x() += uniform(rng, -magnitude, magnitude);
        p.y() += uniform(rng, -magnitude, magnitude);
    }
    return out;
}

bool is_expression_landmark(int id) {
    return (id >= 1 && id <= 17) || (id >= 49 && id <= 68);
}

FaceModel deform_subject(const FaceModel& model, double rigid_sigma, double nonrigid_sigma,
                         std::uint64_t seed) {
    if (!(rigid_sigma >= 0.0) || !(nonrigid_sigma >= 0.0)) {
        throw OutOfRange("deformation sigmas must be >= 0");
    }
    Rng rng = make_rng(seed, 0xdef0);
    // Half of the expression variance is one displacement shared by the whole
    // jaw/mouth group, so the group moves coherently like a real expression.
    Vec3 group;
    for (int c = 0; c < 3; ++c) group(c) = normal(rng);
    const double half = std::sqrt(0.5);

    FaceModel out = model;
    for (int id = 1; id <= kNumLandmarks; ++id) {
        Vec3 shape, own;
        for (int c = 0; c < 3; ++c) shape(c) = normal(rng);
        for (int c = 0; c < 3; ++c) own(c) = normal(rng);
        auto& p = out.points[static_cast<std::size_t>(id - 1)];
        if (rigid_sigma > 0.0) p += rigid_sigma * shape;
        if (nonrigid_sigma > 0.0 && is_expression_landmark(id)) p += nonrigid_sigma * half * (group + own);
    }
    return out;
}

SyntheticScene make_scene(const FaceModel& truth_model, const Pose& pose,
                          const CameraIntrinsics& intrinsics, std::uint64_t seed) {
    SyntheticScene scene;
    scene.true_pose = pose;
    scene.model_used_for_truth = truth_model;
    scene.image_points = project(truth_model.points, pose, intrinsics);
    scene.intrinsics = intrinsics;
    scene.seed = seed;
    return scene;
}

const std::vector<KeypointSubset>& named_subsets() {
    static const std::vector<KeypointSubset> subsets = build_subsets();
    return subsets;
}

const KeypointSubset& find_subset(std::string_view name) {
    for (const auto& s : named_subsets()) {
        if (s.name == name) return s;
    }
    throw OutOfRange("unknown keypoint subset '" + std::string(name) + "'");
}

void validate_subset(const KeypointSubset& subset) {
    if (subset.ids.size() < 4) throw OutOfRange("subset '" + subset.name + "' has fewer than 4 ids");
    for (std::size_t i = 0; i < subset.ids.size(); ++i) {
        const int id = subset.ids[i];
        if (id < 1 || id > kNumLandmarks) throw OutOfRange("subset '" + subset.name + "' has invalid id " + std::to_string(id));
        if (i > 0 && id <= subset.ids[i - 1]) throw OutOfRange("subset '" + subset.name + "' ids must be sorted and unique");
    }
}

std::vector<Vec3> select(const FaceModel& model, const KeypointSubset& subset) {
    std::vector<Vec3> out;
    out.reserve(subset.ids.size());
    for (int id : subset.ids) out.push_back(model.landmark(id));
    return out;
}

std::vector<Vec2> select(std::span<const Vec2> landmarks68, const KeypointSubset& subset) {
    if (landmarks68.size() != kNumLandmarks) throw ShapeMismatch("expected 68 landmarks");
    std::vector<Vec2> out;
    out.reserve(subset.ids.size());
    for (int id : subset.ids) out.push_back(landmarks68[static_cast<std::size_t>(id - 1)]);
    return out;
}

}  // namespace hpe
