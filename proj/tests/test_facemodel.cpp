#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "hpe/errors.hpp"
#include "hpe/facemodel.hpp"

using namespace hpe;

namespace {

std::string model_text_without(int skip_id) {
    const FaceModel face = builtin_mean_face();
    std::string text = "# test model\n";
    for (int id = 1; id <= kNumLandmarks; ++id) {
        if (id == skip_id) continue;
        const Vec3& p = face.landmark(id);
        text += std::to_string(id) + " " + std::to_string(p.x()) + " " + std::to_string(p.y()) + " " +
                std::to_string(p.z()) + "\n";
    }
    return text;
}

}  // namespace

TEST_CASE("built-in face is centred and symmetric") {
    const FaceModel face = builtin_mean_face();
    CHECK(face.centroid().norm() < 1e-12);
    CHECK(face.bounding_radius() > 0.5);
    CHECK(face.bounding_radius() < 1.5);

    // Mirror pairs in the 68-point layout: jaw, brows, eyes, nostrils, lips.
    const std::pair<int, int> pairs[] = {{1, 17}, {5, 13}, {18, 27}, {22, 23}, {37, 46},
                                         {40, 43}, {32, 36}, {49, 55}, {61, 65}, {60, 56}};
    for (auto [a, b] : pairs) {
        CHECK(face.landmark(a).x() == doctest::Approx(-face.landmark(b).x()));
        CHECK(face.landmark(a).y() == doctest::Approx(face.landmark(b).y()));
        CHECK(face.landmark(a).z() == doctest::Approx(face.landmark(b).z()));
    }
    for (int id : {9, 28, 31, 34, 52, 58, 63, 67}) CHECK(face.landmark(id).x() == 0.0);
}

TEST_CASE("built-in face anatomy") {
    const FaceModel f = builtin_mean_face();
    // y grows downwards: brows above eyes above nose tip above mouth above chin.
    CHECK(f.landmark(20).y() < f.landmark(38).y());
    CHECK(f.landmark(38).y() < f.landmark(31).y());
    CHECK(f.landmark(31).y() < f.landmark(52).y());
    CHECK(f.landmark(52).y() < f.landmark(9).y());
    // Nose tip is the point nearest the camera.
    for (int id = 1; id <= kNumLandmarks; ++id) CHECK(f.landmark(31).z() <= f.landmark(id).z());
    // Image-left eye carries the lower ids.
    CHECK(f.landmark(37).x() < f.landmark(46).x());
}

TEST_CASE("named subsets") {
    const auto& subsets = named_subsets();
    REQUIRE(subsets.size() == 4);
    CHECK(subsets[0].name == "rigid-6");
    CHECK(subsets[1].name == "core-12");
    CHECK(subsets[2].name == "no-mouth-48");
    CHECK(subsets[3].name == "all-68");
    CHECK(subsets[0].ids == std::vector<int>{9, 34, 37, 40, 43, 46});
    CHECK(subsets[1].ids.size() == 12);
    CHECK(subsets[2].ids.size() == 48);
    CHECK(subsets[3].ids.size() == 68);
    for (const auto& s : subsets) CHECK_NOTHROW(validate_subset(s));
    for (int id : subsets[2].ids) CHECK(id <= 48);
    CHECK(&find_subset("core-12") == &subsets[1]);
    CHECK_THROWS_AS(find_subset("mouth-only"), OutOfRange);
}

TEST_CASE("validate_subset") {
    CHECK_THROWS_AS(validate_subset({"short", {1, 2, 3}}), OutOfRange);
    CHECK_THROWS_AS(validate_subset({"zero", {0, 1, 2, 3}}), OutOfRange);
    CHECK_THROWS_AS(validate_subset({"big", {1, 2, 3, 69}}), OutOfRange);
    CHECK_THROWS_AS(validate_subset({"dup", {1, 2, 2, 3}}), OutOfRange);
    CHECK_THROWS_AS(validate_subset({"unsorted", {4, 2, 3, 5}}), OutOfRange);
    CHECK_NOTHROW(validate_subset({"ok", {1, 2, 3, 68}}));
}

TEST_CASE("select picks by id") {
    const FaceModel face = builtin_mean_face();
    const auto pts = select(face, find_subset("rigid-6"));
    REQUIRE(pts.size() == 6);
    CHECK(pts[0] == face.landmark(9));
    CHECK(pts[5] == face.landmark(46));

    std::vector<Vec2> uv(68);
    for (int i = 0; i < 68; ++i) uv[static_cast<std::size_t>(i)] = Vec2(i + 1, 0);
    const auto picked = select(uv, find_subset("rigid-6"));
    CHECK(picked[1].x() == 34);
    CHECK_THROWS_AS(select(std::span<const Vec2>(uv.data(), 10), find_subset("rigid-6")), ShapeMismatch);
}

TEST_CASE("text format round trip") {
    const FaceModel face = builtin_mean_face();
    const FaceModel back = parse_face_model(format_face_model(face));
    for (int id = 1; id <= kNumLandmarks; ++id) CHECK((back.landmark(id) - face.landmark(id)).norm() < 1e-15);

    const auto path = std::filesystem::temp_directory_path() / "hpe_face_roundtrip.txt";
    save_face_model(face, path);
    const FaceModel loaded = load_face_model(path);
    for (int id = 1; id <= kNumLandmarks; ++id) CHECK((loaded.landmark(id) - face.landmark(id)).norm() < 1e-15);
    std::filesystem::remove(path);
}

TEST_CASE("parser accepts any order, comments and blank lines and recentres") {
    std::string text = "\n  # header\n";
    for (int id = kNumLandmarks; id >= 1; --id) {
        text += std::to_string(id) + "\t" + std::to_string(id) + " 1.0 2.0  # point\n\n";
    }
    const FaceModel m = parse_face_model(text);
    CHECK(m.centroid().norm() < 1e-12);
    CHECK(m.landmark(1).x() == doctest::Approx(1.0 - 34.5));
    CHECK(m.landmark(68).y() == doctest::Approx(0.0));
}

TEST_CASE("parser errors") {
    CHECK_THROWS_AS(parse_face_model(model_text_without(30)), WrongCount);
    CHECK_THROWS_AS(parse_face_model(""), WrongCount);

    std::string dup = model_text_without(0) + "5 0 0 0\n";
    CHECK_THROWS_AS(parse_face_model(dup), DuplicateId);

    try {
        parse_face_model("# c\n1 0 0\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_face_model("1 0 0 x\n"), ParseError);
    CHECK_THROWS_AS(parse_face_model("69 0 0 0\n"), ParseError);
    CHECK_THROWS_AS(parse_face_model("1.5 0 0 0\n"), ParseError);
    CHECK_THROWS_AS(parse_face_model("1 0 0 nan\n"), ParseError);
    CHECK_THROWS_AS(load_face_model("/nonexistent/face.txt"), IoError);
}

TEST_CASE("stretch scales about the centroid") {
    const FaceModel face = builtin_mean_face();
    const FaceModel wide = stretch_model(face, 1.4, 1.0);
    CHECK(wide.centroid().norm() < 1e-12);
    for (int id = 1; id <= kNumLandmarks; ++id) {
        CHECK(wide.landmark(id).x() == doctest::Approx(1.4 * face.landmark(id).x()));
        CHECK(wide.landmark(id).y() == doctest::Approx(face.landmark(id).y()));
        CHECK(wide.landmark(id).z() == doctest::Approx(face.landmark(id).z()).epsilon(1e-15));
    }
    const FaceModel identity = stretch_model(face, 1.0, 1.0);
    for (int id = 1; id <= kNumLandmarks; ++id) CHECK((identity.landmark(id) - face.landmark(id)).norm() < 1e-15);

    // Stretching by s then 1/s restores the model.
    const FaceModel back = stretch_model(stretch_model(face, 1.25, 0.8), 0.8, 1.25);
    for (int id = 1; id <= kNumLandmarks; ++id) CHECK((back.landmark(id) - face.landmark(id)).norm() < 1e-12);

    CHECK_THROWS_AS(stretch_model(face, 0.4, 1.0), OutOfRange);
    CHECK_THROWS_AS(stretch_model(face, 1.0, 2.5), OutOfRange);
}

TEST_CASE("jitter is bounded and seeded") {
    std::vector<Vec2> pts(68, Vec2(100, 200));
    const auto a = jitter_landmarks(pts, 3.0, 77);
    const auto b = jitter_landmarks(pts, 3.0, 77);
    const auto c = jitter_landmarks(pts, 3.0, 78);
    CHECK(a == b);
    CHECK(a != c);
    double max_dev = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        max_dev = std::max(max_dev, (a[i] - pts[i]).cwiseAbs().maxCoeff());
    }
    CHECK(max_dev <= 3.0);
    CHECK(max_dev > 1.0);
    CHECK(jitter_landmarks(pts, 0.0, 77) == pts);
    CHECK_THROWS_AS(jitter_landmarks(pts, -1.0, 1), OutOfRange);

    // Same seed: the noise pattern scales linearly with the magnitude.
    const auto d = jitter_landmarks(pts, 6.0, 77);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(((d[i] - pts[i]) - 2.0 * (a[i] - pts[i])).norm() < 1e-12);
}

TEST_CASE("deform_subject moves only the expression groups when rigid sigma is zero") {
    const FaceModel face = builtin_mean_face();
    const FaceModel d = deform_subject(face, 0.0, 0.05, 5);
    int moved = 0;
    for (int id = 1; id <= kNumLandmarks; ++id) {
        const bool changed = d.landmark(id) != face.landmark(id);
        CHECK(changed == is_expression_landmark(id));
        moved += changed;
    }
    CHECK(moved == 37);

    const FaceModel none = deform_subject(face, 0.0, 0.0, 5);
    for (int id = 1; id <= kNumLandmarks; ++id) CHECK(none.landmark(id) == face.landmark(id));

    const FaceModel rigid = deform_subject(face, 0.01, 0.0, 5);
    for (int id = 1; id <= kNumLandmarks; ++id) CHECK(rigid.landmark(id) != face.landmark(id));

    CHECK_THROWS_AS(deform_subject(face, -0.1, 0.0, 1), OutOfRange);
    CHECK_THROWS_AS(deform_subject(face, 0.0, -0.1, 1), OutOfRange);
}

TEST_CASE("deform_subject displacement statistics") {
    // Per-coordinate std is nonrigid_sigma; displacements within a subject
    // are correlated (coefficient 0.5) through the shared group offset.
    const FaceModel face = builtin_mean_face();
    const double sigma = 0.1;
    double sum_sq = 0, sum_cross = 0;
    int n_sq = 0, n_cross = 0;
    for (std::uint64_t seed = 0; seed < 4000; ++seed) {
        const FaceModel d = deform_subject(face, 0.0, sigma, seed);
        const Vec3 a = d.landmark(5) - face.landmark(5);
        const Vec3 b = d.landmark(60) - face.landmark(60);
        for (int c = 0; c < 3; ++c) {
            sum_sq += a(c) * a(c) + b(c) * b(c);
            sum_cross += a(c) * b(c);
        }
        n_sq += 6;
        n_cross += 3;
    }
    const double var = sum_sq / n_sq;
    CHECK(std::sqrt(var) == doctest::Approx(sigma).epsilon(0.03));
    CHECK(sum_cross / n_cross / var == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("expression landmark groups") {
    std::set<int> expr;
    for (int id = 1; id <= kNumLandmarks; ++id)
        if (is_expression_landmark(id)) expr.insert(id);
    CHECK(expr.size() == 37);
    CHECK(expr.count(1));
    CHECK(expr.count(17));
    CHECK_FALSE(expr.count(18));
    CHECK_FALSE(expr.count(48));
    CHECK(expr.count(49));
    CHECK(expr.count(68));
}

TEST_CASE("make_scene projects all 68 points") {
    const FaceModel face = builtin_mean_face();
    const auto k = default_intrinsics(450, 450);
    const Pose pose = Pose::from_euler({20, -10, 5}, Vec3(0, 0, 5));
    const SyntheticScene s = make_scene(face, pose, k, 99);
    REQUIRE(s.image_points.size() == 68);
    CHECK(s.seed == 99);
    CHECK(s.image_points[30] == project_point(pose.rotation * face.landmark(31) + pose.translation, k));
    for (const Vec2& uv : s.image_points) {
        CHECK(uv.x() > 0);
        CHECK(uv.x() < 450);
        CHECK(uv.y() > 0);
        CHECK(uv.y() < 450);
    }
}
