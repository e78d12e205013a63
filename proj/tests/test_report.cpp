#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "hpe/errors.hpp"
#include "hpe/report.hpp"

using namespace hpe;

namespace {

StudyResult sample_result() {
    StudyResult r{"jitter", "rigid-6", {}};
    r.rows.push_back({0.0, 1e-9, 2.5e-10, 0.0, 4.1666666666666665e-10, 500, 0});
    r.rows.push_back({2.5, 0.1234567890123, 0.2, 0.3, 0.2078189296707667, 498, 2});
    r.rows.push_back({10.0, 3.0, 2.0, 1.0, 2.0, 500, 0});
    return r;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Minimal XML well-formedness check: balanced tags, quoted attributes,
// no stray '<' or unescaped '&' in text.
bool well_formed_xml(const std::string& s) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    bool root_seen = false;
    while (i < s.size()) {
        if (s[i] == '<') {
            const auto close = s.find('>', i);
            if (close == std::string::npos) return false;
            std::string tag = s.substr(i + 1, close - i - 1);
            i = close + 1;
            if (tag.starts_with("?")) {
                if (!tag.ends_with("?")) return false;
                continue;
            }
            if (tag.find('<') != std::string::npos) return false;
            if (std::count(tag.begin(), tag.end(), '"') % 2) return false;
            if (tag.starts_with("/")) {
                const std::string name = tag.substr(1);
                if (stack.empty() || stack.back() != name) return false;
                stack.pop_back();
                continue;
            }
            const bool self_closing = tag.ends_with("/");
            const std::string name = tag.substr(0, tag.find_first_of(" /"));
            if (stack.empty()) {
                if (root_seen) return false;
                root_seen = true;
            }
            if (!self_closing) stack.push_back(name);
        } else {
            if (s[i] == '&') {
                const auto semi = s.find(';', i);
                if (semi == std::string::npos) return false;
                const std::string ent = s.substr(i, semi - i + 1);
                if (ent != "&amp;" && ent != "&lt;" && ent != "&gt;" && ent != "&quot;") return false;
            }
            ++i;
        }
    }
    return root_seen && stack.empty();
}

}  // namespace

TEST_CASE("CSV layout") {
    const std::string csv = format_csv(sample_result());
    CHECK(csv.starts_with("sweep,yaw_mae,pitch_mae,roll_mae,mae,trials\n"));
    CHECK(csv.find("\n10,3,2,1,2,500\n") != std::string::npos);
    CHECK(csv.back() == '\n');
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("empty result gives a header-only CSV") {
    CHECK(format_csv(StudyResult{}) == "sweep,yaw_mae,pitch_mae,roll_mae,mae,trials\n");
    CHECK(parse_csv(format_csv(StudyResult{})).empty());
}

TEST_CASE("CSV round trip is exact") {
    const StudyResult r = sample_result();
    const auto rows = parse_csv(format_csv(r));
    REQUIRE(rows.size() == r.rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        StudyRow expect = r.rows[i];
        expect.excluded = 0;  // not stored
        CHECK(rows[i] == expect);
    }

    const auto path = std::filesystem::temp_directory_path() / "hpe_report_roundtrip.csv";
    emit_csv(r, path);
    CHECK(read_csv(path).size() == 3);
    std::filesystem::remove(path);
}

TEST_CASE("invalid cells round trip as NaN") {
    StudyResult r{"alpha", "alpha", {}};
    const double nan = std::nan("");
    r.rows.push_back({4.0, nan, nan, nan, nan, 0, 10});
    const auto rows = parse_csv(format_csv(r));
    REQUIRE(rows.size() == 1);
    CHECK(std::isnan(rows[0].mae));
    CHECK(rows[0].trials == 0);
    CHECK(well_formed_xml(format_svg(r)));
}

TEST_CASE("CSV parse errors") {
    CHECK_THROWS_AS(parse_csv(""), ParseError);
    CHECK_THROWS_AS(parse_csv("a,b\n"), ParseError);
    try {
        parse_csv("sweep,yaw_mae,pitch_mae,roll_mae,mae,trials\n1,2,3,4,5,6\n1,2,3\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_csv("sweep,yaw_mae,pitch_mae,roll_mae,mae,trials\n1,2,x,4,5,6\n"), ParseError);
    CHECK_THROWS_AS(parse_csv("sweep,yaw_mae,pitch_mae,roll_mae,mae,trials\n1,2,3,4,5,6.5\n"), ParseError);
    CHECK_THROWS_AS(read_csv("/nonexistent/x.csv"), IoError);
}

TEST_CASE("SVG is well formed and carries every series") {
    const std::string svg = format_svg(sample_result());
    CHECK(well_formed_xml(svg));
    CHECK(std::count(svg.begin(), svg.end(), '\n') > 10);
    std::size_t polylines = 0;
    for (std::size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++polylines;
    CHECK(polylines == 4);
    for (const char* label : {">yaw<", ">pitch<", ">roll<", ">mean<"}) CHECK(svg.find(label) != std::string::npos);
    CHECK(svg.find("2 trials excluded") != std::string::npos);
    CHECK(format_svg(sample_result()) == svg);
}

TEST_CASE("SVG escapes text and handles degenerate input") {
    StudyResult r{"a<b", "x&y", {}};
    CHECK(well_formed_xml(format_svg(r)));
    CHECK(format_svg(r).find("a&lt;b / x&amp;y") != std::string::npos);
    r.rows.push_back({1.0, 0.0, 0.0, 0.0, 0.0, 1, 0});
    CHECK(well_formed_xml(format_svg(r)));
}

TEST_CASE("the checker rejects broken XML") {
    CHECK_FALSE(well_formed_xml("<svg><g></svg>"));
    CHECK_FALSE(well_formed_xml("<svg>a & b</svg>"));
    CHECK_FALSE(well_formed_xml("<svg x=\"1></svg>"));
    CHECK(well_formed_xml("<svg><g/></svg>"));
}

TEST_CASE("artifact names and report emission") {
    StudyReport single{sample_result()};
    single[0].study = "subset";
    CHECK(artifact_name(single, 0, "csv") == "subset.csv");
    StudyReport multi{sample_result(), sample_result()};
    multi[1].series = "all-68";
    CHECK(artifact_name(multi, 0, "svg") == "jitter_rigid-6.svg");
    CHECK(artifact_name(multi, 1, "csv") == "jitter_all-68.csv");

    const auto dir = std::filesystem::temp_directory_path() / "hpe_report_test" / "nested";
    std::filesystem::remove_all(dir.parent_path());
    const auto csvs = emit_report(multi, dir);
    REQUIRE(csvs.size() == 2);
    CHECK(std::filesystem::exists(dir / "jitter_rigid-6.csv"));
    CHECK(std::filesystem::exists(dir / "jitter_all-68.svg"));
    CHECK(slurp(csvs[1]) == format_csv(multi[1]));
    std::filesystem::remove_all(dir.parent_path());
}
