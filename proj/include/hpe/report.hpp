#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hpe/study.hpp"

namespace hpe {

inline constexpr std::string_view kCsvHeader = "sweep,yaw_mae,pitch_mae,roll_mae,mae,trials";

/// Header line plus one row per sweep value; numbers use the shortest
/// representation that round-trips. `trials` counts contributing trials.
std::string format_csv(const StudyResult& result);
void emit_csv(const StudyResult& result, const std::filesystem::path& path);

/// Inverse of format_csv (series/study names and excluded counts are not
/// stored and come back empty/zero).
std::vector<StudyRow> parse_csv(std::string_view text);
std::vector<StudyRow> read_csv(const std::filesystem::path& path);

/// Line chart with one polyline per angle (plus the mean), sweep on x.
std::string format_svg(const StudyResult& result);
void emit_svg(const StudyResult& result, const std::filesystem::path& path);

/// "<study>.<ext>" for single-series reports, else "<study>_<series>.<ext>".
std::string artifact_name(const StudyReport& report, std::size_t index, std::string_view ext);

/// Writes every series of `report` as CSV and SVG into `dir` (created if
/// missing) and returns the CSV paths.
std::vector<std::filesystem::path> emit_report(const StudyReport& report, const std::filesystem::path& dir);

}  // namespace hpe
