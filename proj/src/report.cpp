#include "hpe/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hpe/errors.hpp"

namespace hpe {

namespace {

void append_number(std::string& out, double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

std::string format_csv(const StudyResult& result) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const StudyRow& r : result.rows) {
        for (double v : {r.sweep, r.yaw_mae, r.pitch_mae, r.roll_mae, r.mae}) {
            append_number(out, v);
            out += ',';
        }
        out += std::to_string(r.trials);
        out += '\n';
    }
    return out;
}

void emit_csv(const StudyResult& result, const std::filesystem::path& path) {
    write_text(path, format_csv(result));
}

std::vector<StudyRow> parse_csv(std::string_view text) {
    std::vector<StudyRow> rows;
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (line_no == 1) {
            if (line != kCsvHeader) throw ParseError("unexpected CSV header", 1);
            continue;
        }
        if (line.empty()) continue;

        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string_view::npos ? line.size() - start : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 6) throw ParseError("expected 6 fields", line_no);

        StudyRow r;
        double* targets[] = {&r.sweep, &r.yaw_mae, &r.pitch_mae, &r.roll_mae, &r.mae};
        for (std::size_t i = 0; i < 5; ++i) {
            const auto f = fields[i];
            const auto res = std::from_chars(f.data(), f.data() + f.size(), *targets[i]);
            if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) throw ParseError("bad number", line_no);
        }
        const auto f = fields[5];
        const auto res = std::from_chars(f.data(), f.data() + f.size(), r.trials);
        if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) throw ParseError("bad trial count", line_no);
        rows.push_back(r);
    }
    if (line_no == 0) throw ParseError("empty CSV", 1);
    return rows;
}

std::vector<StudyRow> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

std::string format_svg(const StudyResult& result) {
    constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
    const double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;

    double x_lo = 0, x_hi = 1, y_hi = 0;
    int excluded = 0;
    if (!result.rows.empty()) {
        x_lo = x_hi = result.rows.front().sweep;
    }
    for (const auto& r : result.rows) {
        x_lo = std::min(x_lo, r.sweep);
        x_hi = std::max(x_hi, r.sweep);
        for (double v : {r.yaw_mae, r.pitch_mae, r.roll_mae, r.mae}) {
            if (std::isfinite(v)) y_hi = std::max(y_hi, v);
        }
        excluded += r.excluded;
    }
    if (x_hi <= x_lo) {
        x_lo -= 1;
        x_hi += 1;
    }
    y_hi = y_hi > 0 ? y_hi * 1.1 : 1.0;
    auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
    auto py = [&](double y) { return kTop + plot_h - y / y_hi * plot_h; };

    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
    std::string title = result.study + (result.series.empty() ? "" : " / " + result.series);
    if (excluded > 0) title += " (" + std::to_string(excluded) + " trials excluded)";
    s += "<text x=\"" + fixed(kLeft) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" +
         xml_escape(title) + "</text>\n";

    // Axes and ticks.
    s += "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n";
    s += "<line x1=\"" + fixed(kLeft) + "\" y1=\"" + fixed(kTop + plot_h) + "\" x2=\"" + fixed(kLeft + plot_w) +
         "\" y2=\"" + fixed(kTop + plot_h) + "\"/>\n";
    s += "<line x1=\"" + fixed(kLeft) + "\" y1=\"" + fixed(kTop) + "\" x2=\"" + fixed(kLeft) + "\" y2=\"" +
         fixed(kTop + plot_h) + "\"/>\n";
    s += "</g>\n";
    s += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x_lo + (x_hi - x_lo) * i / 4.0;
        const double yv = y_hi * i / 4.0;
        s += "<text x=\"" + fixed(px(xv)) + "\" y=\"" + fixed(kTop + plot_h + 16) + "\" text-anchor=\"middle\">" +
             fixed(xv) + "</text>\n";
        s += "<text x=\"" + fixed(kLeft - 6) + "\" y=\"" + fixed(py(yv) + 4) + "\" text-anchor=\"end\">" +
             fixed(yv) + "</text>\n";
    }
    s += "<text x=\"" + fixed(kLeft + plot_w / 2) + "\" y=\"" + fixed(kH - 10) +
         "\" text-anchor=\"middle\">sweep</text>\n";
    s += "<text x=\"16\" y=\"" + fixed(kTop + plot_h / 2) + "\" transform=\"rotate(-90 16 " +
         fixed(kTop + plot_h / 2) + ")\" text-anchor=\"middle\">MAE (deg)</text>\n";
    s += "</g>\n";

    struct Series {
        const char* name;
        const char* color;
        double StudyRow::*field;
        bool dashed;
    };
    const Series series[] = {
        {"yaw", "#1f77b4", &StudyRow::yaw_mae, false},
        {"pitch", "#ff7f0e", &StudyRow::pitch_mae, false},
        {"roll", "#2ca02c", &StudyRow::roll_mae, false},
        {"mean", "#000000", &StudyRow::mae, true},
    };
    for (std::size_t k = 0; k < 4; ++k) {
        const Series& se = series[k];
        std::string pts;
        for (const auto& r : result.rows) {
            const double v = r.*se.field;
            if (!std::isfinite(v)) continue;
            if (!pts.empty()) pts += ' ';
            pts += fixed(px(r.sweep)) + "," + fixed(py(v));
        }
        s += "<polyline fill=\"none\" stroke=\"" + std::string(se.color) + "\" stroke-width=\"2\"" +
             (se.dashed ? " stroke-dasharray=\"6 4\"" : "") + " points=\"" + pts + "\"/>\n";
        const double ly = kTop + 10 + 20.0 * static_cast<double>(k);
        s += "<line x1=\"" + fixed(kW - kRight + 15) + "\" y1=\"" + fixed(ly) + "\" x2=\"" +
             fixed(kW - kRight + 40) + "\" y2=\"" + fixed(ly) + "\" stroke=\"" + se.color + "\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + fixed(kW - kRight + 46) + "\" y=\"" + fixed(ly + 4) +
             "\" font-family=\"sans-serif\" font-size=\"12\">" + se.name + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

void emit_svg(const StudyResult& result, const std::filesystem::path& path) {
    write_text(path, format_svg(result));
}

std::string artifact_name(const StudyReport& report, std::size_t index, std::string_view ext) {
    const StudyResult& r = report.at(index);
    std::string name = r.study;
    if (report.size() > 1) name += "_" + r.series;
    return name + "." + std::string(ext);
}

std::vector<std::filesystem::path> emit_report(const StudyReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    std::vector<std::filesystem::path> csvs;
    for (std::size_t i = 0; i < report.size(); ++i) {
        const auto csv = dir / artifact_name(report, i, "csv");
        emit_csv(report[i], csv);
        emit_svg(report[i], dir / artifact_name(report, i, "svg"));
        csvs.push_back(csv);
    }
    return csvs;
}

}  // namespace hpe
