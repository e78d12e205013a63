#include "hpe/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <string>

#include "hpe/errors.hpp"
#include "hpe/random.hpp"

namespace hpe {

Raster::Raster(int w, int h) : width(w), height(h) {
    if (w < 1 || h < 1) throw OutOfRange("raster dimensions must be >= 1");
    values.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0);
}

Raster rasterize(std::span<const Vec2> points, int width, int height) {
    Raster r(width, height);
    constexpr int kRadius = 3;
    const double inv_two_var = 1.0 / (2.0 * kSplatSigma * kSplatSigma);
    for (const Vec2& p : points) {
        if (!p.allFinite()) continue;
        const int px = static_cast<int>(std::lround(p.x()));
        const int py = static_cast<int>(std::lround(p.y()));
        if (px < 0 || px >= width || py < 0 || py >= height) continue;
        for (int y = std::max(0, py - kRadius); y <= std::min(height - 1, py + kRadius); ++y) {
            for (int x = std::max(0, px - kRadius); x <= std::min(width - 1, px + kRadius); ++x) {
                const double dx = x - p.x(), dy = y - p.y();
                r.at(x, y) += std::exp(-(dx * dx + dy * dy) * inv_two_var);
            }
        }
    }
    for (double& v : r.values) v = std::min(v, 1.0);
    return r;
}

std::vector<Vec2> crop_to_frame(std::span<const Vec2> points, int width, int height, double margin) {
    std::vector<Vec2> out(points.begin(), points.end());
    if (points.empty()) return out;
    Vec2 lo = points.front(), hi = points.front();
    for (const Vec2& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec2 center = 0.5 * (lo + hi);
    const double side = margin * std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1e-9});
    // Window [-side/2, side/2] maps onto pixel centres [-0.5, dim - 0.5].
    const double sx = width / side, sy = height / side;
    for (Vec2& p : out) {
        p.x() = (p.x() - center.x()) * sx + 0.5 * width - 0.5;
        p.y() = (p.y() - center.y()) * sy + 0.5 * height - 0.5;
    }
    return out;
}

void degrade_in_place(std::span<double> values, int width, int height, int factor) {
    if (factor < 1) throw OutOfRange("degrade factor must be >= 1");
    if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw ShapeMismatch("raster buffer size mismatch");
    }
    if (factor == 1) return;
    // Rows and columns are visited in increasing order and each sample index
    // is <= the index it writes, so the source is read before it is overwritten.
    for (int y = 0; y < height; ++y) {
        const int sy = (y / factor) * factor;
        for (int x = 0; x < width; ++x) {
            const int sx = (x / factor) * factor;
            values[static_cast<std::size_t>(y) * width + x] = values[static_cast<std::size_t>(sy) * width + sx];
        }
    }
}

Raster degrade(const Raster& r, int factor) {
    Raster out = r;
    degrade_in_place(out.values, out.width, out.height, factor);
    return out;
}

AugmentScheme parse_scheme(std::string_view name) {
    if (name == "none") return AugmentScheme::none;
    if (name == "fixed10") return AugmentScheme::fixed10;
    if (name == "uniform1to10") return AugmentScheme::uniform1to10;
    if (name == "set5") return AugmentScheme::set5;
    throw UnknownScheme("unknown augmentation scheme '" + std::string(name) + "'");
}

std::string_view scheme_name(AugmentScheme scheme) {
    switch (scheme) {
        case AugmentScheme::none: return "none";
        case AugmentScheme::fixed10: return "fixed10";
        case AugmentScheme::uniform1to10: return "uniform1to10";
        case AugmentScheme::set5: return "set5";
    }
    throw UnknownScheme("unknown augmentation scheme");
}

int augment_factor(AugmentScheme scheme, std::uint64_t seed) {
    static constexpr std::array<int, 5> kSet5 = {1, 6, 11, 16, 21};
    Rng rng = make_rng(seed, 0xa09);
    switch (scheme) {
        case AugmentScheme::none: return 1;
        case AugmentScheme::fixed10: return 10;
        case AugmentScheme::uniform1to10: return static_cast<int>(uniform_int(rng, 1, 10));
        case AugmentScheme::set5: return kSet5[static_cast<std::size_t>(uniform_int(rng, 0, 4))];
    }
    throw UnknownScheme("unknown augmentation scheme");
}

void write_pgm(const Raster& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "P2\n" << r.width << ' ' << r.height << "\n255\n";
    for (int y = 0; y < r.height; ++y) {
        for (int x = 0; x < r.width; ++x) {
            const long v = std::lround(std::clamp(r.at(x, y), 0.0, 1.0) * 255.0);
            out << v << (x + 1 == r.width ? '\n' : ' ');
        }
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace hpe
