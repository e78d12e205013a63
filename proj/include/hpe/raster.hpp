#pragma once

// Landmark rasters and nearest-neighbour resolution degradation.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "hpe/rotmath.hpp"

namespace hpe {

/// Row-major grid of values in [0, 1]; pixel (x, y) is centred at (x, y).
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    Raster() = default;
    Raster(int w, int h);

    double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }

    friend bool operator==(const Raster&, const Raster&) = default;
};

constexpr double kSplatSigma = 1.0;

/// Splats each in-bounds point as a Gaussian bump (sigma = 1 px), clamped to 1.
Raster rasterize(std::span<const Vec2> points, int width, int height);

/// Maps image-space points into a width x height frame: a square window
/// centred on the points' bounding box with side `margin` times its larger
/// extent (a loose face crop).
std::vector<Vec2> crop_to_frame(std::span<const Vec2> points, int width, int height, double margin = 1.3);

/// Nearest-neighbour downsample by `factor` then upsample back to the same
/// size: out(x, y) = in(floor(x / f) * f, floor(y / f) * f).
Raster degrade(const Raster& r, int factor);

/// In-place variant over a raw row-major buffer.
void degrade_in_place(std::span<double> values, int width, int height, int factor);

enum class AugmentScheme { none, fixed10, uniform1to10, set5 };

/// "none", "fixed10", "uniform1to10", "set5"; throws UnknownScheme otherwise.
AugmentScheme parse_scheme(std::string_view name);
std::string_view scheme_name(AugmentScheme scheme);

/// fixed10 -> 10, uniform1to10 -> uniform in [1, 10], set5 -> one of
/// {1, 6, 11, 16, 21}, none -> 1. Deterministic per seed.
int augment_factor(AugmentScheme scheme, std::uint64_t seed);

/// Plain (P2) PGM, 8-bit.
void write_pgm(const Raster& r, const std::filesystem::path& path);

}  // namespace hpe
