#pragma once

// Synthetic instance-label fixtures: separated, adherent, concave and tiled
// instances, plus seeded truncated-Voronoi tilings.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <regex>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfget/displacement.hpp"

namespace dfget {

inline LabelMap synth_two_squares_separated(GridShape shape) {
    constexpr int margin = 2;
    constexpr int gap = 2;
    const int side = std::min(shape.h - 2 * margin, (shape.w - 2 * margin - gap) / 2);
    if (side < 1) throw std::invalid_argument("grid too small for two-squares-separated");
    LabelMap out(shape, 0);
    const int top = (shape.h - side) / 2;
    const int left_a = margin;
    const int left_b = margin + side + gap;
    for (int r = top; r < top + side; ++r)
        for (int c = 0; c < side; ++c) {
            out(r, left_a + c) = 1;
            out(r, left_b + c) = 2;
        }
    return out;
}

/// Two overlapping discs; contested pixels go to the nearer center.
inline LabelMap synth_two_blobs_adherent(GridShape shape) {
    const double radius = 0.4 * std::min<double>(shape.h, shape.w / 2.0);
    if (radius < 2.0) throw std::invalid_argument("grid too small for two-blobs-adherent");
    const double half_sep = 0.8 * radius;
    const double cr = (shape.h - 1) / 2.0;
    const double ca = (shape.w - 1) / 2.0 - half_sep;
    const double cb = (shape.w - 1) / 2.0 + half_sep;
    LabelMap out(shape, 0);
    for (int r = 0; r < shape.h; ++r)
        for (int c = 0; c < shape.w; ++c) {
            const double da = std::hypot(r - cr, c - ca);
            const double db = std::hypot(r - cr, c - cb);
            if (std::min(da, db) > radius) continue;
            out(r, c) = da <= db ? 1 : 2;
        }
    return out;
}

/// A U-shaped annulus opening downwards, plus a separate small square.
inline LabelMap synth_concave_horseshoe(GridShape shape) {
    const double outer = 0.3 * std::min(shape.h, shape.w);
    const double inner = 0.55 * outer;
    if (outer - inner < 2.0) throw std::invalid_argument("grid too small for concave-horseshoe");
    const double cr = 0.45 * shape.h;
    const double cc = 0.4 * shape.w;
    LabelMap out(shape, 0);
    for (int r = 0; r < shape.h; ++r)
        for (int c = 0; c < shape.w; ++c) {
            const double d = std::hypot(r - cr, c - cc);
            const bool ring = d >= inner && d <= outer;
            const bool opening = r > cr && std::abs(c - cc) < inner;
            if (ring && !opening) out(r, c) = 1;
        }
    const int side = std::max(2, static_cast<int>(0.15 * std::min(shape.h, shape.w)));
    const int top = shape.h - side - 2;
    const int left = shape.w - side - 2;
    for (int r = top; r < top + side; ++r)
        for (int c = left; c < left + side; ++c)
            if (out(r, c) == 0) out(r, c) = 2;
    return out;
}

/// k rectangular instances tiling the grid in a near-square layout; cells past
/// the k-th stay background.
inline LabelMap synth_grid_of_instances(GridShape shape, int k) {
    if (k < 1) throw std::invalid_argument("grid-of-k-instances needs k >= 1");
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));
    const int rows = (k + cols - 1) / cols;
    if (rows > shape.h || cols > shape.w)
        throw std::invalid_argument("grid too small for " + std::to_string(k) + " instances");
    LabelMap out(shape, 0);
    for (int r = 0; r < shape.h; ++r)
        for (int c = 0; c < shape.w; ++c) {
            const int cell = (r * rows / shape.h) * cols + (c * cols / shape.w);
            if (cell < k) out(r, c) = static_cast<Label>(cell + 1);
        }
    return out;
}

/// Voronoi cells of well-spread random sites, truncated to a disc around each
/// site so that touching cells are adherent and the rest is background.
inline LabelMap synth_random_voronoi(GridShape shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double spacing = std::max(6.0, 0.28 * std::min(shape.h, shape.w));
    const double reach = 0.8 * spacing;
    auto uniform = [&](int lo, int hi) {  // [lo, hi)
        return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo));
    };

    std::vector<Pixel> sites;
    const int margin = static_cast<int>(reach / 2);
    if (shape.h <= 2 * margin || shape.w <= 2 * margin)
        throw std::invalid_argument("grid too small for random-voronoi");
    for (int attempt = 0; attempt < 2000; ++attempt) {
        const Pixel p{uniform(margin, shape.h - margin), uniform(margin, shape.w - margin)};
        const bool spread = std::all_of(sites.begin(), sites.end(), [&](const Pixel& q) {
            return std::hypot(p.row - q.row, p.col - q.col) >= spacing;
        });
        if (spread) sites.push_back(p);
    }

    LabelMap out(shape, 0);
    for (int r = 0; r < shape.h; ++r)
        for (int c = 0; c < shape.w; ++c) {
            double best = reach;
            Label id = 0;
            for (std::size_t s = 0; s < sites.size(); ++s) {
                const double d = std::hypot(r - sites[s].row, c - sites[s].col);
                if (d <= best && (id == 0 || d < best)) {
                    best = d;
                    id = static_cast<Label>(s + 1);
                }
            }
            out(r, c) = id;
        }
    return out;
}

inline const std::vector<std::string>& fixture_names() {
    static const std::vector<std::string> names = {"two-blobs-adherent", "two-squares-separated",
                                                   "concave-horseshoe", "grid-of-k-instances",
                                                   "random-voronoi"};
    return names;
}

/// Dispatch by fixture name. "grid-of-<k>-instances" selects k directly;
/// "grid-of-k-instances" uses the grid_k argument.
inline LabelMap synth(const std::string& name, GridShape shape, std::uint64_t seed, int grid_k = 9) {
    if (name == "two-squares-separated") return synth_two_squares_separated(shape);
    if (name == "two-blobs-adherent") return synth_two_blobs_adherent(shape);
    if (name == "concave-horseshoe") return synth_concave_horseshoe(shape);
    if (name == "random-voronoi") return synth_random_voronoi(shape, seed);
    if (name == "grid-of-k-instances") return synth_grid_of_instances(shape, grid_k);
    static const std::regex grid_re("grid-of-([0-9]+)-instances");
    std::smatch m;
    if (std::regex_match(name, m, grid_re)) return synth_grid_of_instances(shape, std::stoi(m[1]));
    throw std::invalid_argument("unknown fixture '" + name + "'");
}

}  // namespace dfget
