#pragma once

// Generic discrete diffusion step and ground-truth displacement synthesis by
// same-instance coordinate averaging.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfget/grid_graph.hpp"
#include "dfget/tensor.hpp"

namespace dfget {

using Label = std::uint32_t;
using LabelMap = Grid<Label>;

/// (row, col) in pixel units.
struct Vec2 {
    double row = 0.0;
    double col = 0.0;
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

using CoordField = Grid<Vec2>;
using DisplacementField = Grid<Vec2>;
using NodeFeatures = Matrix<double>;

inline CoordField initial_coords(const GridShape& shape) {
    CoordField d(shape);
    for (int r = 0; r < shape.h; ++r)
        for (int c = 0; c < shape.w; ++c) d(r, c) = {static_cast<double>(r), static_cast<double>(c)};
    return d;
}

/// One Jacobi step z_i <- (1 - tau) z_i + tau * sum_j s_ij z_j.
///
/// Rows of z are nodes of s.shape(). The caller is responsible for supplying
/// diffusivities whose per-node sums are 1 (or with tau * sum <= 1).
inline NodeFeatures diffusion_step(const NodeFeatures& z, const EdgeMap& s, double tau) {
    const GridShape& shape = s.shape();
    if (z.rows() != shape.size())
        throw std::invalid_argument("feature rows (" + std::to_string(z.rows()) +
                                    ") do not match node count (" + std::to_string(shape.size()) + ")");
    if (!(tau >= 0.0 && tau <= 1.0))
        throw std::invalid_argument("tau must lie in [0, 1], got " + std::to_string(tau));

    NodeFeatures out(z.rows(), z.cols());
    std::vector<double> acc(z.cols());
    for (NodeId i = 0; i < shape.size(); ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for_each_neighbor(i, s.stencil(), shape, [&](int c, NodeId j) {
            const double sij = s.at(i, c);
            if (sij < 0.0)
                throw std::invalid_argument("negative diffusivity at node " + std::to_string(i) +
                                            ", stencil index " + std::to_string(c));
            if (sij == 0.0) return;
            const auto zj = z.row(j);
            for (std::size_t ch = 0; ch < acc.size(); ++ch) acc[ch] += sij * zj[ch];
        });
        const auto zi = z.row(i);
        auto oi = out.row(i);
        for (std::size_t ch = 0; ch < acc.size(); ++ch)
            oi[ch] = (1.0 - tau) * zi[ch] + tau * acc[ch];
    }
    return out;
}

struct GtDisplacementOptions {
    int radius = 5;
    int iters = 96;
};

/// Ground-truth displacement: every foreground pixel's coordinate is replaced
/// `iters` times by the mean coordinate of its same-label disk neighbors
/// (simultaneous update), and the field is the net motion. Background stays
/// zero; a pixel without same-label neighbors does not move.
inline DisplacementField gt_displacement(const LabelMap& labels, GtDisplacementOptions opt = {}) {
    if (opt.radius < 1)
        throw std::invalid_argument("radius must be >= 1, got " + std::to_string(opt.radius));
    if (opt.iters < 0)
        throw std::invalid_argument("iters must be >= 0, got " + std::to_string(opt.iters));

    const GridShape& shape = labels.shape;
    const Stencil stencil(NeighborhoodSpec::disk(opt.radius));

    // Same-label adjacency in CSR form; order follows the stencil.
    std::vector<std::size_t> start(shape.size() + 1, 0);
    std::vector<NodeId> adj;
    for (NodeId i = 0; i < shape.size(); ++i) {
        start[i] = adj.size();
        if (labels[i] == 0) continue;
        for_each_neighbor(i, stencil, shape, [&](int, NodeId j) {
            if (labels[j] == labels[i]) adj.push_back(j);
        });
    }
    start[shape.size()] = adj.size();

    const CoordField d0 = initial_coords(shape);
    CoordField cur = d0;
    CoordField next = d0;
    for (int t = 0; t < opt.iters; ++t) {
        for (NodeId i = 0; i < shape.size(); ++i) {
            const std::size_t b = start[i];
            const std::size_t e = start[i + 1];
            if (b == e) {
                next[i] = cur[i];
                continue;
            }
            double sr = 0.0;
            double sc = 0.0;
            for (std::size_t k = b; k < e; ++k) {
                sr += cur[adj[k]].row;
                sc += cur[adj[k]].col;
            }
            const double inv = 1.0 / static_cast<double>(e - b);
            next[i] = {sr * inv, sc * inv};
        }
        std::swap(cur, next);
    }

    DisplacementField f(shape);
    for (NodeId i = 0; i < shape.size(); ++i) {
        if (labels[i] == 0) continue;
        f[i] = {cur[i].row - d0[i].row, cur[i].col - d0[i].col};
    }
    return f;
}

}  // namespace dfget
