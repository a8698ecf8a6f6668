#pragma once

// Graph Cluster Module: displacement-driven contraction of node messages on a
// one-out-edge transmit graph, connected-component seeding of the contracted
// support, and label recovery along the reversed graph.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfget/displacement.hpp"
#include "dfget/grid_graph.hpp"

namespace dfget {

using EnergyMap = Grid<double>;
using InstanceMap = Grid<Label>;

/// Every node has exactly one out-edge (self-loops allowed) and a message.
struct TransmitGraph {
    GridShape shape;
    std::vector<NodeId> target;
    std::vector<double> mes;
};

/// Edges of a TransmitGraph with their direction flipped. Node i has exactly
/// one in-edge, coming from source[i]; children lists the out-edges in CSR form.
struct ReverseGraph {
    GridShape shape;
    std::vector<NodeId> source;
    std::vector<std::size_t> child_start;
    std::vector<NodeId> children;
    std::vector<double> mes;

    std::size_t out_degree(NodeId i) const { return child_start[i + 1] - child_start[i]; }
};

struct GcmOptions {
    int t0 = 2;
    int t1 = 8;
};

inline int round_half_away(double x) {
    return static_cast<int>(std::round(x));
}

inline TransmitGraph build_tg(const DisplacementField& f, const EnergyMap& e) {
    if (!(f.shape == e.shape))
        throw std::invalid_argument("displacement and energy maps differ in shape");
    const GridShape& shape = f.shape;
    TransmitGraph tg{shape, std::vector<NodeId>(shape.size()), std::vector<double>(shape.size())};
    for (NodeId i = 0; i < shape.size(); ++i) {
        const Vec2 v = f[i];
        if (!std::isfinite(v.row) || !std::isfinite(v.col))
            throw std::invalid_argument("non-finite displacement at node " + std::to_string(i));
        if (!std::isfinite(e[i]) || e[i] < 0.0)
            throw std::invalid_argument("energy must be finite and non-negative at node " +
                                        std::to_string(i));
        const Pixel p = pixel_of(i, shape);
        // Clamp in floating point first so huge displacements cannot overflow int.
        const double tr = std::clamp(p.row + v.row, 0.0, static_cast<double>(shape.h - 1));
        const double tc = std::clamp(p.col + v.col, 0.0, static_cast<double>(shape.w - 1));
        tg.target[i] = nid({round_half_away(tr), round_half_away(tc)}, shape);
        tg.mes[i] = e[i];
    }
    return tg;
}

/// t0 rounds of mes_i <- sum of mes_j over nodes j whose out-edge ends at i.
inline TransmitGraph contract(TransmitGraph tg, int t0) {
    if (t0 < 0) throw std::invalid_argument("T0 must be >= 0, got " + std::to_string(t0));
    std::vector<double> next(tg.mes.size());
    for (int t = 0; t < t0; ++t) {
        std::fill(next.begin(), next.end(), 0.0);
        for (NodeId j = 0; j < tg.target.size(); ++j) next[tg.target[j]] += tg.mes[j];
        std::swap(tg.mes, next);
    }
    return tg;
}

/// 8-connected components of the nonzero support, numbered 1.. in raster
/// order of each component's first pixel.
template <class T>
InstanceMap connected_components(const Grid<T>& mes) {
    const GridShape& shape = mes.shape;
    InstanceMap ids(shape, 0);
    Label next_id = 0;
    std::deque<NodeId> queue;
    for (NodeId seed = 0; seed < shape.size(); ++seed) {
        if (mes[seed] == T{} || ids[seed] != 0) continue;
        ids[seed] = ++next_id;
        queue.push_back(seed);
        while (!queue.empty()) {
            const Pixel p = pixel_of(queue.front(), shape);
            queue.pop_front();
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    const int r = p.row + dr;
                    const int c = p.col + dc;
                    if (!shape.contains(r, c)) continue;
                    const NodeId j = nid({r, c}, shape);
                    if (mes[j] == T{} || ids[j] != 0) continue;
                    ids[j] = next_id;
                    queue.push_back(j);
                }
        }
    }
    return ids;
}

inline InstanceMap connected_components(const std::vector<double>& mes, const GridShape& shape) {
    return connected_components(Grid<double>(shape, mes));
}

inline ReverseGraph reverse(const TransmitGraph& tg) {
    const std::size_t n = tg.target.size();
    ReverseGraph rg;
    rg.shape = tg.shape;
    rg.source = tg.target;
    rg.mes = tg.mes;
    rg.child_start.assign(n + 1, 0);
    for (NodeId i = 0; i < n; ++i) ++rg.child_start[tg.target[i] + 1];
    for (std::size_t k = 0; k < n; ++k) rg.child_start[k + 1] += rg.child_start[k];
    rg.children.resize(n);
    std::vector<std::size_t> fill(rg.child_start.begin(), rg.child_start.end() - 1);
    for (NodeId i = 0; i < n; ++i) rg.children[fill[tg.target[i]]++] = i;
    return rg;
}

inline TransmitGraph reverse(const ReverseGraph& rg) {
    return TransmitGraph{rg.shape, rg.source, rg.mes};
}

/// Seeds rg with ins and runs t1 rounds of message passing along the reversed
/// edges. Each node has a single in-edge, so every round replaces a node's
/// label by the label of the node its displacement points to.
inline InstanceMap recover(const ReverseGraph& rg, const InstanceMap& ins, int t1) {
    if (t1 < 0) throw std::invalid_argument("T1 must be >= 0, got " + std::to_string(t1));
    if (!(ins.shape == rg.shape))
        throw std::invalid_argument("instance map and reverse graph differ in shape");
    const std::size_t n = rg.source.size();
    std::vector<Label> cur = ins.data;
    std::vector<Label> next(n);
    for (int t = 0; t < t1; ++t) {
        std::fill(next.begin(), next.end(), 0);
        for (NodeId src = 0; src < n; ++src)
            for (std::size_t k = rg.child_start[src]; k < rg.child_start[src + 1]; ++k)
                next[rg.children[k]] += cur[src];
        std::swap(cur, next);
    }
    return InstanceMap(rg.shape, std::move(cur));
}

inline InstanceMap gcm(const DisplacementField& f, const EnergyMap& e, GcmOptions opt = {}) {
    TransmitGraph tg = contract(build_tg(f, e), opt.t0);
    const InstanceMap seeds = connected_components(tg.mes, tg.shape);
    InstanceMap out = recover(reverse(tg), seeds, opt.t1);
    for (NodeId i = 0; i < out.size(); ++i)
        if (e[i] == 0.0) out[i] = 0;
    return out;
}

/// Mean displacement over non-overlapping patch x patch blocks, rescaled to
/// feature-grid pixel units.
inline DisplacementField downsample_displacement(const DisplacementField& f, int patch) {
    if (patch < 1) throw std::invalid_argument("patch must be >= 1, got " + std::to_string(patch));
    if (f.shape.h % patch != 0 || f.shape.w % patch != 0)
        throw std::invalid_argument("grid " + std::to_string(f.shape.h) + "x" +
                                    std::to_string(f.shape.w) + " is not divisible by patch " +
                                    std::to_string(patch));
    const GridShape coarse(f.shape.h / patch, f.shape.w / patch);
    DisplacementField out(coarse);
    const double scale = 1.0 / (static_cast<double>(patch) * patch * patch);
    for (int r = 0; r < coarse.h; ++r)
        for (int c = 0; c < coarse.w; ++c) {
            double sr = 0.0;
            double sc = 0.0;
            for (int dr = 0; dr < patch; ++dr)
                for (int dc = 0; dc < patch; ++dc) {
                    const Vec2 v = f(r * patch + dr, c * patch + dc);
                    sr += v.row;
                    sc += v.col;
                }
            out(r, c) = {sr * scale, sc * scale};
        }
    return out;
}

/// Clusters every feature-grid node (unit energy) by the patch-averaged field.
inline InstanceMap cluster_for_masking(const DisplacementField& f, int patch = 4, GcmOptions opt = {}) {
    const DisplacementField coarse = downsample_displacement(f, patch);
    return gcm(coarse, EnergyMap(coarse.shape, 1.0), opt);
}

/// Zeroes every edge whose endpoints lie in different clusters.
template <class T>
EdgeField<T> mask_diffusivity(EdgeField<T> s, const InstanceMap& cls) {
    if (!(cls.shape == s.shape()))
        throw std::invalid_argument("cluster map and diffusivity differ in shape");
    for (NodeId i = 0; i < cls.size(); ++i)
        for_each_neighbor(i, s.stencil(), s.shape(), [&](int c, NodeId j) {
            if (cls[i] != cls[j]) s.at(i, c) = T(0.0);
        });
    return s;
}

}  // namespace dfget
