#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <map>
#include <random>

#include "dfget/displacement.hpp"
#include "dfget/gcm.hpp"
#include "dfget/synth.hpp"
#include "oracles.hpp"

using namespace dfget;

namespace {

LabelMap two_adherent_squares() {
    // 9x9 squares at rows 1..9, cols 1..9 and cols 10..18
    LabelMap l(GridShape(11, 20), 0);
    for (int r = 1; r <= 9; ++r)
        for (int c = 1; c <= 18; ++c) l(r, c) = c <= 9 ? 1 : 2;
    return l;
}

EdgeMap uniform_diffusivity(const GridShape& shape, const Stencil& st) {
    EdgeMap s(shape, st, 0.0);
    for (NodeId i = 0; i < shape.size(); ++i) {
        const auto nb = neighbors(i, st, shape);
        for (const auto& n : nb) s.at(i, n.index) = 1.0 / static_cast<double>(nb.size());
    }
    return s;
}

double max_abs_diff(const DisplacementField& a, const DisplacementField& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max({m, std::abs(a[i].row - b[i].row), std::abs(a[i].col - b[i].col)});
    return m;
}

}  // namespace

TEST(DiffusionStep, UniformFeaturesUnchanged) {
    const GridShape s(4, 5);
    const Stencil st(NeighborhoodSpec::square(3));
    NodeFeatures z(s.size(), 2, 0.0);
    for (NodeId i = 0; i < s.size(); ++i) {
        z(i, 0) = 1.5;
        z(i, 1) = -2.0;
    }
    const auto out = diffusion_step(z, uniform_diffusivity(s, st), 0.7);
    for (std::size_t k = 0; k < out.size(); ++k) EXPECT_NEAR(out.values()[k], z.values()[k], 1e-15);
}

TEST(DiffusionStep, TauZeroIsIdentity) {
    const GridShape s(3, 3);
    const Stencil st(NeighborhoodSpec::square(3));
    NodeFeatures z(s.size(), 1);
    for (std::size_t k = 0; k < z.size(); ++k) z.values()[k] = static_cast<double>(k * k);
    EXPECT_EQ(diffusion_step(z, uniform_diffusivity(s, st), 0.0), z);
}

TEST(DiffusionStep, OneByThreeHandEvaluation) {
    const GridShape s(1, 3);
    const Stencil st(NeighborhoodSpec::square(3));
    NodeFeatures z(3, 1, std::vector<double>{0.0, 3.0, 0.0});
    const auto out = diffusion_step(z, uniform_diffusivity(s, st), 1.0);
    EXPECT_DOUBLE_EQ(out(0, 0), 3.0);
    EXPECT_DOUBLE_EQ(out(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(out(2, 0), 3.0);
}

TEST(DiffusionStep, NegativeDiffusivityRejected) {
    const GridShape s(1, 3);
    const Stencil st(NeighborhoodSpec::square(3));
    EdgeMap d = uniform_diffusivity(s, st);
    d.at(1, 3) = -0.5;
    EXPECT_THROW(diffusion_step(NodeFeatures(3, 1, 1.0), d, 0.5), std::invalid_argument);
}

TEST(GtDisplacement, SinglePixelInstanceStays) {
    LabelMap l(GridShape(7, 7), 0);
    l(3, 3) = 4;
    const auto f = gt_displacement(l);
    EXPECT_EQ(f(3, 3), (Vec2{0.0, 0.0}));
}

TEST(GtDisplacement, CentredSquareCentreStays) {
    constexpr int r = 5;
    LabelMap l(GridShape(15, 15), 0);
    for (int y = 2; y < 2 + 2 * r + 1; ++y)
        for (int x = 2; x < 2 + 2 * r + 1; ++x) l(y, x) = 1;
    const auto f = gt_displacement(l, {r, 96});
    EXPECT_NEAR(f(2 + r, 2 + r).row, 0.0, 1e-12);
    EXPECT_NEAR(f(2 + r, 2 + r).col, 0.0, 1e-12);
}

TEST(GtDisplacement, AdherentSquaresMatchFrozenOracle) {
    const LabelMap l = two_adherent_squares();
    const auto f = gt_displacement(l, {5, 96});
    // Reference values from an independent numpy evaluation of the update.
    EXPECT_NEAR(f(5, 9).row, 0.0, 1e-9);
    EXPECT_NEAR(f(5, 9).col, -4.0, 1e-9);
    EXPECT_NEAR(f(1, 1).row, 4.0, 1e-9);
    EXPECT_NEAR(f(1, 1).col, 4.0, 1e-9);
    EXPECT_NEAR(f(5, 10).col, 4.0, 1e-9);
    EXPECT_NEAR(f(9, 18).row, -4.0, 1e-9);
    EXPECT_NEAR(f(9, 18).col, -4.0, 1e-9);
    EXPECT_LE(max_abs_diff(f, oracle::naive_gt_displacement(l, 5, 96)), 1e-9);
}

TEST(GtDisplacement, AdherentBoundaryPointsInward) {
    const LabelMap l = two_adherent_squares();
    const auto f = gt_displacement(l, {5, 96});
    const Vec2 centre[3] = {{}, {5.0, 5.0}, {5.0, 14.0}};
    for (int r = 1; r <= 9; ++r)
        for (int c : {9, 10}) {
            const Vec2& ctr = centre[l(r, c)];
            const double before = std::hypot(r - ctr.row, c - ctr.col);
            const double after = std::hypot(r + f(r, c).row - ctr.row, c + f(r, c).col - ctr.col);
            EXPECT_LT(after, before);
            // moves away from the shared edge
            EXPECT_EQ(f(r, c).col < 0, l(r, c) == 1);
        }
    EnergyMap e(l.shape, 0.0);
    for (NodeId i = 0; i < l.size(); ++i) e[i] = l[i] != 0 ? 1.0 : 0.0;
    const auto ins = gcm(f, e);
    EXPECT_TRUE(oracle::same_partition(ins, l));
}

TEST(GtDisplacement, BackgroundIsZero) {
    const LabelMap l = synth("random-voronoi", GridShape(32, 32), 3);
    const auto f = gt_displacement(l, {3, 10});
    for (NodeId i = 0; i < l.size(); ++i)
        if (l[i] == 0) {
            EXPECT_EQ(f[i], (Vec2{}));
        }
}

TEST(GtDisplacement, RejectsBadParameters) {
    const LabelMap l(GridShape(3, 3), 1);
    EXPECT_THROW(gt_displacement(l, {0, 4}), std::invalid_argument);
    EXPECT_THROW(gt_displacement(l, {2, -1}), std::invalid_argument);
    EXPECT_NO_THROW(gt_displacement(l, {2, 0}));
}

TEST(GtDisplacement, MatchesNaiveOracleOnRandomMaps) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 4; ++trial) {
        const GridShape s(8 + static_cast<int>(rng() % 10), 8 + static_cast<int>(rng() % 10));
        const auto l = oracle::random_rectangles(s, rng, 4);
        const int radius = trial % 2 == 0 ? 2 : 3;
        EXPECT_LE(max_abs_diff(gt_displacement(l, {radius, 12}), oracle::naive_gt_displacement(l, radius, 12)),
                  1e-9);
    }
}

TEST(GtDisplacement, LabelPermutationInvariant) {
    const LabelMap l = synth("random-voronoi", GridShape(32, 32), 11);
    LabelMap p = l;
    for (auto& v : p.data)
        if (v != 0) v = 1000 - v;
    EXPECT_EQ(gt_displacement(l, {5, 20}), gt_displacement(p, {5, 20}));
}

TEST(GtDisplacement, RotationEquivariant) {
    const LabelMap l = synth("concave-horseshoe", GridShape(24, 30), 0);
    // 90 degrees counter-clockwise: (r, c) -> (W-1-c, r)
    const GridShape rs(l.shape.w, l.shape.h);
    LabelMap rot(rs, 0);
    for (int r = 0; r < l.shape.h; ++r)
        for (int c = 0; c < l.shape.w; ++c) rot(l.shape.w - 1 - c, r) = l(r, c);
    const auto f = gt_displacement(l, {5, 30});
    const auto g = gt_displacement(rot, {5, 30});
    for (int r = 0; r < l.shape.h; ++r)
        for (int c = 0; c < l.shape.w; ++c) {
            const Vec2 v = f(r, c);
            const Vec2 w = g(l.shape.w - 1 - c, r);
            EXPECT_NEAR(w.row, -v.col, 1e-9);
            EXPECT_NEAR(w.col, v.row, 1e-9);
        }
}

TEST(GtDisplacement, InstanceHullContracts) {
    // Each update is a convex combination within the instance, so the
    // per-axis extent of the displaced positions cannot grow.
    for (const char* name : {"two-blobs-adherent", "concave-horseshoe", "random-voronoi"}) {
        const LabelMap l = synth(name, GridShape(32, 32), 2);
        auto extent = [&](const DisplacementField& f) {
            std::map<Label, std::array<double, 4>> box;
            for (int r = 0; r < 32; ++r)
                for (int c = 0; c < 32; ++c)
                    if (const Label id = l(r, c)) {
                        const double y = r + f(r, c).row, x = c + f(r, c).col;
                        auto [it, fresh] = box.try_emplace(id, std::array<double, 4>{y, y, x, x});
                        auto& b = it->second;
                        b = {std::min(b[0], y), std::max(b[1], y), std::min(b[2], x), std::max(b[3], x)};
                    }
            return box;
        };
        auto prev = extent(gt_displacement(l, {5, 0}));
        for (int t = 1; t <= 24; ++t) {
            const auto cur = extent(gt_displacement(l, {5, t}));
            for (const auto& [id, b] : cur) {
                const auto& p = prev[id];
                EXPECT_LE(b[1] - b[0], p[1] - p[0] + 1e-12) << name << " t=" << t << " id=" << id;
                EXPECT_LE(b[3] - b[2], p[3] - p[2] + 1e-12) << name << " t=" << t << " id=" << id;
                EXPECT_GE(b[0], p[0] - 1e-12);
                EXPECT_LE(b[1], p[1] + 1e-12);
            }
            prev = cur;
        }
    }
}

TEST(GtDisplacement, MeanSpreadShrinksOverall) {
    for (const char* name : {"two-blobs-adherent", "concave-horseshoe", "random-voronoi"}) {
        const LabelMap l = synth(name, GridShape(32, 32), 2);
        std::map<Label, Vec2> centroid;
        std::map<Label, double> count;
        for (int r = 0; r < 32; ++r)
            for (int c = 0; c < 32; ++c)
                if (const Label id = l(r, c)) {
                    centroid[id].row += r;
                    centroid[id].col += c;
                    count[id] += 1;
                }
        for (auto& [id, v] : centroid) {
            v.row /= count[id];
            v.col /= count[id];
        }
        auto spread = [&](const DisplacementField& f) {
            std::map<Label, double> s;
            for (int r = 0; r < 32; ++r)
                for (int c = 0; c < 32; ++c)
                    if (const Label id = l(r, c))
                        s[id] += std::hypot(r + f(r, c).row - centroid[id].row,
                                            c + f(r, c).col - centroid[id].col) / count[id];
            return s;
        };
        const auto before = spread(gt_displacement(l, {5, 0}));
        const auto after = spread(gt_displacement(l, {5, 96}));
        for (const auto& [id, v] : after)
            if (count[id] > 1) {
                EXPECT_LT(v, before.at(id)) << name << " id=" << id;
            }
    }
}
