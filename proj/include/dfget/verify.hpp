#pragma once

// Verification harnesses for the transmitter layers: an isomorphism probe that
// contrasts anisotropic and isotropic aggregation on spatially permuted but
// multiset-identical neighborhoods, and a forward-mode vs central-difference
// Jacobian check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dfget/getconv.hpp"

namespace dfget {

struct ProbeReport {
    double anisotropic_gap = 0.0;
    double isotropic_gap = 0.0;
};

struct ProbeOptions {
    std::size_t channels = 4;
    bool identical_swap = false;  // place the same vector on both sides
};

/// Two interior nodes A and B of a 5x9 grid, 3x3 stencil. All features equal a
/// base vector except A's left/right neighbors (u, v) and B's left/right
/// neighbors (v, u). Returns the max-abs output difference between A and B for
/// each layer under seeded random parameters.
inline ProbeReport isomorphism_probe(std::uint64_t seed, ProbeOptions opt = {}) {
    const GridShape shape(5, 9);
    const Stencil stencil(NeighborhoodSpec::square(3));
    const std::size_t c = opt.channels;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);

    std::vector<double> base(c), u(c), v(c);
    for (auto& x : base) x = g(rng);
    for (auto& x : u) x = g(rng);
    for (auto& x : v) x = g(rng);
    if (opt.identical_swap) v = u;

    Matrix<double> z(shape.size(), c);
    for (NodeId i = 0; i < shape.size(); ++i) std::copy(base.begin(), base.end(), z.row(i).begin());
    auto put = [&](int r, int col, const std::vector<double>& x) {
        std::copy(x.begin(), x.end(), z.row(nid({r, col}, shape)).begin());
    };
    const Pixel a{2, 2};
    const Pixel b{2, 6};
    put(a.row, a.col - 1, u);
    put(a.row, a.col + 1, v);
    put(b.row, b.col - 1, v);
    put(b.row, b.col + 1, u);

    auto gap = [&](const Matrix<double>& out) {
        const auto ra = out.row(nid(a, shape));
        const auto rb = out.row(nid(b, shape));
        double m = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) m = std::max(m, std::abs(ra[ch] - rb[ch]));
        return m;
    };

    const auto layer = LayerParams::random(c, static_cast<std::size_t>(stencil.size()), 3, seed);
    const auto iso = IsotropicParams::random(c, seed);
    ProbeReport rep;
    rep.anisotropic_gap = gap(getconv_forward(z, shape, stencil, layer));
    rep.isotropic_gap = gap(isotropic_attention_forward(z, shape, stencil, iso));
    return rep;
}

enum class CheckedOp { diffusivity, getconv, getblock, isotropic };

inline std::string to_string(CheckedOp op) {
    switch (op) {
    case CheckedOp::diffusivity: return "diffusivity";
    case CheckedOp::getconv: return "getconv";
    case CheckedOp::getblock: return "getblock";
    case CheckedOp::isotropic: return "isotropic";
    }
    return "?";
}

inline std::optional<CheckedOp> parse_checked_op(const std::string& s) {
    for (CheckedOp op : {CheckedOp::diffusivity, CheckedOp::getconv, CheckedOp::getblock, CheckedOp::isotropic})
        if (to_string(op) == s) return op;
    return std::nullopt;
}

/// Evaluation point for a Jacobian check. For diffusivity the input is the
/// N x n query matrix; for the layers it is the N x C feature matrix.
struct JacobianPoint {
    GridShape shape{4, 4};
    NeighborhoodSpec spec = NeighborhoodSpec::square(3);
    Matrix<double> input;
    Matrix<double> direction;
    LayerParams layer;
    IsotropicParams iso;
};

inline JacobianPoint random_jacobian_point(CheckedOp op, std::uint64_t seed, GridShape shape = {4, 4},
                                           std::size_t channels = 4,
                                           NeighborhoodSpec spec = NeighborhoodSpec::square(3)) {
    JacobianPoint pt;
    pt.shape = shape;
    pt.spec = spec;
    const Stencil stencil(spec);
    const auto n = static_cast<std::size_t>(stencil.size());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::size_t cols = op == CheckedOp::diffusivity ? n : channels;
    pt.input = Matrix<double>(shape.size(), cols);
    pt.direction = Matrix<double>(shape.size(), cols);
    for (auto& x : pt.input.values()) x = g(rng);
    for (auto& x : pt.direction.values()) x = g(rng);
    pt.layer = LayerParams::random(channels, n, 3, seed ^ 0x9e3779b97f4a7c15ULL);
    pt.iso = IsotropicParams::random(channels, seed ^ 0x9e3779b97f4a7c15ULL);
    return pt;
}

struct JacobianReport {
    CheckedOp op = CheckedOp::getconv;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool finite = true;
    bool passed = false;
    std::string diagnostic;
};

namespace detail {

template <class T>
std::vector<T> evaluate_checked(CheckedOp op, const Matrix<T>& x, const JacobianPoint& pt) {
    const Stencil stencil(pt.spec);
    switch (op) {
    case CheckedOp::diffusivity: {
        const EdgeField<T> s = diffusivity(x, pt.shape, stencil);
        std::vector<T> out;
        for (NodeId i = 0; i < pt.shape.size(); ++i)
            for_each_neighbor(i, stencil, pt.shape, [&](int c, NodeId) { out.push_back(s.at(i, c)); });
        return out;
    }
    case CheckedOp::getconv:
        return getconv_forward(x, pt.shape, stencil, pt.layer).values();
    case CheckedOp::getblock:
        return getblock_forward(x, pt.shape, stencil, pt.layer).values();
    case CheckedOp::isotropic:
        return isotropic_attention_forward(x, pt.shape, stencil, pt.iso).values();
    }
    return {};
}

}  // namespace detail

/// Compares the forward-mode directional derivative of `op` at pt.input along
/// pt.direction with a central difference of the double-precision forward.
/// Error is normwise: max|jvp - fd| / max(max|jvp|, max|fd|), 0 when both vanish.
inline JacobianReport jacobian_check(CheckedOp op, const JacobianPoint& pt, double tolerance = 1e-4,
                                     double step = 1e-5) {
    JacobianReport rep;
    rep.op = op;
    rep.tolerance = tolerance;

    const auto jvp = detail::evaluate_checked(op, lift(pt.input, pt.direction), pt);

    Matrix<double> plus = pt.input;
    Matrix<double> minus = pt.input;
    for (std::size_t k = 0; k < plus.size(); ++k) {
        plus.values()[k] += step * pt.direction.values()[k];
        minus.values()[k] -= step * pt.direction.values()[k];
    }
    const auto fp = detail::evaluate_checked(op, plus, pt);
    const auto fm = detail::evaluate_checked(op, minus, pt);

    double diff = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < jvp.size(); ++k) {
        const double fd = (fp[k] - fm[k]) / (2.0 * step);
        if (!is_finite(jvp[k]) || !std::isfinite(fd)) {
            rep.finite = false;
            rep.diagnostic = "non-finite value at output " + std::to_string(k);
            return rep;
        }
        diff = std::max(diff, std::abs(jvp[k].d - fd));
        scale = std::max({scale, std::abs(jvp[k].d), std::abs(fd)});
    }
    rep.max_rel_error = scale > 0.0 ? diff / scale : 0.0;
    rep.passed = rep.max_rel_error < tolerance;
    if (!rep.passed) rep.diagnostic = "relative error above tolerance";
    return rep;
}

}  // namespace dfget
