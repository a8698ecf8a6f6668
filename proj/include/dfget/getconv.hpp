#pragma once

// Anisotropic graph energy transmitter layer on a pixel grid.
//
// A two-layer perceptron maps every node's features to one query per stencil
// position. The diffusivity of the edge between i and its neighbor j combines
// the query i addresses to j's stencil slot with the query j addresses back to
// i's slot, so the weight depends on where a neighbor sits and not only on
// which features it carries:
//
//     s_ij = exp(min(H[i, c_j] + H[j, c_i], 30))
//     z_i' = z_i + Norm(sum_j s_ij z_j)
//
// Everything is templated on the scalar so Dual instantiations give exact
// directional derivatives.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfget/gcm.hpp"
#include "dfget/grid_graph.hpp"
#include "dfget/tensor.hpp"

namespace dfget {

inline constexpr double kExponentClamp = 30.0;

struct MlpParams {
    Matrix<double> w1;       // hidden x C
    std::vector<double> b1;  // hidden
    Matrix<double> w2;       // n x hidden
    std::vector<double> b2;  // n
};

struct NormParams {
    std::vector<double> gamma;
    std::vector<double> beta;
    double eps = 1e-5;
};

struct LayerParams {
    MlpParams mlp;
    NormParams norm;
    int kernel = 3;
    Matrix<double> dw;            // C x (kernel * kernel), raster order
    Matrix<double> pw;            // C_out x C_in
    std::vector<double> pw_bias;  // C_out

    std::size_t channels() const { return mlp.w1.cols(); }
    std::size_t queries() const { return mlp.w2.rows(); }

    /// Shape consistency for C channels and n stencil positions.
    void validate(std::size_t c, std::size_t n) const {
        auto need = [](bool ok, const char* what) {
            if (!ok) throw std::invalid_argument(std::string("layer parameter shape mismatch: ") + what);
        };
        need(mlp.w1.rows() == c && mlp.w1.cols() == c, "mlp.w1 must be C x C");
        need(mlp.b1.size() == c, "mlp.b1 must have C entries");
        need(mlp.w2.rows() == n && mlp.w2.cols() == c, "mlp.w2 must be n x C");
        need(mlp.b2.size() == n, "mlp.b2 must have n entries");
        need(norm.gamma.size() == c && norm.beta.size() == c, "norm scale/shift must have C entries");
        need(kernel >= 1 && kernel % 2 == 1, "kernel must be odd");
        need(dw.rows() == c && dw.cols() == static_cast<std::size_t>(kernel * kernel),
             "dwconv must be C x k*k");
        need(pw.rows() == c && pw.cols() == c, "pwconv must be C x C");
        need(pw_bias.size() == c, "pwconv bias must have C entries");
    }

    /// Zero perceptron, unit norm scale, identity convolutions.
    static LayerParams neutral(std::size_t c, std::size_t n, int kernel = 3) {
        LayerParams p;
        p.mlp = {Matrix<double>(c, c), std::vector<double>(c), Matrix<double>(n, c), std::vector<double>(n)};
        p.norm = {std::vector<double>(c, 1.0), std::vector<double>(c, 0.0), 1e-5};
        p.kernel = kernel;
        p.dw = Matrix<double>(c, static_cast<std::size_t>(kernel * kernel));
        const std::size_t centre = static_cast<std::size_t>((kernel * kernel) / 2);
        for (std::size_t ch = 0; ch < c; ++ch) p.dw(ch, centre) = 1.0;
        p.pw = Matrix<double>(c, c);
        for (std::size_t ch = 0; ch < c; ++ch) p.pw(ch, ch) = 1.0;
        p.pw_bias.assign(c, 0.0);
        return p;
    }

    /// Gaussian weights with standard deviation `scale`, seeded.
    static LayerParams random(std::size_t c, std::size_t n, int kernel, std::uint64_t seed,
                              double scale = 0.3) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, scale);
        auto fill = [&](std::vector<double>& v) { for (auto& x : v) x = g(rng); };
        LayerParams p = neutral(c, n, kernel);
        fill(p.mlp.w1.values());
        fill(p.mlp.b1);
        fill(p.mlp.w2.values());
        fill(p.mlp.b2);
        for (auto& x : p.norm.gamma) x = 1.0 + g(rng);
        fill(p.norm.beta);
        fill(p.dw.values());
        fill(p.pw.values());
        fill(p.pw_bias);
        return p;
    }
};

enum class NormMode {
    batch,        // statistics over all nodes of the current input
    per_cluster,  // statistics over the nodes of each cluster separately
    frozen,       // caller-supplied statistics
    none,         // no normalization, no scale/shift
};

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> var;
};

struct NormOptions {
    NormMode mode = NormMode::batch;
    std::optional<ChannelStats> frozen;
};

/// Row-wise perceptron: H = relu(Z W1^T + b1) W2^T + b2.
template <class T>
Matrix<T> query_messages(const Matrix<T>& z, const MlpParams& mlp) {
    const std::size_t c = z.cols();
    const std::size_t hidden = mlp.w1.rows();
    const std::size_t n = mlp.w2.rows();
    if (mlp.w1.cols() != c || mlp.b1.size() != hidden || mlp.w2.cols() != hidden || mlp.b2.size() != n)
        throw std::invalid_argument("perceptron shapes do not match " + std::to_string(c) +
                                    "-channel features");
    Matrix<T> h(z.rows(), n);
    std::vector<T> mid(hidden);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const auto zi = z.row(i);
        for (std::size_t k = 0; k < hidden; ++k) {
            T acc(mlp.b1[k]);
            for (std::size_t ch = 0; ch < c; ++ch) acc += T(mlp.w1(k, ch)) * zi[ch];
            mid[k] = relu(acc);
        }
        auto hi = h.row(i);
        for (std::size_t q = 0; q < n; ++q) {
            T acc(mlp.b2[q]);
            for (std::size_t k = 0; k < hidden; ++k) acc += T(mlp.w2(q, k)) * mid[k];
            hi[q] = acc;
        }
    }
    return h;
}

/// s(i, c) for every in-grid stencil slot; slots outside the grid stay 0.
template <class T>
EdgeField<T> diffusivity(const Matrix<T>& h, const GridShape& shape, const Stencil& stencil) {
    if (h.rows() != shape.size() || h.cols() != static_cast<std::size_t>(stencil.size()))
        throw std::invalid_argument("query messages must be N x n (" + std::to_string(shape.size()) +
                                    " x " + std::to_string(stencil.size()) + ")");
    using std::exp;
    EdgeField<T> s(shape, stencil, T(0.0));
    for (NodeId i = 0; i < shape.size(); ++i)
        for_each_neighbor(i, stencil, shape, [&](int c, NodeId j) {
            const int back = stencil.opposite(c);
            s.at(i, c) = exp(clamp_above(h(i, static_cast<std::size_t>(c)) +
                                             h(j, static_cast<std::size_t>(back)),
                                         kExponentClamp));
        });
    return s;
}

/// a_i = sum_c s(i, c) y_{neighbor c}; zero-weight edges are skipped.
template <class T>
Matrix<T> aggregate(const Matrix<T>& y, const EdgeField<T>& s) {
    const GridShape& shape = s.shape();
    if (y.rows() != shape.size())
        throw std::invalid_argument("feature rows do not match node count");
    Matrix<T> a(y.rows(), y.cols(), T(0.0));
    for (NodeId i = 0; i < shape.size(); ++i) {
        auto ai = a.row(i);
        for_each_neighbor(i, s.stencil(), shape, [&](int c, NodeId j) {
            const T& w = s.at(i, c);
            if (value_of(w) == 0.0) return;
            const auto yj = y.row(j);
            for (std::size_t ch = 0; ch < ai.size(); ++ch) ai[ch] += w * yj[ch];
        });
    }
    return a;
}

namespace detail {

// Standardizes a[members, ch] in place; a channel whose values are all equal
// maps to 0.
template <class T>
void standardize(Matrix<T>& a, const std::vector<NodeId>& members, std::size_t ch, double eps) {
    const double first = value_of(a(members.front(), ch));
    const bool constant = std::all_of(members.begin(), members.end(),
                                      [&](NodeId i) { return value_of(a(i, ch)) == first; });
    if (constant) {
        for (NodeId i : members) a(i, ch) = T(0.0);
        return;
    }
    using std::sqrt;
    const double count = static_cast<double>(members.size());
    T mean(0.0);
    for (NodeId i : members) mean += a(i, ch);
    mean = mean / T(count);
    T var(0.0);
    for (NodeId i : members) {
        const T d = a(i, ch) - mean;
        var += d * d;
    }
    var = var / T(count);
    const T denom = sqrt(var + T(eps));
    for (NodeId i : members) a(i, ch) = (a(i, ch) - mean) / denom;
}

}  // namespace detail

/// Per-channel normalization followed by scale and shift.
template <class T>
Matrix<T> normalize(Matrix<T> a, const NormParams& norm, const NormOptions& opt,
                    const InstanceMap* clusters = nullptr) {
    const std::size_t n = a.rows();
    const std::size_t c = a.cols();
    if (opt.mode == NormMode::none) return a;
    if (norm.gamma.size() != c || norm.beta.size() != c)
        throw std::invalid_argument("norm scale/shift size does not match channel count");

    switch (opt.mode) {
    case NormMode::batch: {
        if (n < 2)
            throw std::invalid_argument("batch normalization needs at least 2 nodes, got " +
                                        std::to_string(n));
        std::vector<NodeId> all(n);
        for (NodeId i = 0; i < n; ++i) all[i] = i;
        for (std::size_t ch = 0; ch < c; ++ch) detail::standardize(a, all, ch, norm.eps);
        break;
    }
    case NormMode::per_cluster: {
        if (clusters == nullptr || clusters->size() != n)
            throw std::invalid_argument("per-cluster normalization needs a cluster map over all nodes");
        std::vector<std::vector<NodeId>> groups;
        std::map<Label, std::size_t> slot;
        for (NodeId i = 0; i < n; ++i) {
            auto [it, fresh] = slot.emplace((*clusters)[i], groups.size());
            if (fresh) groups.emplace_back();
            groups[it->second].push_back(i);
        }
        for (const auto& g : groups)
            for (std::size_t ch = 0; ch < c; ++ch) detail::standardize(a, g, ch, norm.eps);
        break;
    }
    case NormMode::frozen: {
        if (!opt.frozen || opt.frozen->mean.size() != c || opt.frozen->var.size() != c)
            throw std::invalid_argument("frozen normalization needs per-channel mean and variance");
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double denom = std::sqrt(opt.frozen->var[ch] + norm.eps);
            for (NodeId i = 0; i < n; ++i) a(i, ch) = (a(i, ch) - T(opt.frozen->mean[ch])) / T(denom);
        }
        break;
    }
    case NormMode::none:
        break;
    }

    for (NodeId i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch)
            a(i, ch) = T(norm.gamma[ch]) * a(i, ch) + T(norm.beta[ch]);
    return a;
}

struct GetConvOptions {
    const InstanceMap* clusters = nullptr;  // restricts edges to intra-cluster pairs
    NormOptions norm;
};

/// Residual z plus the normalized anisotropic aggregate of `features`.
/// getconv_forward uses features == z; the block feeds convolved features.
template <class T>
Matrix<T> transmit(const Matrix<T>& residual, const Matrix<T>& features, const GridShape& shape,
                   const Stencil& stencil, const LayerParams& params, const GetConvOptions& opt = {}) {
    if (residual.rows() != shape.size() || features.rows() != shape.size())
        throw std::invalid_argument("features must have one row per grid node (" +
                                    std::to_string(shape.size()) + ")");
    if (residual.cols() != features.cols())
        throw std::invalid_argument("residual and features differ in channel count");
    EdgeField<T> s = diffusivity(query_messages(features, params.mlp), shape, stencil);
    if (opt.clusters != nullptr) s = mask_diffusivity(std::move(s), *opt.clusters);
    const Matrix<T> a = normalize(aggregate(features, s), params.norm, opt.norm, opt.clusters);
    Matrix<T> out = residual;
    for (std::size_t k = 0; k < out.size(); ++k) out.values()[k] += a.values()[k];
    return out;
}

template <class T>
Matrix<T> getconv_forward(const Matrix<T>& z, const GridShape& shape, const Stencil& stencil,
                          const LayerParams& params, const GetConvOptions& opt = {}) {
    return transmit(z, z, shape, stencil, params, opt);
}

/// Depthwise k x k convolution with zero padding, stride 1.
template <class T>
Matrix<T> depthwise_conv(const Matrix<T>& z, const GridShape& shape, const Matrix<double>& kernel, int k) {
    if (kernel.rows() != z.cols() || kernel.cols() != static_cast<std::size_t>(k * k))
        throw std::invalid_argument("depthwise kernel must be C x k*k");
    const int half = k / 2;
    Matrix<T> out(z.rows(), z.cols(), T(0.0));
    for (int r = 0; r < shape.h; ++r)
        for (int c = 0; c < shape.w; ++c) {
            auto o = out.row(nid({r, c}, shape));
            for (int dr = -half; dr <= half; ++dr)
                for (int dc = -half; dc <= half; ++dc) {
                    if (!shape.contains(r + dr, c + dc)) continue;
                    const auto src = z.row(nid({r + dr, c + dc}, shape));
                    const std::size_t tap = static_cast<std::size_t>((dr + half) * k + (dc + half));
                    for (std::size_t ch = 0; ch < o.size(); ++ch) {
                        const double w = kernel(ch, tap);
                        if (w != 0.0) o[ch] += T(w) * src[ch];
                    }
                }
        }
    return out;
}

/// y_i = W z_i + b.
template <class T>
Matrix<T> pointwise_conv(const Matrix<T>& z, const Matrix<double>& w, const std::vector<double>& bias) {
    if (w.cols() != z.cols() || bias.size() != w.rows())
        throw std::invalid_argument("pointwise kernel does not match channel count");
    Matrix<T> out(z.rows(), w.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const auto zi = z.row(i);
        auto oi = out.row(i);
        for (std::size_t o = 0; o < w.rows(); ++o) {
            T acc(bias[o]);
            for (std::size_t ch = 0; ch < zi.size(); ++ch) acc += T(w(o, ch)) * zi[ch];
            oi[o] = acc;
        }
    }
    return out;
}

/// Depthwise conv -> pointwise conv -> anisotropic transmit, with the block
/// input as the residual.
template <class T>
Matrix<T> getblock_forward(const Matrix<T>& z, const GridShape& shape, const Stencil& stencil,
                           const LayerParams& params, const GetConvOptions& opt = {}) {
    params.validate(z.cols(), static_cast<std::size_t>(stencil.size()));
    const Matrix<T> y = pointwise_conv(depthwise_conv(z, shape, params.dw, params.kernel), params.pw,
                                       params.pw_bias);
    return transmit(z, y, shape, stencil, params, opt);
}

// Isotropic baseline ---------------------------------------------------------

struct IsotropicParams {
    std::vector<double> wq;
    double bq = 0.0;
    std::vector<double> wk;
    double bk = 0.0;
    NormParams norm;

    static IsotropicParams random(std::size_t c, std::uint64_t seed, double scale = 0.3) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, scale);
        IsotropicParams p;
        p.wq.resize(c);
        p.wk.resize(c);
        for (auto& x : p.wq) x = g(rng);
        p.bq = g(rng);
        for (auto& x : p.wk) x = g(rng);
        p.bk = g(rng);
        p.norm.gamma.resize(c);
        p.norm.beta.resize(c);
        for (auto& x : p.norm.gamma) x = 1.0 + g(rng);
        for (auto& x : p.norm.beta) x = g(rng);
        return p;
    }
};

/// Attention-style layer whose edge weight exp(q_i + k_j) depends only on the
/// two nodes' features. Neighbor contributions are summed in ascending order
/// of value so the aggregate is exactly a function of the neighbor multiset.
template <class T>
Matrix<T> isotropic_attention_forward(const Matrix<T>& z, const GridShape& shape, const Stencil& stencil,
                                      const IsotropicParams& params, const NormOptions& norm = {}) {
    const std::size_t c = z.cols();
    if (z.rows() != shape.size() || params.wq.size() != c || params.wk.size() != c)
        throw std::invalid_argument("isotropic layer shapes do not match the input");
    using std::exp;
    std::vector<T> q(z.rows()), k(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        T qa(params.bq), ka(params.bk);
        for (std::size_t ch = 0; ch < c; ++ch) {
            qa += T(params.wq[ch]) * z(i, ch);
            ka += T(params.wk[ch]) * z(i, ch);
        }
        q[i] = qa;
        k[i] = ka;
    }
    Matrix<T> a(z.rows(), c, T(0.0));
    std::vector<T> terms;
    for (NodeId i = 0; i < shape.size(); ++i) {
        std::vector<NodeId> nbrs;
        for_each_neighbor(i, stencil, shape, [&](int, NodeId j) { nbrs.push_back(j); });
        for (std::size_t ch = 0; ch < c; ++ch) {
            terms.clear();
            for (NodeId j : nbrs) terms.push_back(exp(clamp_above(q[i] + k[j], kExponentClamp)) * z(j, ch));
            std::sort(terms.begin(), terms.end(),
                      [](const T& x, const T& y) { return value_of(x) < value_of(y); });
            T acc(0.0);
            for (const T& t : terms) acc += t;
            a(i, ch) = acc;
        }
    }
    const Matrix<T> na = normalize(std::move(a), params.norm, norm);
    Matrix<T> out = z;
    for (std::size_t idx = 0; idx < out.size(); ++idx) out.values()[idx] += na.values()[idx];
    return out;
}

}  // namespace dfget
