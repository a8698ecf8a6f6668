#pragma once

// Test-only reference implementations. Each one is written straight from the
// defining formula with plain loops and shares no code path with the library
// beyond its data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "dfget/displacement.hpp"
#include "dfget/gcm.hpp"
#include "dfget/getconv.hpp"

namespace oracle {

using namespace dfget;

// Coordinate averaging over same-label disk neighbors, evaluated by scanning
// every pixel pair of the grid.
inline DisplacementField naive_gt_displacement(const LabelMap& labels, int radius, int iters) {
    const int h = labels.shape.h, w = labels.shape.w;
    std::vector<double> r0(labels.size()), c0(labels.size());
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            r0[r * w + c] = r;
            c0[r * w + c] = c;
        }
    std::vector<double> rr = r0, cc = c0;
    for (int t = 0; t < iters; ++t) {
        std::vector<double> nr = rr, nc = cc;
        for (int i = 0; i < h * w; ++i) {
            if (labels.data[i] == 0) continue;
            double sr = 0, sc = 0, cnt = 0;
            for (int j = 0; j < h * w; ++j) {
                if (j == i) continue;
                const int dr = j / w - i / w, dc = j % w - i % w;
                if (dr * dr + dc * dc > radius * radius) continue;
                if (labels.data[j] != labels.data[i]) continue;
                sr += rr[j];
                sc += cc[j];
                cnt += 1;
            }
            if (cnt > 0) {
                nr[i] = sr / cnt;
                nc[i] = sc / cnt;
            }
        }
        rr.swap(nr);
        cc.swap(nc);
    }
    DisplacementField f(labels.shape);
    for (int i = 0; i < h * w; ++i)
        if (labels.data[i] != 0) f.data[i] = {rr[i] - r0[i], cc[i] - c0[i]};
    return f;
}

// Union-find 8-connected labelling; ids renumbered by first raster pixel.
inline InstanceMap union_find_components(const std::vector<double>& support, int h, int w) {
    std::vector<int> parent(support.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (support[r * w + c] == 0) continue;
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    const int y = r + dr, x = c + dc;
                    if (y < 0 || y >= h || x < 0 || x >= w || support[y * w + x] == 0) continue;
                    parent[find(r * w + c)] = find(y * w + x);
                }
        }
    InstanceMap out(GridShape(h, w), 0);
    std::map<int, Label> ids;
    for (int i = 0; i < h * w; ++i) {
        if (support[i] == 0) continue;
        auto [it, fresh] = ids.emplace(find(i), static_cast<Label>(ids.size() + 1));
        out.data[i] = it->second;
    }
    return out;
}

// True when a and b induce the same partition with the same background.
inline bool same_partition(const Grid<Label>& a, const Grid<Label>& b) {
    if (a.size() != b.size()) return false;
    std::map<Label, Label> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a.data[i] == 0) != (b.data[i] == 0)) return false;
        if (a.data[i] == 0) continue;
        if (ab.emplace(a.data[i], b.data[i]).first->second != b.data[i]) return false;
        if (ba.emplace(b.data[i], a.data[i]).first->second != a.data[i]) return false;
    }
    return true;
}

// Dense N x N diffusivity matrix from pixel-pair enumeration: S[i][j] is the
// weight of j in i's aggregate, zero for non-neighbors.
inline std::vector<std::vector<double>> dense_diffusivity(const Matrix<double>& h, const GridShape& shape,
                                                          const std::vector<Offset>& offsets,
                                                          const Grid<Label>* clusters = nullptr) {
    const std::size_t n = shape.size();
    std::vector<std::vector<double>> s(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const int dr = static_cast<int>(j) / shape.w - static_cast<int>(i) / shape.w;
            const int dc = static_cast<int>(j) % shape.w - static_cast<int>(i) % shape.w;
            int cj = -1, ci = -1;
            for (std::size_t k = 0; k < offsets.size(); ++k) {
                if (offsets[k].dr == dr && offsets[k].dc == dc) cj = static_cast<int>(k);
                if (offsets[k].dr == -dr && offsets[k].dc == -dc) ci = static_cast<int>(k);
            }
            if (cj < 0) continue;
            if (clusters && clusters->data[i] != clusters->data[j]) continue;
            s[i][j] = std::exp(std::min(h(i, cj) + h(j, ci), 30.0));
        }
    return s;
}

inline Matrix<double> dense_mlp(const Matrix<double>& z, const MlpParams& p) {
    Matrix<double> out(z.rows(), p.w2.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        std::vector<double> hid(p.w1.rows());
        for (std::size_t k = 0; k < hid.size(); ++k) {
            double a = p.b1[k];
            for (std::size_t c = 0; c < z.cols(); ++c) a += p.w1(k, c) * z(i, c);
            hid[k] = std::max(a, 0.0);
        }
        for (std::size_t q = 0; q < p.w2.rows(); ++q) {
            double a = p.b2[q];
            for (std::size_t k = 0; k < hid.size(); ++k) a += p.w2(q, k) * hid[k];
            out(i, q) = a;
        }
    }
    return out;
}

inline Matrix<double> dense_batch_norm(Matrix<double> a, const NormParams& norm) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
        double mean = 0;
        for (std::size_t i = 0; i < a.rows(); ++i) mean += a(i, c);
        mean /= static_cast<double>(a.rows());
        double var = 0;
        for (std::size_t i = 0; i < a.rows(); ++i) var += (a(i, c) - mean) * (a(i, c) - mean);
        var /= static_cast<double>(a.rows());
        bool constant = true;
        for (std::size_t i = 0; i < a.rows(); ++i) constant = constant && a(i, c) == a(0, c);
        for (std::size_t i = 0; i < a.rows(); ++i) {
            const double x = constant ? 0.0 : (a(i, c) - mean) / std::sqrt(var + norm.eps);
            a(i, c) = norm.gamma[c] * x + norm.beta[c];
        }
    }
    return a;
}

// residual + BN(S y) with S from the perceptron over y.
inline Matrix<double> dense_transmit(const Matrix<double>& residual, const Matrix<double>& y,
                                     const GridShape& shape, const std::vector<Offset>& offsets,
                                     const LayerParams& p, const Grid<Label>* clusters = nullptr) {
    const auto s = dense_diffusivity(dense_mlp(y, p.mlp), shape, offsets, clusters);
    Matrix<double> a(y.rows(), y.cols(), 0.0);
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t j = 0; j < y.rows(); ++j)
            for (std::size_t c = 0; c < y.cols(); ++c) a(i, c) += s[i][j] * y(j, c);
    const Matrix<double> na = dense_batch_norm(a, p.norm);
    Matrix<double> out = residual;
    for (std::size_t k = 0; k < out.size(); ++k) out.values()[k] += na.values()[k];
    return out;
}

inline Matrix<double> dense_getblock(const Matrix<double>& z, const GridShape& shape,
                                     const std::vector<Offset>& offsets, const LayerParams& p) {
    const int k = p.kernel, half = k / 2;
    Matrix<double> dw(z.rows(), z.cols(), 0.0);
    for (int r = 0; r < shape.h; ++r)
        for (int c = 0; c < shape.w; ++c)
            for (std::size_t ch = 0; ch < z.cols(); ++ch) {
                double a = 0;
                for (int u = 0; u < k; ++u)
                    for (int v = 0; v < k; ++v) {
                        const int y = r + u - half, x = c + v - half;
                        if (y < 0 || y >= shape.h || x < 0 || x >= shape.w) continue;
                        a += p.dw(ch, static_cast<std::size_t>(u * k + v)) * z(static_cast<std::size_t>(y * shape.w + x), ch);
                    }
                dw(static_cast<std::size_t>(r * shape.w + c), ch) = a;
            }
    Matrix<double> pw(z.rows(), z.cols(), 0.0);
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t o = 0; o < z.cols(); ++o) {
            double a = p.pw_bias[o];
            for (std::size_t ch = 0; ch < z.cols(); ++ch) a += p.pw(o, ch) * dw(i, ch);
            pw(i, o) = a;
        }
    return dense_transmit(z, pw, shape, offsets, p);
}

inline Matrix<double> dense_isotropic(const Matrix<double>& z, const GridShape& shape,
                                      const std::vector<Offset>& offsets, const IsotropicParams& p) {
    const std::size_t n = z.rows();
    Matrix<double> a(n, z.cols(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double qi = p.bq;
        for (std::size_t c = 0; c < z.cols(); ++c) qi += p.wq[c] * z(i, c);
        for (std::size_t j = 0; j < n; ++j) {
            const int dr = static_cast<int>(j) / shape.w - static_cast<int>(i) / shape.w;
            const int dc = static_cast<int>(j) % shape.w - static_cast<int>(i) % shape.w;
            const bool adj = std::any_of(offsets.begin(), offsets.end(),
                                         [&](const Offset& o) { return o.dr == dr && o.dc == dc; });
            if (!adj) continue;
            double kj = p.bk;
            for (std::size_t c = 0; c < z.cols(); ++c) kj += p.wk[c] * z(j, c);
            const double s = std::exp(std::min(qi + kj, 30.0));
            for (std::size_t c = 0; c < z.cols(); ++c) a(i, c) += s * z(j, c);
        }
    }
    const Matrix<double> na = dense_batch_norm(a, p.norm);
    Matrix<double> out = z;
    for (std::size_t k = 0; k < out.size(); ++k) out.values()[k] += na.values()[k];
    return out;
}

// Object metrics evaluated pair by pair from pixel sets.
struct BruteMetrics {
    double f1, dice, hd;
};

inline BruteMetrics brute_metrics(const Grid<Label>& pred, const Grid<Label>& gt) {
    const int h = gt.shape.h, w = gt.shape.w;
    auto objects = [&](const Grid<Label>& m) {
        std::vector<Label> ids;  // raster order of first appearance
        for (Label v : m.data)
            if (v != 0 && std::find(ids.begin(), ids.end(), v) == ids.end()) ids.push_back(v);
        return ids;
    };
    auto pixels = [&](const Grid<Label>& m, Label id) {
        std::set<int> s;
        for (int i = 0; i < h * w; ++i)
            if (m.data[i] == id) s.insert(i);
        return s;
    };
    auto boundary = [&](const std::set<int>& s) {
        std::vector<std::pair<int, int>> b;
        for (int i : s) {
            const int r = i / w, c = i % w;
            const int nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
            bool edge = false;
            for (auto& q : nb)
                if (q[0] < 0 || q[0] >= h || q[1] < 0 || q[1] >= w || !s.count(q[0] * w + q[1])) edge = true;
            if (edge) b.push_back({r, c});
        }
        return b;
    };
    auto hd = [](const std::vector<std::pair<int, int>>& a, const std::vector<std::pair<int, int>>& b) {
        auto dir = [](const auto& x, const auto& y) {
            double worst = 0;
            for (auto& p : x) {
                double best = std::numeric_limits<double>::infinity();
                for (auto& q : y)
                    best = std::min(best, std::hypot(double(p.first - q.first), double(p.second - q.second)));
                worst = std::max(worst, best);
            }
            return worst;
        };
        return std::max(dir(a, b), dir(b, a));
    };
    auto inter = [](const std::set<int>& a, const std::set<int>& b) {
        std::size_t n = 0;
        for (int i : a) n += b.count(i);
        return n;
    };

    const auto gids = objects(gt), pids = objects(pred);
    std::vector<std::set<int>> G, P;
    for (Label id : gids) G.push_back(pixels(gt, id));
    for (Label id : pids) P.push_back(pixels(pred, id));
    if (G.empty() && P.empty()) return {1.0, 1.0, 0.0};

    std::vector<bool> claimed(G.size(), false);
    double tp = 0;
    for (std::size_t p = 0; p < P.size(); ++p)
        for (std::size_t g = 0; g < G.size(); ++g)
            if (!claimed[g] && inter(P[p], G[g]) * 2 > G[g].size()) {
                claimed[g] = true;
                tp += 1;
                break;
            }
    const double fp = double(P.size()) - tp, fn = double(G.size()) - tp;
    BruteMetrics m{2 * tp / (2 * tp + fp + fn), 0.0, 0.0};

    auto side = [&](const std::vector<std::set<int>>& X, const std::vector<std::set<int>>& Y, double& dsum,
                    double& hsum) {
        double total = 0;
        for (auto& x : X) total += double(x.size());
        for (auto& x : X) {
            const double wgt = double(x.size()) / total;
            std::size_t best = 0;
            int arg = -1;
            for (std::size_t k = 0; k < Y.size(); ++k) {
                const std::size_t in = inter(x, Y[k]);
                if (in > best) {
                    best = in;
                    arg = static_cast<int>(k);
                }
            }
            if (arg >= 0) {
                dsum += wgt * 2.0 * double(best) / double(x.size() + Y[arg].size());
                hsum += wgt * hd(boundary(x), boundary(Y[arg]));
            } else if (!Y.empty()) {
                double near = std::numeric_limits<double>::infinity();
                for (auto& y : Y) near = std::min(near, hd(boundary(x), boundary(y)));
                hsum += wgt * near;
            }
        }
    };
    double dg = 0, hg = 0, dp = 0, hp = 0;
    side(G, P, dg, hg);
    side(P, G, dp, hp);
    m.dice = 0.5 * (dg + dp);
    m.hd = (G.empty() || P.empty()) ? std::hypot(double(h), double(w)) : 0.5 * (hg + hp);
    return m;
}

// Random instance map: k axis-aligned rectangles painted in order over background.
inline Grid<Label> random_rectangles(GridShape shape, std::mt19937_64& rng, int k) {
    Grid<Label> m(shape, 0);
    for (int n = 1; n <= k; ++n) {
        const int r0 = static_cast<int>(rng() % shape.h), c0 = static_cast<int>(rng() % shape.w);
        const int hh = 1 + static_cast<int>(rng() % (shape.h / 3 + 1));
        const int ww = 1 + static_cast<int>(rng() % (shape.w / 3 + 1));
        for (int r = r0; r < std::min(shape.h, r0 + hh); ++r)
            for (int c = c0; c < std::min(shape.w, c0 + ww); ++c) m(r, c) = static_cast<Label>(n);
    }
    return m;
}

}  // namespace oracle
