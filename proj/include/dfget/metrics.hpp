#pragma once

// Object-level segmentation metrics following the gland-challenge
// conventions: detection F1 with the 50% overlap rule, and area-weighted
// symmetric object Dice and object Hausdorff distance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dfget/gcm.hpp"

namespace dfget {

struct ObjectInfo {
    Label id = 0;
    std::size_t area = 0;
    NodeId first = 0;             // raster index of the first pixel
    std::vector<Pixel> boundary;  // pixels with a 4-neighbor outside the object
};

/// Objects of a map ordered by first pixel in raster order.
inline std::vector<ObjectInfo> collect_objects(const InstanceMap& map) {
    std::map<Label, std::size_t> slot;
    std::vector<ObjectInfo> objs;
    const GridShape& shape = map.shape;
    for (NodeId i = 0; i < map.size(); ++i) {
        const Label id = map[i];
        if (id == 0) continue;
        auto [it, fresh] = slot.emplace(id, objs.size());
        if (fresh) objs.push_back({id, 0, i, {}});
        ObjectInfo& o = objs[it->second];
        ++o.area;
        const Pixel p = pixel_of(i, shape);
        constexpr int dr[4] = {-1, 1, 0, 0};
        constexpr int dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
            const int r = p.row + dr[k];
            const int c = p.col + dc[k];
            if (!shape.contains(r, c) || map(r, c) != id) {
                o.boundary.push_back(p);
                break;
            }
        }
    }
    return objs;
}

inline double directed_hausdorff(const std::vector<Pixel>& a, const std::vector<Pixel>& b) {
    double worst = 0.0;
    for (const Pixel& p : a) {
        double best = std::numeric_limits<double>::infinity();
        for (const Pixel& q : b) {
            const double dr = p.row - q.row;
            const double dc = p.col - q.col;
            best = std::min(best, dr * dr + dc * dc);
            if (best <= worst) break;  // cannot raise the max
        }
        worst = std::max(worst, best);
    }
    return std::sqrt(worst);
}

inline double hausdorff(const std::vector<Pixel>& a, const std::vector<Pixel>& b) {
    return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

struct PairOverlap {
    Label gt = 0;
    Label pred = 0;
    std::size_t area = 0;
};

struct ObjectRecord {
    Label id = 0;
    std::size_t area = 0;
    std::optional<Label> detected_by;  // predicted object credited by the 50% rule
    std::optional<Label> counterpart;  // largest-overlap predicted object
    std::size_t overlap = 0;
    double dice = 0.0;
    double hausdorff = 0.0;
};

struct MatchReport {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::vector<ObjectRecord> gt_objects;
    std::vector<PairOverlap> overlaps;
};

struct MetricsReport {
    double obj_f1 = 1.0;
    double obj_dice = 1.0;
    double obj_hd = 0.0;
    MatchReport match;
};

namespace detail {

struct ObjectTable {
    std::vector<ObjectInfo> gt;
    std::vector<ObjectInfo> pred;
    // overlap[g][p], indexed by position in the object lists
    std::vector<std::vector<std::size_t>> overlap;

    ObjectTable(const InstanceMap& pred_map, const InstanceMap& gt_map)
        : gt(collect_objects(gt_map)), pred(collect_objects(pred_map)),
          overlap(gt.size(), std::vector<std::size_t>(pred.size(), 0)) {
        if (!(pred_map.shape == gt_map.shape))
            throw std::invalid_argument("prediction and ground truth differ in shape");
        std::map<Label, std::size_t> gi;
        std::map<Label, std::size_t> pi;
        for (std::size_t k = 0; k < gt.size(); ++k) gi[gt[k].id] = k;
        for (std::size_t k = 0; k < pred.size(); ++k) pi[pred[k].id] = k;
        for (NodeId i = 0; i < gt_map.size(); ++i)
            if (gt_map[i] != 0 && pred_map[i] != 0) ++overlap[gi[gt_map[i]]][pi[pred_map[i]]];
    }

    std::size_t inter(std::size_t g, std::size_t p) const { return overlap[g][p]; }
};

// Index of the counterpart with the largest overlap; ties go to the earliest
// object in raster order. nullopt when nothing overlaps.
template <class OverlapFn>
std::optional<std::size_t> best_overlap(std::size_t count, OverlapFn&& ov) {
    std::optional<std::size_t> best;
    std::size_t best_area = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t a = ov(k);
        if (a > best_area) {
            best_area = a;
            best = k;
        }
    }
    return best;
}

inline double dice(std::size_t inter, std::size_t a, std::size_t b) {
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

inline double total_area(const std::vector<ObjectInfo>& objs) {
    double s = 0.0;
    for (const auto& o : objs) s += static_cast<double>(o.area);
    return s;
}

}  // namespace detail

inline MetricsReport evaluate(const InstanceMap& pred, const InstanceMap& gt) {
    const detail::ObjectTable t(pred, gt);
    MetricsReport rep;
    MatchReport& m = rep.match;
    const std::size_t ng = t.gt.size();
    const std::size_t np = t.pred.size();

    for (std::size_t g = 0; g < ng; ++g)
        for (std::size_t p = 0; p < np; ++p)
            if (t.inter(g, p) > 0) m.overlaps.push_back({t.gt[g].id, t.pred[p].id, t.inter(g, p)});

    m.gt_objects.resize(ng);
    for (std::size_t g = 0; g < ng; ++g) {
        m.gt_objects[g].id = t.gt[g].id;
        m.gt_objects[g].area = t.gt[g].area;
    }

    // Detection: predictions in raster order, each claiming the first
    // unclaimed GT object it covers by more than half.
    std::vector<bool> claimed(ng, false);
    for (std::size_t p = 0; p < np; ++p) {
        for (std::size_t g = 0; g < ng; ++g) {
            if (claimed[g] || 2 * t.inter(g, p) <= t.gt[g].area) continue;
            claimed[g] = true;
            m.gt_objects[g].detected_by = t.pred[p].id;
            ++m.tp;
            break;
        }
    }
    m.fp = np - m.tp;
    m.fn = ng - m.tp;
    if (ng + np > 0)
        rep.obj_f1 = 2.0 * static_cast<double>(m.tp) /
                     static_cast<double>(2 * m.tp + m.fp + m.fn);

    if (ng == 0 && np == 0) return rep;

    // Shape terms. Dice against the largest-overlap counterpart (0 when none);
    // Hausdorff against the same counterpart, falling back to the counterpart
    // with the smallest Hausdorff distance.
    auto nearest_hd = [](const ObjectInfo& o, const std::vector<ObjectInfo>& others) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : others) best = std::min(best, hausdorff(o.boundary, q.boundary));
        return best;
    };

    const double diagonal = std::hypot(static_cast<double>(gt.shape.h), static_cast<double>(gt.shape.w));
    double gt_dice = 0.0, gt_hd = 0.0;
    const double gt_total = detail::total_area(t.gt);
    for (std::size_t g = 0; g < ng; ++g) {
        const double w = static_cast<double>(t.gt[g].area) / gt_total;
        ObjectRecord& rec = m.gt_objects[g];
        const auto p = detail::best_overlap(np, [&](std::size_t k) { return t.inter(g, k); });
        if (p) {
            rec.counterpart = t.pred[*p].id;
            rec.overlap = t.inter(g, *p);
            rec.dice = detail::dice(rec.overlap, t.gt[g].area, t.pred[*p].area);
            rec.hausdorff = hausdorff(t.gt[g].boundary, t.pred[*p].boundary);
        } else {
            rec.dice = 0.0;
            rec.hausdorff = np > 0 ? nearest_hd(t.gt[g], t.pred) : diagonal;
        }
        gt_dice += w * rec.dice;
        gt_hd += w * rec.hausdorff;
    }

    double pred_dice = 0.0, pred_hd = 0.0;
    const double pred_total = detail::total_area(t.pred);
    for (std::size_t p = 0; p < np; ++p) {
        const double w = static_cast<double>(t.pred[p].area) / pred_total;
        const auto g = detail::best_overlap(ng, [&](std::size_t k) { return t.inter(k, p); });
        if (g) {
            pred_dice += w * detail::dice(t.inter(*g, p), t.pred[p].area, t.gt[*g].area);
            pred_hd += w * hausdorff(t.pred[p].boundary, t.gt[*g].boundary);
        } else {
            pred_hd += w * (ng > 0 ? nearest_hd(t.pred[p], t.gt) : 0.0);
        }
    }

    rep.obj_dice = 0.5 * (gt_dice + pred_dice);
    if (ng == 0 || np == 0)
        rep.obj_hd = diagonal;
    else
        rep.obj_hd = 0.5 * (gt_hd + pred_hd);
    return rep;
}

inline double obj_f1(const InstanceMap& pred, const InstanceMap& gt) { return evaluate(pred, gt).obj_f1; }
inline double obj_dice(const InstanceMap& pred, const InstanceMap& gt) { return evaluate(pred, gt).obj_dice; }
inline double obj_hd(const InstanceMap& pred, const InstanceMap& gt) { return evaluate(pred, gt).obj_hd; }

}  // namespace dfget
