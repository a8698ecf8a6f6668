#pragma once

// Pixel grid viewed as a graph: node ids, stencil neighborhoods with stable
// neighbor indices, and per-edge storage keyed by (node, stencil index).

#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dfget {

using NodeId = std::size_t;

struct Pixel {
    int row = 0;
    int col = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct GridShape {
    int h = 0;
    int w = 0;

    GridShape() = default;
    GridShape(int height, int width) : h(height), w(width) {
        if (h < 1 || w < 1)
            throw std::invalid_argument("grid shape must be at least 1x1, got " +
                                        std::to_string(h) + "x" + std::to_string(w));
    }

    std::size_t size() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
    bool contains(int row, int col) const { return row >= 0 && row < h && col >= 0 && col < w; }
    bool contains(Pixel p) const { return contains(p.row, p.col); }

    friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Row-major node id of a pixel: row * w + col.
inline NodeId nid(Pixel p, const GridShape& shape) {
    if (!shape.contains(p))
        throw std::out_of_range("pixel (" + std::to_string(p.row) + ", " + std::to_string(p.col) +
                                ") outside " + std::to_string(shape.h) + "x" +
                                std::to_string(shape.w) + " grid");
    return static_cast<NodeId>(p.row) * static_cast<NodeId>(shape.w) + static_cast<NodeId>(p.col);
}

inline Pixel pixel_of(NodeId id, const GridShape& shape) {
    if (id >= shape.size())
        throw std::out_of_range("node id " + std::to_string(id) + " outside grid of " +
                                std::to_string(shape.size()) + " nodes");
    const auto w = static_cast<NodeId>(shape.w);
    return {static_cast<int>(id / w), static_cast<int>(id % w)};
}

struct Offset {
    int dr = 0;
    int dc = 0;
    friend bool operator==(const Offset&, const Offset&) = default;
};

/// Square (odd side k) or disk (integer radius r) neighborhood, center excluded.
class NeighborhoodSpec {
public:
    enum class Kind { square, disk };

    static NeighborhoodSpec square(int side) {
        if (side < 1 || side % 2 == 0)
            throw std::invalid_argument("square stencil side must be odd and >= 1, got " +
                                        std::to_string(side));
        return NeighborhoodSpec(Kind::square, side);
    }

    static NeighborhoodSpec disk(int radius) {
        if (radius < 0)
            throw std::invalid_argument("disk stencil radius must be >= 0, got " +
                                        std::to_string(radius));
        return NeighborhoodSpec(Kind::disk, radius);
    }

    Kind kind() const { return kind_; }
    /// Side length for squares, radius for disks.
    int extent() const { return extent_; }
    int reach() const { return kind_ == Kind::square ? (extent_ - 1) / 2 : extent_; }

    bool admits(Offset o) const {
        if (o.dr == 0 && o.dc == 0) return false;
        if (kind_ == Kind::square) {
            const int half = (extent_ - 1) / 2;
            return std::abs(o.dr) <= half && std::abs(o.dc) <= half;
        }
        return o.dr * o.dr + o.dc * o.dc <= extent_ * extent_;
    }

    friend bool operator==(const NeighborhoodSpec&, const NeighborhoodSpec&) = default;

private:
    NeighborhoodSpec(Kind kind, int extent) : kind_(kind), extent_(extent) {}

    Kind kind_;
    int extent_;
};

/// Offsets admitted by the spec in raster order (row offset, then column offset).
inline std::vector<Offset> stencil_offsets(const NeighborhoodSpec& spec) {
    std::vector<Offset> out;
    const int reach = spec.reach();
    for (int dr = -reach; dr <= reach; ++dr)
        for (int dc = -reach; dc <= reach; ++dc)
            if (spec.admits({dr, dc})) out.push_back({dr, dc});
    return out;
}

/// Enumerated stencil with O(1) offset -> index lookup.
///
/// Every stencil is point-symmetric and enumerated in raster order, so the
/// index of -offset[c] is always size() - 1 - c.
class Stencil {
public:
    explicit Stencil(NeighborhoodSpec spec)
        : spec_(spec), offsets_(stencil_offsets(spec)), reach_(spec.reach()),
          lookup_(static_cast<std::size_t>((2 * reach_ + 1) * (2 * reach_ + 1)), -1) {
        for (std::size_t c = 0; c < offsets_.size(); ++c)
            lookup_[slot(offsets_[c])] = static_cast<int>(c);
    }

    const NeighborhoodSpec& spec() const { return spec_; }
    const std::vector<Offset>& offsets() const { return offsets_; }
    int size() const { return static_cast<int>(offsets_.size()); }
    const Offset& operator[](int c) const { return offsets_[static_cast<std::size_t>(c)]; }

    std::optional<int> index_of(Offset o) const {
        if (std::abs(o.dr) > reach_ || std::abs(o.dc) > reach_) return std::nullopt;
        const int c = lookup_[slot(o)];
        if (c < 0) return std::nullopt;
        return c;
    }

    int opposite(int c) const { return size() - 1 - c; }

private:
    std::size_t slot(Offset o) const {
        const int side = 2 * reach_ + 1;
        return static_cast<std::size_t>((o.dr + reach_) * side + (o.dc + reach_));
    }

    NeighborhoodSpec spec_;
    std::vector<Offset> offsets_;
    int reach_;
    std::vector<int> lookup_;
};

struct Neighbor {
    int index;  // position of the offset in the stencil
    NodeId id;
    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Calls fn(index, neighbor_id) for every in-grid stencil position of node, in
/// stencil order. Clipped positions are skipped without renumbering.
template <class Fn>
void for_each_neighbor(NodeId node, const Stencil& stencil, const GridShape& shape, Fn&& fn) {
    const Pixel p = pixel_of(node, shape);
    const auto& offs = stencil.offsets();
    for (std::size_t c = 0; c < offs.size(); ++c) {
        const int r = p.row + offs[c].dr;
        const int q = p.col + offs[c].dc;
        if (!shape.contains(r, q)) continue;
        fn(static_cast<int>(c),
           static_cast<NodeId>(r) * static_cast<NodeId>(shape.w) + static_cast<NodeId>(q));
    }
}

inline std::vector<Neighbor> neighbors(NodeId node, const Stencil& stencil, const GridShape& shape) {
    std::vector<Neighbor> out;
    for_each_neighbor(node, stencil, shape,
                      [&](int c, NodeId j) { out.push_back({c, j}); });
    return out;
}

inline std::vector<Neighbor> neighbors(NodeId node, const NeighborhoodSpec& spec,
                                       const GridShape& shape) {
    return neighbors(node, Stencil(spec), shape);
}

/// Dense per-pixel storage in row-major order.
template <class T>
struct Grid {
    GridShape shape;
    std::vector<T> data;

    Grid() = default;
    explicit Grid(GridShape s, T fill = T{}) : shape(s), data(s.size(), fill) {}
    Grid(GridShape s, std::vector<T> values) : shape(s), data(std::move(values)) {
        if (data.size() != shape.size())
            throw std::invalid_argument("grid payload has " + std::to_string(data.size()) +
                                        " values, shape needs " + std::to_string(shape.size()));
    }

    T& operator()(int row, int col) { return data[nid({row, col}, shape)]; }
    const T& operator()(int row, int col) const { return data[nid({row, col}, shape)]; }
    T& operator[](NodeId id) { return data[id]; }
    const T& operator[](NodeId id) const { return data[id]; }
    std::size_t size() const { return data.size(); }

    friend bool operator==(const Grid&, const Grid&) = default;
};

/// Per-edge scalar indexed by (node, stencil index). Slots whose stencil
/// position falls outside the grid exist but are never read or written by the
/// graph routines.
template <class T>
class EdgeField {
public:
    EdgeField(GridShape shape, Stencil stencil, T fill = T{})
        : shape_(shape), stencil_(std::move(stencil)),
          values_(shape_.size() * static_cast<std::size_t>(stencil_.size()), fill) {}

    const GridShape& shape() const { return shape_; }
    const Stencil& stencil() const { return stencil_; }
    int degree() const { return stencil_.size(); }

    T& at(NodeId i, int c) { return values_[i * static_cast<std::size_t>(degree()) + static_cast<std::size_t>(c)]; }
    const T& at(NodeId i, int c) const {
        return values_[i * static_cast<std::size_t>(degree()) + static_cast<std::size_t>(c)];
    }

    std::vector<T>& values() { return values_; }
    const std::vector<T>& values() const { return values_; }

private:
    GridShape shape_;
    Stencil stencil_;
    std::vector<T> values_;
};

using EdgeMap = EdgeField<double>;

}  // namespace dfget
