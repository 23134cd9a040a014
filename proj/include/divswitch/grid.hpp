#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "divswitch/error.hpp"
#include "divswitch/model.hpp"

namespace divswitch {

/// Multi-index m ∈ N₀ⁿ of a grid node.
struct NodeIndex {
    std::vector<std::int64_t> m;

    NodeIndex() = default;
    explicit NodeIndex(std::vector<std::int64_t> v) : m(std::move(v)) {}
    NodeIndex(std::initializer_list<std::int64_t> v) : m(v) {}
    static NodeIndex zeros(std::size_t n) { return NodeIndex(std::vector<std::int64_t>(n, 0)); }

    std::size_t size() const { return m.size(); }
    std::int64_t& operator[](std::size_t i) { return m[i]; }
    std::int64_t operator[](std::size_t i) const { return m[i]; }
    bool operator==(const NodeIndex&) const = default;
};

/// Truncated lattice G^δ ∩ box: node m sits at (m₁δp₁, …, m_nδp_n), 0 ≤ m ≤ m_max.
struct GridSpec {
    double delta = 0.0;
    std::vector<std::int64_t> m_max;
    Vec premiums;

    std::size_t dim() const { return m_max.size(); }
    double spacing(std::size_t i) const { return delta * premiums[i]; }

    /// Π(m_max_i + 1); throws CapacityError when not addressable with 32-bit node ids.
    std::size_t node_count() const {
        std::uint64_t count = 1;
        for (auto mm : m_max) {
            const auto side = static_cast<std::uint64_t>(mm) + 1;
            if (count > std::numeric_limits<std::uint32_t>::max() / side)
                throw CapacityError("grid: node count exceeds 2^32");
            count *= side;
        }
        return static_cast<std::size_t>(count);
    }

    /// Row-major strides, last coordinate fastest.
    std::vector<std::size_t> strides() const {
        std::vector<std::size_t> s(dim(), 1);
        for (std::size_t i = dim(); i-- > 1;) s[i - 1] = s[i] * static_cast<std::size_t>(m_max[i] + 1);
        return s;
    }

    bool contains(const NodeIndex& m) const {
        for (std::size_t i = 0; i < dim(); ++i)
            if (m[i] < 0 || m[i] > m_max[i]) return false;
        return true;
    }

    std::size_t flat(const NodeIndex& m) const {
        std::size_t f = 0;
        for (std::size_t i = 0; i < dim(); ++i) f = f * static_cast<std::size_t>(m_max[i] + 1) + static_cast<std::size_t>(m[i]);
        return f;
    }

    NodeIndex unflat(std::size_t f) const {
        auto m = NodeIndex::zeros(dim());
        for (std::size_t i = dim(); i-- > 0;) {
            const auto side = static_cast<std::size_t>(m_max[i] + 1);
            m[i] = static_cast<std::int64_t>(f % side);
            f /= side;
        }
        return m;
    }

    void validate() const {
        if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("grid.delta: must be > 0");
        if (m_max.empty() || m_max.size() != premiums.size()) throw ConfigError("grid.m_max: expected n entries");
        for (std::size_t i = 0; i < dim(); ++i) {
            if (m_max[i] < 0) throw ConfigError("grid.m_max[" + std::to_string(i) + "]: must be >= 0");
            if (!(premiums[i] > 0.0)) throw ConfigError("p[" + std::to_string(i) + "]: must be > 0");
        }
        (void)node_count();
    }
};

/// Grid for `model` with the smallest m_max whose box covers [0, box_i].
inline GridSpec grid_for_box(const ModelSpec& model, double delta, std::span<const double> box) {
    GridSpec g{delta, {}, model.p};
    for (std::size_t i = 0; i < model.dim(); ++i)
        g.m_max.push_back(static_cast<std::int64_t>(std::ceil(box[i] / g.spacing(i) - 1e-9)));
    g.validate();
    return g;
}

/// g^δ(m)
inline Vec to_point(const GridSpec& grid, const NodeIndex& m) {
    Vec x(grid.dim());
    for (std::size_t i = 0; i < grid.dim(); ++i) x[i] = grid.spacing(i) * static_cast<double>(m[i]);
    return x;
}

/// ρ^δ(x): componentwise largest index with g^δ(m) ≤ x.
///
/// The floor is taken against the exact node coordinates produced by
/// to_point, so a point at or above node k (as computed by to_point) maps to
/// k, and anything strictly below maps to k − 1.
inline NodeIndex to_index(const GridSpec& grid, std::span<const double> x) {
    auto m = NodeIndex::zeros(grid.dim());
    for (std::size_t i = 0; i < grid.dim(); ++i) {
        if (!(x[i] >= 0.0)) throw DomainError("to_index: coordinate outside the nonnegative orthant");
        const double h = grid.spacing(i);
        auto k = static_cast<std::int64_t>(std::floor(x[i] / h));
        while (k > 0 && h * static_cast<double>(k) > x[i]) --k;
        while (h * static_cast<double>(k + 1) <= x[i]) ++k;
        m[i] = k;
    }
    return m;
}

/// ⟨x⟩^δ = g^δ(ρ^δ(x))
inline Vec snap_down(const GridSpec& grid, std::span<const double> x) { return to_point(grid, to_index(grid, x)); }

/// δ → δ/2 with the box preserved: coarse node m is fine node 2m.
inline GridSpec refine(const GridSpec& grid) {
    GridSpec fine{grid.delta / 2.0, {}, grid.premiums};
    for (auto mm : grid.m_max) fine.m_max.push_back(2 * mm);
    fine.validate();
    return fine;
}

/// Real-valued function on the truncated lattice.
struct ValueField {
    GridSpec grid;
    Vec data;

    ValueField() = default;
    explicit ValueField(GridSpec g, double fill = 0.0) : grid(std::move(g)), data(grid.node_count(), fill) {}
    ValueField(GridSpec g, Vec values) : grid(std::move(g)), data(std::move(values)) {
        if (data.size() != grid.node_count()) throw ConfigError("value field: size does not match grid");
        for (double v : data)
            if (!std::isfinite(v)) throw NumericError("value field: non-finite entry");
    }

    double operator()(const NodeIndex& m) const { return data[grid.flat(m)]; }
    double& operator()(const NodeIndex& m) { return data[grid.flat(m)]; }
    std::size_t size() const { return data.size(); }
};

/// Field value at m, extended beyond the box with slope a:
/// w(clamp(m)) + a·(g(m) − g(clamp(m))).
inline double clamp_extrapolate(const GridSpec& grid, const ValueField& field, std::span<const double> weights,
                                const NodeIndex& m) {
    NodeIndex c = m;
    double extra = 0.0;
    for (std::size_t i = 0; i < grid.dim(); ++i) {
        if (m[i] > grid.m_max[i]) {
            c[i] = grid.m_max[i];
            extra += weights[i] * grid.spacing(i) * static_cast<double>(m[i] - grid.m_max[i]);
        }
    }
    return field(c) + extra;
}

}  // namespace divswitch
