#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>

#include "divswitch/error.hpp"
#include "divswitch/operators.hpp"

namespace divswitch {

// On-disk coefficient tables. Layout (little-endian):
//   magic "DSCT", u32 version, u32 n, u64 m_max[n], f64 delta, f64 drift, u64 key
//   per node: u64 count, count × (u64 k, f64 a1), f64 a2
// The clamp(m+1) data is cheap and is rebuilt on load.

inline constexpr std::uint32_t kCacheVersion = 1;

/// FNV-1a over the effective configuration text.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace detail {

static_assert(std::endian::native == std::endian::little, "coefficient cache assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("coefficient cache: truncated file");
    return v;
}

}  // namespace detail

inline void save_coeffs(const CoefficientTable& t, std::uint64_t key, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write coefficient cache: " + path);
    out.write("DSCT", 4);
    detail::put<std::uint32_t>(out, kCacheVersion);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.grid.dim()));
    for (auto mm : t.grid.m_max) detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(mm));
    detail::put<double>(out, t.grid.delta);
    detail::put<double>(out, t.drift_factor);
    detail::put<std::uint64_t>(out, key);
    for (std::size_t f = 0; f < t.nodes(); ++f) {
        detail::put<std::uint64_t>(out, t.row_start[f + 1] - t.row_start[f]);
        for (auto e = t.row_start[f]; e < t.row_start[f + 1]; ++e) {
            detail::put<std::uint64_t>(out, t.col[e]);
            detail::put<double>(out, t.weight[e]);
        }
        detail::put<double>(out, t.constant[f]);
    }
    if (!out) throw IoError("write failed: " + path);
}

/// Loads a cached table if `path` exists and matches (grid, key); otherwise empty.
inline std::optional<CoefficientTable> load_coeffs(const ModelSpec& model, const GridSpec& grid, std::uint64_t key,
                                                   const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DSCT", 4) != 0) return std::nullopt;
    if (detail::get<std::uint32_t>(in) != kCacheVersion) return std::nullopt;
    if (detail::get<std::uint32_t>(in) != grid.dim()) return std::nullopt;
    for (auto mm : grid.m_max)
        if (detail::get<std::uint64_t>(in) != static_cast<std::uint64_t>(mm)) return std::nullopt;
    if (detail::get<double>(in) != grid.delta) return std::nullopt;
    const double drift = detail::get<double>(in);
    if (detail::get<std::uint64_t>(in) != key) return std::nullopt;

    CoefficientTable t;
    t.grid = grid;
    t.drift_factor = drift;
    const double kappa = model.c + model.lambda();
    t.jump_mass_bound = model.lambda() * quad::exp_integral(kappa, grid.delta);
    const std::size_t nodes = grid.node_count();
    t.row_start.assign(nodes + 1, 0);
    t.constant.resize(nodes);
    t.up.resize(nodes);
    t.up_payout.resize(nodes);
    for (std::size_t f = 0; f < nodes; ++f) {
        const auto count = detail::get<std::uint64_t>(in);
        for (std::uint64_t e = 0; e < count; ++e) {
            const auto k = detail::get<std::uint64_t>(in);
            if (k >= nodes) throw IoError("coefficient cache: node index out of range in " + path);
            t.col.push_back(static_cast<std::uint32_t>(k));
            t.weight.push_back(detail::get<double>(in));
        }
        t.row_start[f + 1] = t.col.size();
        t.constant[f] = detail::get<double>(in);

        detail::link_up(model, grid.unflat(f), t, f);
    }
    return t;
}

}  // namespace divswitch
