#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "divswitch/error.hpp"
#include "divswitch/grid.hpp"
#include "divswitch/montecarlo.hpp"
#include "divswitch/operators.hpp"
#include "divswitch/solver.hpp"

namespace divswitch {

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << std::setprecision(17);
    return out;
}

inline void close_out(std::ofstream& out, const std::string& path) {
    out.close();
    if (!out) throw IoError("write failed: " + path);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) out.push_back(cell);
    return out;
}

}  // namespace detail

/// Columns m1..mn, x1..xn, v, action — one row per node in flat order.
inline void write_values_csv(const std::string& path, const ValueField& v, const PolicyField& pol) {
    auto out = detail::open_out(path);
    const std::size_t n = v.grid.dim();
    for (std::size_t i = 0; i < n; ++i) out << 'm' << i + 1 << ',';
    for (std::size_t i = 0; i < n; ++i) out << 'x' << i + 1 << ',';
    out << "v,action\n";
    for (std::size_t f = 0; f < v.size(); ++f) {
        const NodeIndex m = v.grid.unflat(f);
        const Vec x = to_point(v.grid, m);
        for (std::size_t i = 0; i < n; ++i) out << m[i] << ',';
        for (std::size_t i = 0; i < n; ++i) out << x[i] << ',';
        out << v.data[f] << ',' << to_string(pol.action[f]) << '\n';
    }
    detail::close_out(out, path);
}

/// Reads a values CSV written for `grid` back into (v, policy).
inline std::pair<ValueField, PolicyField> read_values_csv(const std::string& path, const GridSpec& grid) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path + " (run `solve` first)");
    const std::size_t n = grid.dim(), nodes = grid.node_count();
    Vec data(nodes, 0.0);
    std::vector<Action> act(nodes);
    std::vector<char> seen(nodes, 0);
    std::string line;
    std::getline(in, line);  // header
    std::size_t lineno = 1, rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = detail::split(line, ',');
        if (cells.size() != 2 * n + 2) throw ConfigError(path + ":" + std::to_string(lineno) + ": wrong column count");
        auto m = NodeIndex::zeros(n);
        try {
            for (std::size_t i = 0; i < n; ++i) m[i] = std::stoll(cells[i]);
            if (!grid.contains(m)) throw ConfigError("node outside the configured grid");
            const std::size_t f = grid.flat(m);
            data[f] = std::stod(cells[2 * n]);
            act[f] = action_from_string(cells[2 * n + 1]);
            if (!seen[f]) ++rows;
            seen[f] = 1;
        } catch (const std::invalid_argument&) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": not a number");
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (rows != nodes) throw ConfigError(path + ": does not match the configured grid (re-run `solve`)");
    return {ValueField(grid, std::move(data)), PolicyField{grid, std::move(act)}};
}

/// Gray level per action: 0 switch, 85 pay1, 170 pay2, 255 none.
inline int pgm_level(Action a) {
    switch (a.kind) {
        case Action::Switch: return 0;
        case Action::NoAction: return 255;
        case Action::PayDiv: return a.axis == 0 ? 85 : 170;
    }
    return 255;
}

/// Plain PGM (P2) of a 2-d policy: one pixel per node, x₁ to the right, x₂ up.
inline void write_policy_pgm(const std::string& path, const PolicyField& pol) {
    if (pol.grid.dim() != 2) throw ConfigError("region map: only defined for n = 2");
    auto out = detail::open_out(path);
    const auto w = pol.grid.m_max[0] + 1, h = pol.grid.m_max[1] + 1;
    out << "P2\n" << w << ' ' << h << "\n255\n";
    for (auto row = h; row-- > 0;) {
        for (std::int64_t col = 0; col < w; ++col) {
            if (col) out << ' ';
            out << pgm_level(pol(NodeIndex{col, row}));
        }
        out << '\n';
    }
    detail::close_out(out, path);
}

inline void write_refinement_csv(const std::string& path, const RefinementReport& rep) {
    auto out = detail::open_out(path);
    out << "level,delta,sup_diff,violations,worst_violation,iterations,residual\n";
    for (std::size_t k = 0; k < rep.levels.size(); ++k) {
        const auto& l = rep.levels[k];
        out << k << ',' << l.delta << ',' << l.sup_diff << ',' << l.violations << ','
            << (k == 0 ? 0.0 : l.worst_violation) << ',' << l.solve.iterations << ',' << l.solve.residual << '\n';
    }
    detail::close_out(out, path);
}

struct McRow {
    NodeIndex node;
    double v = 0.0;
    SimResult sim;
};

inline std::string node_label(const NodeIndex& m) {
    std::string s;
    for (std::size_t i = 0; i < m.size(); ++i) s += (i ? ":" : "") + std::to_string(m[i]);
    return s;
}

/// z = (mc_mean − v) / mc_se, 0 when both agree exactly.
inline double z_score(double v, const SimResult& r) {
    const double d = r.mean - v;
    if (r.std_error == 0.0) return d == 0.0 ? 0.0 : (d > 0 ? 1.0 : -1.0) * std::numeric_limits<double>::infinity();
    return d / r.std_error;
}

inline void write_mc_csv(const std::string& path, const std::vector<McRow>& rows) {
    auto out = detail::open_out(path);
    out << "node,v_delta,mc_mean,mc_se,z_score,paths,horizon\n";
    for (const auto& r : rows)
        out << node_label(r.node) << ',' << r.v << ',' << r.sim.mean << ',' << r.sim.std_error << ','
            << z_score(r.v, r.sim) << ',' << r.sim.paths << ',' << r.sim.horizon << '\n';
    detail::close_out(out, path);
}

}  // namespace divswitch
