#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "divswitch/error.hpp"
#include "divswitch/grid.hpp"
#include "divswitch/model.hpp"
#include "divswitch/operators.hpp"

namespace divswitch {

/// T = max{T₀, T_i, T_s} bound to one coefficient table, over flat node ids.
class Scheme {
public:
    Scheme(const ModelSpec& model, const CoefficientTable& coeffs) : model_(model), coeffs_(coeffs) {
        const auto& g = coeffs.grid;
        if (g.dim() > 32) throw CapacityError("scheme: at most 32 dimensions supported");
        const std::size_t nodes = g.node_count();
        strides_ = g.strides();
        obstacle_.resize(nodes);
        mask_.resize(nodes);
        for (std::size_t i = 0; i < g.dim(); ++i) pay_.push_back(g.delta * model.a[i] * g.premiums[i]);
#pragma omp parallel for schedule(static)
        for (std::int64_t f = 0; f < static_cast<std::int64_t>(nodes); ++f) {
            const NodeIndex m = g.unflat(static_cast<std::size_t>(f));
            obstacle_[static_cast<std::size_t>(f)] = apply_Ts(model, g, m);
            std::uint32_t mask = 0;
            for (std::size_t i = 0; i < g.dim(); ++i)
                if (m[i] > 0) mask |= 1u << i;
            mask_[static_cast<std::size_t>(f)] = mask;
        }
    }

    const GridSpec& grid() const { return coeffs_.grid; }
    const ModelSpec& model() const { return model_; }
    const CoefficientTable& coeffs() const { return coeffs_; }
    std::size_t nodes() const { return obstacle_.size(); }
    double obstacle(std::size_t f) const { return obstacle_[f]; }
    const Vec& obstacle_values() const { return obstacle_; }

    /// T(w) at node f (value only).
    double value(std::span<const double> w, std::size_t f) const {
        double best = std::max(obstacle_[f], detail::t0_flat(coeffs_, w, f));
        const std::uint32_t mask = mask_[f];
        for (std::size_t i = 0; i < pay_.size(); ++i)
            if (mask & (1u << i)) best = std::max(best, w[f - strides_[i]] + pay_[i]);
        return best;
    }

    /// T(w) at node f with the selected action.
    TResult evaluate(std::span<const double> w, std::size_t f) const {
        std::vector<std::optional<double>> ti(pay_.size());
        for (std::size_t i = 0; i < pay_.size(); ++i)
            if (mask_[f] & (1u << i)) ti[i] = w[f - strides_[i]] + pay_[i];
        return select_action(obstacle_[f], detail::t0_flat(coeffs_, w, f), ti);
    }

    struct SweepStats {
        double max_increase = 0.0;  // sup(out − in)
        double max_abs_change = 0.0;
        std::size_t decreases = 0;  // nodes with out < in − slack
    };

    /// One Jacobi sweep out = T(in).
    SweepStats sweep(std::span<const double> in, std::span<double> out, double slack) const {
        double inc = -std::numeric_limits<double>::infinity(), absmax = 0.0;
        std::size_t dec = 0;
        const auto n = static_cast<std::int64_t>(nodes());
#pragma omp parallel for schedule(static) reduction(max : inc, absmax) reduction(+ : dec)
        for (std::int64_t f = 0; f < n; ++f) {
            const auto k = static_cast<std::size_t>(f);
            const double v = value(in, k);
            out[k] = v;
            const double d = v - in[k];
            inc = std::max(inc, d);
            absmax = std::max(absmax, std::abs(d));
            if (d < -slack) ++dec;
        }
        return {inc, absmax, dec};
    }

private:
    const ModelSpec& model_;
    const CoefficientTable& coeffs_;
    std::vector<std::size_t> strides_;
    Vec obstacle_;
    Vec pay_;
    std::vector<std::uint32_t> mask_;
};

struct SolveOptions {
    /// Stop when sup(v_{l+1} − v_l) ≤ tol_iter; ≤ 0 selects 1e-8·max(1, sup|v₁|).
    double tol_iter = 0.0;
    std::size_t max_iter = 1'000'000;
    /// Slack below which a decrease between iterates counts as a violation.
    double monotone_slack = 1e-12;
    /// Called every `progress_every` sweeps with (iteration, sup increment).
    std::function<void(std::size_t, double)> on_progress;
    std::size_t progress_every = 1000;
};

struct SolveReport {
    std::size_t iterations = 0;
    double final_sup_delta = 0.0;
    double residual = 0.0;  // max_m |T(v)(m) − v(m)| at the returned field
    double wall_time = 0.0;
    double tol_iter = 0.0;
    std::size_t monotonicity_violations = 0;
};

/// max_m (T(v)(m) − v(m)); `abs` selects the sup-norm instead.
inline double residual(const Scheme& scheme, const ValueField& v, bool abs = false) {
    double r = -std::numeric_limits<double>::infinity();
    const auto n = static_cast<std::int64_t>(scheme.nodes());
#pragma omp parallel for schedule(static) reduction(max : r)
    for (std::int64_t f = 0; f < n; ++f) {
        const auto k = static_cast<std::size_t>(f);
        const double d = scheme.value(v.data, k) - v.data[k];
        r = std::max(r, abs ? std::abs(d) : d);
    }
    return r;
}

inline double residual(const ModelSpec& model, const CoefficientTable& coeffs, const ValueField& v, bool abs = false) {
    return residual(Scheme(model, coeffs), v, abs);
}

/// v₁ = f∘g^δ, v_{l+1} = T(v_l) until the sup increment drops below tol_iter.
inline std::pair<ValueField, SolveReport> value_iteration(const Scheme& scheme, const SolveOptions& opts = {}) {
    const auto start = std::chrono::steady_clock::now();
    const GridSpec& grid = scheme.grid();
    ValueField v(grid, scheme.obstacle_values());
    Vec next(v.size());

    SolveReport rep;
    double scale = 0.0;
    for (double x : v.data) scale = std::max(scale, std::abs(x));
    rep.tol_iter = opts.tol_iter > 0.0 ? opts.tol_iter : 1e-8 * std::max(1.0, scale);

    while (true) {
        if (rep.iterations >= opts.max_iter)
            throw NonConvergenceError("value iteration: no convergence after " + std::to_string(rep.iterations) +
                                      " sweeps (last increment " + std::to_string(rep.final_sup_delta) + ")");
        const auto st = scheme.sweep(v.data, next, opts.monotone_slack);
        ++rep.iterations;
        rep.monotonicity_violations += st.decreases;
        rep.final_sup_delta = st.max_abs_change;
        if (!std::isfinite(st.max_abs_change)) throw NumericError("value iteration: non-finite iterate");
        v.data.swap(next);
        if (opts.on_progress && rep.iterations % opts.progress_every == 0)
            opts.on_progress(rep.iterations, st.max_abs_change);
        if (st.max_abs_change <= rep.tol_iter) break;
    }
    rep.residual = residual(scheme, v, true);
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(v), rep};
}

inline std::pair<ValueField, SolveReport> value_iteration(const ModelSpec& model, const CoefficientTable& coeffs,
                                                          const SolveOptions& opts = {}) {
    return value_iteration(Scheme(model, coeffs), opts);
}

// ---------------------------------------------------------------------------
// Policy and regions
// ---------------------------------------------------------------------------

struct PolicyField {
    GridSpec grid;
    std::vector<Action> action;

    Action operator()(const NodeIndex& m) const { return action[grid.flat(m)]; }
};

inline PolicyField extract_policy(const Scheme& scheme, const ValueField& v) {
    PolicyField pol{scheme.grid(), std::vector<Action>(scheme.nodes())};
    const auto n = static_cast<std::int64_t>(scheme.nodes());
#pragma omp parallel for schedule(static)
    for (std::int64_t f = 0; f < n; ++f)
        pol.action[static_cast<std::size_t>(f)] = scheme.evaluate(v.data, static_cast<std::size_t>(f)).action;
    return pol;
}

inline PolicyField extract_policy(const ModelSpec& model, const CoefficientTable& coeffs, const ValueField& v) {
    return extract_policy(Scheme(model, coeffs), v);
}

/// Connected components of {m : policy(m) == action} under 2n-neighbour adjacency.
struct Components {
    std::size_t count = 0;
    std::vector<int> label;  // -1 outside the region
    std::vector<std::size_t> sizes;
};

inline Components region_components(const PolicyField& pol, Action which) {
    const GridSpec& g = pol.grid;
    const auto strides = g.strides();
    Components out;
    out.label.assign(pol.action.size(), -1);
    std::vector<std::size_t> stack;
    for (std::size_t seed = 0; seed < pol.action.size(); ++seed) {
        if (pol.action[seed] != which || out.label[seed] >= 0) continue;
        const int id = static_cast<int>(out.count++);
        std::size_t size = 0;
        stack.push_back(seed);
        out.label[seed] = id;
        while (!stack.empty()) {
            const std::size_t f = stack.back();
            stack.pop_back();
            ++size;
            const NodeIndex m = g.unflat(f);
            for (std::size_t i = 0; i < g.dim(); ++i) {
                if (m[i] > 0) {
                    const std::size_t nb = f - strides[i];
                    if (out.label[nb] < 0 && pol.action[nb] == which) {
                        out.label[nb] = id;
                        stack.push_back(nb);
                    }
                }
                if (m[i] < g.m_max[i]) {
                    const std::size_t nb = f + strides[i];
                    if (out.label[nb] < 0 && pol.action[nb] == which) {
                        out.label[nb] = id;
                        stack.push_back(nb);
                    }
                }
            }
        }
        out.sizes.push_back(size);
    }
    return out;
}

struct ExtendedValue {
    double value;
    bool extrapolated;  // x lies beyond the truncated box
};

/// V^δ(x) = v(⟨x⟩) + a·(x − ⟨x⟩), slope-a beyond the box.
inline ExtendedValue extend_Vdelta(const ValueField& v, std::span<const double> weights, std::span<const double> x) {
    const NodeIndex m = to_index(v.grid, x);
    const Vec node = to_point(v.grid, m);
    double val = clamp_extrapolate(v.grid, v, weights, m);
    for (std::size_t i = 0; i < x.size(); ++i) val += weights[i] * (x[i] - node[i]);
    return {val, !v.grid.contains(m)};
}

/// sup over nodes of |f(g(m))| / h₀(g(m)); finite on any truncated box, reported as a diagnostic.
inline double growth_ratio(const ModelSpec& model, const GridSpec& grid) {
    double r = 0.0;
    for (std::size_t f = 0; f < grid.node_count(); ++f) {
        const Vec x = to_point(grid, grid.unflat(f));
        r = std::max(r, std::abs(eval_obstacle(model.obstacle, x)) / growth_bound(model, x));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Refinement δ → δ/2 → …
// ---------------------------------------------------------------------------

struct RefinementLevel {
    double delta = 0.0;
    double sup_diff = 0.0;          // sup over coarse nodes |v^{δ}(2m) − v^{2δ}(m)|; 0 on the first level
    std::size_t violations = 0;     // coarse nodes with v^{2δ}(m) > v^{δ}(2m) + slack
    double worst_violation = 0.0;   // max(v^{2δ}(m) − v^{δ}(2m)), may be negative
    SolveReport solve;
};

struct RefinementReport {
    std::vector<RefinementLevel> levels;
    std::vector<ValueField> fields;  // solution per level
};

/// Compares v^{2δ}(m) with v^{δ}(2m) on every coarse node.
inline void compare_levels(const ValueField& coarse, const ValueField& fine, double slack, RefinementLevel& out) {
    out.sup_diff = 0.0;
    out.violations = 0;
    out.worst_violation = -std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < coarse.size(); ++f) {
        NodeIndex m = coarse.grid.unflat(f);
        for (auto& mi : m.m) mi *= 2;
        const double d = coarse.data[f] - fine(m);
        out.sup_diff = std::max(out.sup_diff, std::abs(d));
        out.worst_violation = std::max(out.worst_violation, d);
        if (d > slack) ++out.violations;
    }
}

struct RefineOptions {
    SolveOptions solve;
    CoeffOptions coeffs;
    double slack = 1e-9;
    /// Called after each level is solved.
    std::function<void(const RefinementLevel&)> on_level;
};

/// Solves at δ₀, δ₀/2, …, (levels solves in total) with the model held fixed.
inline RefinementReport refinement_run(const ModelSpec& model, const GridSpec& grid0, std::size_t levels,
                                       const RefineOptions& opts = {}) {
    if (levels < 1) throw ConfigError("levels: must be >= 1");
    RefinementReport rep;
    GridSpec grid = grid0;
    for (std::size_t k = 0; k < levels; ++k) {
        if (k > 0) grid = refine(grid);
        const CoefficientTable coeffs = precompute_coeffs(model, grid, opts.coeffs);
        auto [v, sr] = value_iteration(model, coeffs, opts.solve);
        RefinementLevel lvl;
        lvl.delta = grid.delta;
        lvl.solve = sr;
        if (k > 0) compare_levels(rep.fields.back(), v, opts.slack, lvl);
        rep.levels.push_back(lvl);
        rep.fields.push_back(std::move(v));
        if (opts.on_level) opts.on_level(rep.levels.back());
    }
    return rep;
}

}  // namespace divswitch
