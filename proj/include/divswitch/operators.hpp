#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "divswitch/error.hpp"
#include "divswitch/grid.hpp"
#include "divswitch/model.hpp"
#include "divswitch/quadrature.hpp"

namespace divswitch {

// ---------------------------------------------------------------------------
// Control actions
// ---------------------------------------------------------------------------

/// Local control at a grid node: switch (E_s), wait one step (E_0) or pay
/// one cell of dividends from company `axis` (E_i).
struct Action {
    enum Kind : std::uint8_t { Switch = 0, NoAction = 1, PayDiv = 2 };
    Kind kind = NoAction;
    std::uint8_t axis = 0;

    static Action sw() { return {Switch, 0}; }
    static Action wait() { return {NoAction, 0}; }
    static Action pay(std::size_t i) { return {PayDiv, static_cast<std::uint8_t>(i)}; }
    bool operator==(const Action&) const = default;
};

inline std::string to_string(Action a) {
    switch (a.kind) {
        case Action::Switch: return "switch";
        case Action::NoAction: return "none";
        case Action::PayDiv: return "pay" + std::to_string(a.axis + 1);
    }
    return "?";
}

inline Action action_from_string(const std::string& s) {
    if (s == "switch") return Action::sw();
    if (s == "none") return Action::wait();
    if (s.rfind("pay", 0) == 0 && s.size() > 3) {
        const int i = std::stoi(s.substr(3));
        if (i >= 1 && i <= 255) return Action::pay(static_cast<std::size_t>(i - 1));
    }
    throw ConfigError("unknown action tag: " + s);
}

// ---------------------------------------------------------------------------
// Coefficient table for T₀
// ---------------------------------------------------------------------------

/// T₀(w)(m) = drift·w(m+1) + Σ_k a₁(k,m)·w(k) + a₂(m), stored as compressed rows.
///
/// `up`/`up_payout` resolve w(m+1) inside the box: the node clamp(m+1) and the
/// slope-a dividend paid for the part of m+1 that lies outside.
struct CoefficientTable {
    GridSpec grid;
    double drift_factor = 1.0;
    double jump_mass_bound = 0.0;
    std::vector<std::uint64_t> row_start;
    std::vector<std::uint32_t> col;
    std::vector<double> weight;
    std::vector<double> constant;
    std::vector<std::uint32_t> up;
    std::vector<double> up_payout;

    std::size_t nodes() const { return constant.size(); }

    double row_mass(std::size_t node) const {
        double s = 0.0;
        for (auto e = row_start[node]; e < row_start[node + 1]; ++e) s += weight[e];
        return s;
    }
};

struct CoeffOptions {
    /// Route axis-aligned exponential sources through the generic ray
    /// quadrature instead of the closed form (used to cross-check the two).
    bool force_generic = false;
};

namespace detail {

struct Component {
    std::size_t source;
    double intensity;
    const Vec* allocation;
    SimpleLaw law;
    int axis;
};

inline std::vector<Component> expand_components(const ModelSpec& model) {
    std::vector<Component> out;
    for (std::size_t l = 0; l < model.claims.sources.size(); ++l) {
        const auto& s = model.claims.sources[l];
        for (const auto& part : simple_parts(s.marginal))
            if (part.weight > 0.0) out.push_back({l, s.intensity * part.weight, &s.allocation, part.law, s.axis()});
    }
    return out;
}

/// Gauss–Legendre nodes/weights mapped to [a, b].
inline void gl_nodes(double a, double b, std::vector<std::pair<double, double>>& out) {
    using rule = boost::math::quadrature::gauss<double, 15>;
    const auto& x = rule::abscissa();
    const auto& w = rule::weights();
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    out.clear();
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (x[k] == 0.0) {
            out.emplace_back(mid, half * w[k]);
        } else {
            out.emplace_back(mid - half * x[k], half * w[k]);
            out.emplace_back(mid + half * x[k], half * w[k]);
        }
    }
}

struct RowBuilder {
    std::vector<std::pair<std::uint32_t, double>> entries;
    double constant = 0.0;

    void add(std::uint32_t k, double w) { entries.emplace_back(k, w); }

    void finalize() {
        std::sort(entries.begin(), entries.end(), [](auto& l, auto& r) { return l.first < r.first; });
        std::size_t out = 0;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (out > 0 && entries[out - 1].first == entries[i].first) entries[out - 1].second += entries[i].second;
            else entries[out++] = entries[i];
        }
        entries.resize(out);
        std::erase_if(entries, [](auto& e) { return e.second == 0.0; });
    }
};

class CoefficientBuilder {
public:
    CoefficientBuilder(const ModelSpec& model, const GridSpec& grid, CoeffOptions opts)
        : model_(model), grid_(grid), opts_(opts), comps_(expand_components(model)) {
        kappa_ = model.c + model.lambda();
        has_atoms_ = std::any_of(comps_.begin(), comps_.end(),
                                 [](const Component& c) { return std::holds_alternative<Empirical>(c.law); });
    }

    void build_row(const NodeIndex& m, RowBuilder& row) const {
        for (const auto& comp : comps_) {
            if (std::holds_alternative<Empirical>(comp.law)) atoms_route(comp, m, row);
            else if (comp.axis >= 0 && !opts_.force_generic) axis_exponential_route(comp, m, row);
            else ray_exponential_route(comp, m, row);
        }
        row.constant -= ruin_term(m);
        row.finalize();
    }

private:
    std::uint32_t flat(const NodeIndex& k) const { return static_cast<std::uint32_t>(grid_.flat(k)); }

    double dot_a(std::span<const double> v) const {
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) s += model_.a[i] * v[i];
        return s;
    }

    // Whole claim on axis j with exponential size: every time integral has a closed form.
    void axis_exponential_route(const Component& comp, const NodeIndex& m, RowBuilder& row) const {
        const auto j = static_cast<std::size_t>(comp.axis);
        const double d = std::get<Exponential>(comp.law).rate;
        const double delta = grid_.delta, pj = grid_.premiums[j], h = grid_.spacing(j);
        const double mu = comp.intensity;
        const double e0 = quad::exp_integral(kappa_, delta);
        const double ed = quad::exp_integral(kappa_ + d * pj, delta);
        const double t0 = quad::texp_integral(kappa_, delta);
        const double td = quad::texp_integral(kappa_ + d * pj, delta);
        const double one_minus_q = -std::expm1(-d * h);

        // landing without crossing a grid line of axis j
        row.add(flat(m), mu * (e0 - ed));
        NodeIndex k = m;
        double geo = 0.0;
        for (std::int64_t r = 1; r <= m[j]; ++r) {
            k[j] = m[j] - r;
            const double q = std::exp(-d * h * static_cast<double>(r - 1));
            row.add(flat(k), mu * q * one_minus_q * ed);
            geo += q;
        }

        // snap-down dividends on axis j
        double over = (d * pj * t0 - e0 + ed) / d;
        over += quad::psi(d * h) / d * ed * geo;
        double c = mu * model_.a[j] * over;
        // premium collected on the other axes during t, paid out on landing
        double other = 0.0;
        for (std::size_t i = 0; i < grid_.dim(); ++i)
            if (i != j) other += model_.a[i] * grid_.premiums[i];
        if (other != 0.0) c += mu * other * (t0 - std::exp(-d * h * static_cast<double>(m[j])) * td);
        row.constant += c;
    }

    // Any allocation, exponential size: exact β-integrals, Gauss–Legendre in t
    // over pieces where the order of the β-breakpoints is fixed.
    void ray_exponential_route(const Component& comp, const NodeIndex& m, RowBuilder& row) const {
        const Vec& col = *comp.allocation;
        const double d = std::get<Exponential>(comp.law).rate;
        const double delta = grid_.delta;
        const std::size_t n = grid_.dim();
        std::vector<std::size_t> carried;
        Vec slope(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            if (col[i] > 0.0) {
                carried.push_back(i);
                slope[i] = grid_.premiums[i] / col[i];
            }

        // times in (0, δ) where breakpoints of two axes swap order
        std::vector<double> cuts;
        for (std::size_t u = 0; u < carried.size(); ++u)
            for (std::size_t v = u + 1; v < carried.size(); ++v) {
                const std::size_t i = carried[u], ii = carried[v];
                const double s = slope[i], ss = slope[ii];
                if (s == ss) continue;
                for (std::int64_t r = 0; r <= m[i]; ++r) {
                    // s (rδ + t) = ss (r'δ + t)  ⇒  t/δ = (ss r' − s r)/(s − ss)
                    const double lo_r = (s > ss) ? s * r / ss : (s * (r + 1)) / ss - 1.0;
                    const double hi_r = (s > ss) ? (s * (r + 1)) / ss - 1.0 : s * r / ss;
                    for (auto rr = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(lo_r)));
                         rr <= std::min<std::int64_t>(m[ii], static_cast<std::int64_t>(std::ceil(hi_r))); ++rr) {
                        const double tau = (ss * rr - s * r) / (s - ss);
                        if (tau > 0.0 && tau < 1.0) cuts.push_back(tau * delta);
                    }
                }
            }
        cuts.push_back(0.0);
        cuts.push_back(delta);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

        const double a_dot_col = dot_a(col);
        std::vector<std::pair<double, double>> nodes;
        std::vector<std::int64_t> r(n, 0);
        NodeIndex k = m;
        Vec over(n);
        for (std::size_t piece = 0; piece + 1 < cuts.size(); ++piece) {
            gl_nodes(cuts[piece], cuts[piece + 1], nodes);
            for (auto [t, wq] : nodes) {
                const double scale = comp.intensity * wq * std::exp(-kappa_ * t);
                std::fill(r.begin(), r.end(), 0);
                double lo = 0.0;
                while (true) {
                    double next = std::numeric_limits<double>::infinity();
                    for (auto i : carried) next = std::min(next, slope[i] * (static_cast<double>(r[i]) * delta + t));
                    for (std::size_t i = 0; i < n; ++i) {
                        k[i] = m[i] - r[i];
                        over[i] = grid_.spacing(i) * static_cast<double>(r[i]) + t * grid_.premiums[i];
                    }
                    if (next > lo) {
                        const double elo = std::exp(-d * lo);
                        const double len = next - lo;
                        const double mass = elo * -std::expm1(-d * len);
                        const double excess = elo * quad::phi(d * len) / d;  // ∫(β − lo) dF
                        row.add(flat(k), scale * mass);
                        row.constant += scale * ((dot_a(over) - a_dot_col * lo) * mass - a_dot_col * excess);
                    }
                    bool ruined = false;
                    for (auto i : carried) {
                        if (slope[i] * (static_cast<double>(r[i]) * delta + t) == next) {
                            if (r[i] == m[i]) ruined = true;
                            else ++r[i];
                        }
                    }
                    if (ruined) break;
                    lo = next;
                }
            }
        }
    }

    // Atoms: for each atom the landing node is piecewise constant in t with at
    // most one change per axis, so every integral is exact.
    void atoms_route(const Component& comp, const NodeIndex& m, RowBuilder& row) const {
        const Vec& col = *comp.allocation;
        const auto& em = std::get<Empirical>(comp.law);
        const double delta = grid_.delta;
        const std::size_t n = grid_.dim();
        Vec base(n);  // m_i − β a_i / h_i, landing index at t is floor(base_i + t/δ)
        NodeIndex k = m;
        std::vector<double> cuts;
        for (std::size_t atom = 0; atom < em.support.size(); ++atom) {
            const double beta = em.support[atom];
            double t_ruin = 0.0;
            cuts.clear();
            for (std::size_t i = 0; i < n; ++i) {
                base[i] = static_cast<double>(m[i]) - beta * col[i] / grid_.spacing(i);
                t_ruin = std::max(t_ruin, -base[i] * delta);
                const double frac = base[i] - std::floor(base[i]);
                if (frac > 0.0) cuts.push_back((1.0 - frac) * delta);
            }
            if (t_ruin >= delta) continue;
            cuts.push_back(t_ruin);
            cuts.push_back(delta);
            std::sort(cuts.begin(), cuts.end());
            const double scale = comp.intensity * em.prob[atom];
            for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
                const double ta = std::max(cuts[c], t_ruin), tb = cuts[c + 1];
                if (!(tb > ta)) continue;
                const double tm = 0.5 * (ta + tb);
                bool inside = true;
                double c0 = 0.0, b1 = 0.0;  // a·(z(t) − g(k)) = c0 + b1 (t − ta)
                for (std::size_t i = 0; i < n; ++i) {
                    k[i] = static_cast<std::int64_t>(std::floor(base[i] + tm / delta));
                    if (k[i] < 0) inside = false;
                    const double z = grid_.spacing(i) * static_cast<double>(m[i]) + ta * grid_.premiums[i] - beta * col[i];
                    c0 += model_.a[i] * (z - grid_.spacing(i) * static_cast<double>(k[i]));
                    b1 += model_.a[i] * grid_.premiums[i];
                }
                if (!inside) continue;
                const double disc = std::exp(-kappa_ * ta), len = tb - ta;
                row.add(flat(k), scale * disc * quad::exp_integral(kappa_, len));
                row.constant +=
                    scale * disc * (c0 * quad::exp_integral(kappa_, len) + b1 * quad::texp_integral(kappa_, len));
            }
        }
    }

    // ∫₀^δ e^{-(c+λ)t} R(g(m) + t p) dt
    double ruin_term(const NodeIndex& m) const {
        if (std::holds_alternative<ZeroPenalty>(model_.penalty) || comps_.empty()) return 0.0;
        const std::size_t n = grid_.dim();
        const Vec base = to_point(grid_, m);
        std::vector<double> breaks;
        for (std::size_t i = 0; i < n; ++i) {
            const double pi = grid_.premiums[i];
            for (double knot : penalty_kinks(model_, i, base[i], base[i] + grid_.delta * pi))
                breaks.push_back((knot - base[i]) / pi);
            if (has_atoms_) {
                for (const auto& comp : comps_) {
                    const auto* em = std::get_if<Empirical>(&comp.law);
                    if (!em || (*comp.allocation)[i] == 0.0) continue;
                    for (double beta : em->support) {
                        const double t = (beta * (*comp.allocation)[i] - base[i]) / pi;
                        if (t > 0.0 && t < grid_.delta) breaks.push_back(t);
                    }
                }
            }
        }
        // a shared claim's ruin threshold min_i y_i / a_i changes its binding coordinate
        for (const auto& comp : comps_) {
            const Vec& col = *comp.allocation;
            if (comp.axis >= 0) continue;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) {
                    if (col[i] == 0.0 || col[j] == 0.0) continue;
                    const double ds = grid_.premiums[i] / col[i] - grid_.premiums[j] / col[j];
                    if (ds == 0.0) continue;
                    const double t = (base[j] / col[j] - base[i] / col[i]) / ds;
                    if (t > 0.0 && t < grid_.delta) breaks.push_back(t);
                }
        }
        Vec y(n);
        auto integrand = [&](double t) {
            for (std::size_t i = 0; i < n; ++i) y[i] = base[i] + t * grid_.premiums[i];
            return std::exp(-kappa_ * t) * eval_R(model_, y);
        };
        try {
            return quad::piecewise_gauss(integrand, 0.0, grid_.delta, breaks);
        } catch (const NumericError& e) {
            std::string where;
            for (std::size_t i = 0; i < n; ++i) where += (i ? "," : "") + std::to_string(m[i]);
            throw NumericError(std::string(e.what()) + " at node (" + where + ")");
        }
    }

    const ModelSpec& model_;
    const GridSpec& grid_;
    CoeffOptions opts_;
    std::vector<Component> comps_;
    double kappa_ = 0.0;
    bool has_atoms_ = false;
};

}  // namespace detail

namespace detail {

/// Fills up/up_payout for node f: clamp(m+1) and the dividend for the clamped part.
inline void link_up(const ModelSpec& model, const NodeIndex& m, CoefficientTable& t, std::size_t f) {
    NodeIndex up = m;
    double payout = 0.0;
    for (std::size_t i = 0; i < t.grid.dim(); ++i) {
        if (m[i] + 1 > t.grid.m_max[i]) payout += model.a[i] * t.grid.spacing(i);
        else up[i] = m[i] + 1;
    }
    t.up[f] = static_cast<std::uint32_t>(t.grid.flat(up));
    t.up_payout[f] = payout;
}

}  // namespace detail

/// Per-node T₀ data for one (model, grid) pair.
inline CoefficientTable precompute_coeffs(const ModelSpec& model, const GridSpec& grid, CoeffOptions opts = {}) {
    grid.validate();
    if (grid.dim() != model.dim()) throw ConfigError("grid: dimension does not match the model");
    const std::size_t nodes = grid.node_count();
    const double lam = model.lambda(), kappa = model.c + lam;

    CoefficientTable table;
    table.grid = grid;
    table.drift_factor = std::exp(-kappa * grid.delta);
    table.jump_mass_bound = lam * quad::exp_integral(kappa, grid.delta);
    table.constant.assign(nodes, 0.0);
    table.up.resize(nodes);
    table.up_payout.resize(nodes);

    const detail::CoefficientBuilder builder(model, grid, opts);
    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(nodes);
    std::vector<std::string> failures;

#pragma omp parallel
    {
        detail::RowBuilder rb;
#pragma omp for schedule(dynamic, 64)
        for (std::int64_t f = 0; f < static_cast<std::int64_t>(nodes); ++f) {
            try {
                const NodeIndex m = grid.unflat(static_cast<std::size_t>(f));
                rb.entries.clear();
                rb.constant = 0.0;
                builder.build_row(m, rb);
                rows[static_cast<std::size_t>(f)] = rb.entries;
                table.constant[static_cast<std::size_t>(f)] = rb.constant;

                detail::link_up(model, m, table, static_cast<std::size_t>(f));
            } catch (const std::exception& e) {
#pragma omp critical
                failures.emplace_back(e.what());
            }
        }
    }
    if (!failures.empty()) throw NumericError("precompute_coeffs: " + failures.front());

    table.row_start.resize(nodes + 1, 0);
    for (std::size_t f = 0; f < nodes; ++f) table.row_start[f + 1] = table.row_start[f] + rows[f].size();
    table.col.resize(table.row_start[nodes]);
    table.weight.resize(table.row_start[nodes]);
    for (std::size_t f = 0; f < nodes; ++f) {
        auto e = table.row_start[f];
        for (auto [k, w] : rows[f]) {
            table.col[e] = k;
            table.weight[e] = w;
            ++e;
        }
        std::vector<std::pair<std::uint32_t, double>>().swap(rows[f]);
    }
    return table;
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

namespace detail {

inline double t0_flat(const CoefficientTable& t, std::span<const double> w, std::size_t f) {
    double acc = t.drift_factor * (w[t.up[f]] + t.up_payout[f]) + t.constant[f];
    const auto end = t.row_start[f + 1];
    for (auto e = t.row_start[f]; e < end; ++e) acc += t.weight[e] * w[t.col[e]];
    return acc;
}

}  // namespace detail

/// T₀(w)(m): wait δ (or until the next claim), snap down after a claim.
inline double apply_T0(const CoefficientTable& coeffs, const ValueField& w, const NodeIndex& m) {
    return detail::t0_flat(coeffs, w.data, coeffs.grid.flat(m));
}

/// T_i(w)(m) = w(m − e_i) + δ a_i p_i; empty when m_i = 0 (action not applicable).
inline std::optional<double> apply_Ti(const ModelSpec& model, const ValueField& w, const NodeIndex& m, std::size_t i) {
    if (m[i] <= 0) return std::nullopt;
    NodeIndex prev = m;
    prev[i] -= 1;
    return w(prev) + w.grid.delta * model.a[i] * w.grid.premiums[i];
}

/// T_s(w)(m) = f(g^δ(m)), independent of w.
inline double apply_Ts(const ModelSpec& model, const GridSpec& grid, const NodeIndex& m) {
    return eval_obstacle(model.obstacle, to_point(grid, m));
}

struct TResult {
    double value;
    Action action;
};

/// Relative tolerance used to declare two operator values tied.
inline constexpr double kTieTolerance = 1e-10;

/// Picks the action under Switch ≻ NoAction ≻ PayDiv(1) ≻ … ≻ PayDiv(n)
/// among candidates within the tie tolerance of the maximum.
inline TResult select_action(double ts, double t0, std::span<const std::optional<double>> ti) {
    double best = std::max(ts, t0);
    for (const auto& v : ti)
        if (v) best = std::max(best, *v);
    const double tol = kTieTolerance * std::max(1.0, std::abs(best));
    if (ts >= best - tol) return {best, Action::sw()};
    if (t0 >= best - tol) return {best, Action::wait()};
    for (std::size_t i = 0; i < ti.size(); ++i)
        if (ti[i] && *ti[i] >= best - tol) return {best, Action::pay(i)};
    return {best, Action::wait()};
}

/// T(w)(m) = max{T₀, (T_i), T_s} and the action attaining it.
inline TResult apply_T(const CoefficientTable& coeffs, const ModelSpec& model, const GridSpec& grid,
                       const ValueField& w, const NodeIndex& m) {
    std::vector<std::optional<double>> ti(grid.dim());
    for (std::size_t i = 0; i < grid.dim(); ++i) ti[i] = apply_Ti(model, w, m, i);
    return select_action(apply_Ts(model, grid, m), apply_T0(coeffs, w, m), ti);
}

}  // namespace divswitch
