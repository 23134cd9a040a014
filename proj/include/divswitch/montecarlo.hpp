#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "divswitch/error.hpp"
#include "divswitch/grid.hpp"
#include "divswitch/model.hpp"
#include "divswitch/solver.hpp"

namespace divswitch {

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Engine for path `index` of a run seeded with `seed`: mt19937_64 seeded by
/// splitmix64(seed ⊕ splitmix64(index)).
inline std::mt19937_64 path_stream(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(index)));
}

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Vose alias table for a finite distribution.
class AliasTable {
public:
    AliasTable() = default;
    explicit AliasTable(std::span<const double> prob) : p_(prob.size()), alias_(prob.size()) {
        const std::size_t n = prob.size();
        double total = 0.0;
        for (double x : prob) total += x;
        std::vector<double> scaled(n);
        std::vector<std::size_t> small, large;
        for (std::size_t i = 0; i < n; ++i) {
            scaled[i] = prob[i] / total * static_cast<double>(n);
            (scaled[i] < 1.0 ? small : large).push_back(i);
        }
        while (!small.empty() && !large.empty()) {
            const std::size_t s = small.back(), l = large.back();
            small.pop_back();
            p_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        for (auto i : large) p_[i] = 1.0, alias_[i] = i;
        for (auto i : small) p_[i] = 1.0, alias_[i] = i;
    }

    std::size_t sample(std::mt19937_64& rng) const {
        const double u = uniform01(rng) * static_cast<double>(p_.size());
        auto i = static_cast<std::size_t>(u);
        if (i >= p_.size()) i = p_.size() - 1;
        return (u - static_cast<double>(i) < p_[i]) ? i : alias_[i];
    }

private:
    std::vector<double> p_;
    std::vector<std::size_t> alias_;
};

/// Draws (source, α = β·a_l) from the claim model.
class ClaimSampler {
public:
    struct Draw {
        std::size_t source;
        Vec alpha;
    };

    explicit ClaimSampler(const ClaimModel& claims) : claims_(claims) {
        Vec w;
        for (const auto& s : claims.sources) {
            w.push_back(s.intensity);
            auto parts = simple_parts(s.marginal);
            Vec pw;
            std::vector<AliasTable> atoms;
            for (const auto& part : parts) {
                pw.push_back(part.weight);
                if (auto em = std::get_if<Empirical>(&part.law)) atoms.emplace_back(em->prob);
                else atoms.emplace_back();
            }
            parts_.push_back(std::move(parts));
            part_pick_.emplace_back(pw);
            atom_pick_.push_back(std::move(atoms));
        }
        if (!w.empty()) source_pick_ = AliasTable(w);
    }

    double sample_size(std::size_t l, std::mt19937_64& rng) const {
        const std::size_t k = parts_[l].size() == 1 ? 0 : part_pick_[l].sample(rng);
        const auto& law = parts_[l][k].law;
        if (auto e = std::get_if<Exponential>(&law)) return -std::log1p(-uniform01(rng)) / e->rate;
        return std::get<Empirical>(law).support[atom_pick_[l][k].sample(rng)];
    }

    Draw sample(std::mt19937_64& rng) const {
        const std::size_t l = claims_.sources.size() == 1 ? 0 : source_pick_.sample(rng);
        const double beta = sample_size(l, rng);
        Vec alpha(claims_.sources[l].allocation);
        for (double& x : alpha) x *= beta;
        return {l, std::move(alpha)};
    }

private:
    const ClaimModel& claims_;
    AliasTable source_pick_;
    std::vector<std::vector<MixturePart>> parts_;
    std::vector<AliasTable> part_pick_;
    std::vector<std::vector<AliasTable>> atom_pick_;
};

inline ClaimSampler::Draw sample_claim(const ClaimSampler& sampler, std::mt19937_64& rng) { return sampler.sample(rng); }

// ---------------------------------------------------------------------------
// Policy simulation
// ---------------------------------------------------------------------------

struct SimConfig {
    std::size_t paths = 200'000;
    double horizon = 0.0;  // ≤ 0: ln(1e4)/c
    std::uint64_t seed = 1;
    NodeIndex start;
    /// Bound on |value| used for the reported horizon bias e^{-c·horizon}·bound.
    double value_bound = 0.0;
};

struct SimResult {
    double mean = 0.0;
    double std_error = 0.0;
    double dividends = 0.0;
    double switch_value = 0.0;
    double penalty = 0.0;
    std::size_t paths = 0;
    double horizon = 0.0;
    double horizon_bias = 0.0;
    std::size_t horizon_stops = 0;
    std::size_t off_box_moves = 0;
};

/// One event on a simulated path, for audits of the dividend stream.
struct PathEvent {
    enum Kind { Pay, Overshoot, Boundary, Switch, Ruin } kind;
    double time;
    double amount;      // undiscounted
    double surplus;     // a·x just before the event
};

struct PathOutcome {
    double dividends = 0.0, switch_value = 0.0, penalty = 0.0;
    bool hit_horizon = false;
    std::size_t off_box = 0;
    double total() const { return dividends + switch_value + penalty; }
};

inline double default_horizon(const ModelSpec& model) { return std::log(1e4) / model.c; }

inline PathOutcome simulate_path(const ModelSpec& model, const PolicyField& policy, const ClaimSampler& sampler,
                                 const NodeIndex& start, double horizon, std::mt19937_64& rng,
                                 std::vector<PathEvent>* trace = nullptr) {
    const GridSpec& g = policy.grid;
    const std::size_t n = g.dim();
    const double lam = model.lambda();
    NodeIndex m = start;
    double t = 0.0;
    PathOutcome out;
    auto weighted = [&](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += model.a[i] * x[i];
        return s;
    };
    while (true) {
        if (t >= horizon) {
            out.hit_horizon = true;
            return out;
        }
        const Action act = policy(m);
        if (act.kind == Action::Switch) {
            const Vec x = to_point(g, m);
            const double f = eval_obstacle(model.obstacle, x);
            out.switch_value += std::exp(-model.c * t) * f;
            if (trace) trace->push_back({PathEvent::Switch, t, f, weighted(x)});
            return out;
        }
        if (act.kind == Action::PayDiv) {
            const std::size_t i = act.axis;
            if (i >= n || m[i] <= 0) throw ConfigError("simulate: policy pays dividends from an empty coordinate");
            const double amount = model.a[i] * g.spacing(i);
            if (trace) trace->push_back({PathEvent::Pay, t, amount, weighted(to_point(g, m))});
            out.dividends += std::exp(-model.c * t) * amount;
            m[i] -= 1;
            continue;
        }
        const double tau = lam > 0.0 ? -std::log1p(-uniform01(rng)) / lam : std::numeric_limits<double>::infinity();
        if (tau >= g.delta) {
            t += g.delta;
            double extra = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (m[i] + 1 > g.m_max[i]) extra += model.a[i] * g.spacing(i);
                else m[i] += 1;
            }
            if (extra > 0.0) {
                ++out.off_box;
                if (trace) trace->push_back({PathEvent::Boundary, t, extra, weighted(to_point(g, m)) + extra});
                out.dividends += std::exp(-model.c * t) * extra;
            }
            continue;
        }
        t += tau;
        Vec y = to_point(g, m);
        for (std::size_t i = 0; i < n; ++i) y[i] += tau * g.premiums[i];
        const auto draw = sampler.sample(rng);
        Vec z(n);
        bool ruin = false;
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = y[i] - draw.alpha[i];
            if (z[i] < 0.0) ruin = true;
        }
        const double disc = std::exp(-model.c * t);
        if (ruin) {
            const double u = eval_penalty(model.penalty, model.claims, y, draw.alpha);
            out.penalty -= disc * u;
            if (trace) trace->push_back({PathEvent::Ruin, t, -u, weighted(y)});
            return out;
        }
        m = to_index(g, z);
        const Vec node = to_point(g, m);
        double over = 0.0;
        for (std::size_t i = 0; i < n; ++i) over += model.a[i] * (z[i] - node[i]);
        if (trace) trace->push_back({PathEvent::Overshoot, t, over, weighted(z)});
        out.dividends += disc * over;
    }
}

namespace detail {

/// Pairwise (cascade) summation.
inline double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 16) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    const std::size_t h = x.size() / 2;
    return pairwise_sum(x.first(h)) + pairwise_sum(x.subspan(h));
}

struct MeanSe {
    double mean, se;
};

inline MeanSe mean_se(std::span<const double> x) {
    const double mean = pairwise_sum(x) / static_cast<double>(x.size());
    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - mean) * (x[i] - mean);
    const double var = x.size() > 1 ? pairwise_sum(sq) / static_cast<double>(x.size() - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(x.size()))};
}

}  // namespace detail

/// Estimates V_π(g(start)) for the stationary policy `policy`.
inline SimResult simulate_policy(const ModelSpec& model, const PolicyField& policy, const SimConfig& cfg) {
    const GridSpec& g = policy.grid;
    if (cfg.start.size() != g.dim() || !g.contains(cfg.start))
        throw ConfigError("simulate: start node outside the grid");
    if (cfg.paths == 0) throw ConfigError("simulate: paths must be >= 1");
    const double horizon = cfg.horizon > 0.0 ? cfg.horizon : default_horizon(model);
    const ClaimSampler sampler(model.claims);

    std::vector<double> total(cfg.paths), div(cfg.paths), sw(cfg.paths), pen(cfg.paths);
    std::size_t stops = 0, off_box = 0;
    std::string failure;
    const auto paths = static_cast<std::int64_t>(cfg.paths);
#pragma omp parallel for schedule(dynamic, 256) reduction(+ : stops, off_box)
    for (std::int64_t k = 0; k < paths; ++k) {
        try {
            auto rng = path_stream(cfg.seed, static_cast<std::uint64_t>(k));
            const auto o = simulate_path(model, policy, sampler, cfg.start, horizon, rng);
            const auto i = static_cast<std::size_t>(k);
            total[i] = o.total();
            div[i] = o.dividends;
            sw[i] = o.switch_value;
            pen[i] = o.penalty;
            stops += o.hit_horizon ? 1 : 0;
            off_box += o.off_box;
        } catch (const std::exception& e) {
#pragma omp critical
            if (failure.empty()) failure = e.what();
        }
    }
    if (!failure.empty()) throw ConfigError(failure);

    SimResult r;
    const auto ms = detail::mean_se(total);
    r.mean = ms.mean;
    r.std_error = ms.se;
    r.dividends = detail::pairwise_sum(div) / static_cast<double>(cfg.paths);
    r.switch_value = detail::pairwise_sum(sw) / static_cast<double>(cfg.paths);
    r.penalty = detail::pairwise_sum(pen) / static_cast<double>(cfg.paths);
    r.paths = cfg.paths;
    r.horizon = horizon;
    r.horizon_bias = std::exp(-model.c * horizon) * cfg.value_bound;
    r.horizon_stops = stops;
    r.off_box_moves = off_box;
    return r;
}

/// Monte Carlo estimate of T₀(w)(m): one E₀ step followed by w at the landing node.
inline detail::MeanSe simulate_T0_step(const ModelSpec& model, const ValueField& w, const NodeIndex& m,
                                       std::size_t samples, std::uint64_t seed) {
    const GridSpec& g = w.grid;
    const std::size_t n = g.dim();
    const double lam = model.lambda();
    const ClaimSampler sampler(model.claims);
    std::vector<double> vals(samples);
    const auto count = static_cast<std::int64_t>(samples);
#pragma omp parallel for schedule(static)
    for (std::int64_t k = 0; k < count; ++k) {
        auto rng = path_stream(seed, static_cast<std::uint64_t>(k));
        const double tau = lam > 0.0 ? -std::log1p(-uniform01(rng)) / lam : std::numeric_limits<double>::infinity();
        double v;
        if (tau >= g.delta) {
            NodeIndex up = m;
            for (auto& x : up.m) x += 1;
            v = std::exp(-model.c * g.delta) * clamp_extrapolate(g, w, model.a, up);
        } else {
            Vec y = to_point(g, m);
            for (std::size_t i = 0; i < n; ++i) y[i] += tau * g.premiums[i];
            const auto draw = sampler.sample(rng);
            Vec z(n);
            bool ruin = false;
            for (std::size_t i = 0; i < n; ++i) {
                z[i] = y[i] - draw.alpha[i];
                if (z[i] < 0.0) ruin = true;
            }
            if (ruin) {
                v = -std::exp(-model.c * tau) * eval_penalty(model.penalty, model.claims, y, draw.alpha);
            } else {
                const NodeIndex kk = to_index(g, z);
                const Vec node = to_point(g, kk);
                double over = 0.0;
                for (std::size_t i = 0; i < n; ++i) over += model.a[i] * (z[i] - node[i]);
                v = std::exp(-model.c * tau) * (w(kk) + over);
            }
        }
        vals[static_cast<std::size_t>(k)] = v;
    }
    return detail::mean_se(vals);
}

}  // namespace divswitch
