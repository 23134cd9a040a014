#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "divswitch/error.hpp"
#include "divswitch/quadrature.hpp"
#include "divswitch/table.hpp"

namespace divswitch {

using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// One-dimensional claim-size laws
// ---------------------------------------------------------------------------

struct Exponential {
    double rate = 1.0;
};

/// Finitely many atoms: strictly increasing positive support with probabilities.
struct Empirical {
    Vec support;
    Vec prob;
};

using SimpleLaw = std::variant<Exponential, Empirical>;

struct MixturePart {
    double weight = 1.0;
    SimpleLaw law;
};

/// Finite mixture of simple laws; weights sum to one.
struct Mixture {
    std::vector<MixturePart> parts;
};

using Marginal = std::variant<Exponential, Empirical, Mixture>;

namespace law {

inline double cdf(const SimpleLaw& l, double x) {
    if (x <= 0.0) return 0.0;
    if (auto e = std::get_if<Exponential>(&l)) return -std::expm1(-e->rate * x);
    const auto& em = std::get<Empirical>(l);
    double acc = 0.0;
    for (std::size_t i = 0; i < em.support.size() && em.support[i] <= x; ++i) acc += em.prob[i];
    return std::min(acc, 1.0);
}

/// P(β > x)
inline double tail(const SimpleLaw& l, double x) {
    if (x <= 0.0) return 1.0;
    if (auto e = std::get_if<Exponential>(&l)) return std::exp(-e->rate * x);
    const auto& em = std::get<Empirical>(l);
    double acc = 0.0;
    for (std::size_t i = em.support.size(); i-- > 0 && em.support[i] > x;) acc += em.prob[i];
    return acc;
}

inline double mean(const SimpleLaw& l) {
    if (auto e = std::get_if<Exponential>(&l)) return 1.0 / e->rate;
    const auto& em = std::get<Empirical>(l);
    return std::inner_product(em.support.begin(), em.support.end(), em.prob.begin(), 0.0);
}

/// ∫_{β > lower} g(β) dF(β)
/// ∫_{β > lower} g(β) dF(β); `kinks` are points above `lower` where g is not smooth.
template <class G>
double tail_expectation(const SimpleLaw& l, double lower, G&& g, std::vector<double> kinks = {}) {
    lower = std::max(lower, 0.0);
    if (auto e = std::get_if<Exponential>(&l)) {
        const double d = e->rate;
        std::erase_if(kinks, [&](double k) { return !(k > lower); });
        double start = lower, acc = 0.0;
        if (!kinks.empty()) {
            start = *std::max_element(kinks.begin(), kinks.end());
            acc = quad::piecewise_gauss([&](double b) { return g(b) * d * std::exp(-d * b); }, lower, start, kinks);
        }
        const double mass = std::exp(-d * start);
        if (mass == 0.0) return acc;
        return acc + mass * quad::exponential_expectation([&](double s) { return g(start + s); }, d);
    }
    const auto& em = std::get<Empirical>(l);
    double acc = 0.0;
    for (std::size_t i = 0; i < em.support.size(); ++i)
        if (em.support[i] > lower) acc += em.prob[i] * g(em.support[i]);
    return acc;
}

}  // namespace law

/// Flatten any marginal into weighted simple laws.
inline std::vector<MixturePart> simple_parts(const Marginal& m) {
    if (auto e = std::get_if<Exponential>(&m)) return {{1.0, *e}};
    if (auto em = std::get_if<Empirical>(&m)) return {{1.0, *em}};
    return std::get<Mixture>(m).parts;
}

inline double marginal_cdf(const Marginal& m, double x) {
    double acc = 0.0;
    for (const auto& part : simple_parts(m)) acc += part.weight * law::cdf(part.law, x);
    return acc;
}

inline double marginal_tail(const Marginal& m, double x) {
    double acc = 0.0;
    for (const auto& part : simple_parts(m)) acc += part.weight * law::tail(part.law, x);
    return acc;
}

inline double marginal_mean(const Marginal& m) {
    double acc = 0.0;
    for (const auto& part : simple_parts(m)) acc += part.weight * law::mean(part.law);
    return acc;
}

// ---------------------------------------------------------------------------
// Claim model: independent sources shared through an allocation matrix
// ---------------------------------------------------------------------------

/// Independent compound Poisson source whose claims β are split between the
/// companies in the fixed proportions `allocation` (a column of the matrix A).
struct ClaimSource {
    double intensity = 1.0;
    Vec allocation;
    Marginal marginal = Exponential{1.0};

    /// Axis index if the whole claim goes to one company, otherwise -1.
    int axis() const {
        int found = -1;
        for (std::size_t i = 0; i < allocation.size(); ++i) {
            if (allocation[i] == 1.0) found = static_cast<int>(i);
            else if (allocation[i] != 0.0) return -1;
        }
        return found;
    }

    /// Largest β keeping y − β·allocation in the orthant.
    double ruin_threshold(std::span<const double> y) const {
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < allocation.size(); ++i)
            if (allocation[i] > 0.0) b = std::min(b, y[i] / allocation[i]);
        return b;
    }
};

struct ClaimModel {
    std::vector<ClaimSource> sources;
};

inline double total_intensity(const ClaimModel& claims) {
    double lam = 0.0;
    for (const auto& s : claims.sources) lam += s.intensity;
    return lam;
}

inline void require_nonnegative(std::span<const double> x, const char* what) {
    for (double xi : x)
        if (!(xi >= 0.0)) throw DomainError(std::string(what) + ": coordinate outside the nonnegative orthant");
}

/// Joint claim CDF F(x) = Σ (λ_l/λ) F_l(min_{a_il≠0} x_i / a_il).
inline double eval_cdf(const ClaimModel& claims, std::span<const double> x) {
    require_nonnegative(x, "eval_cdf");
    const double lam = total_intensity(claims);
    if (lam <= 0.0) return 0.0;
    double acc = 0.0;
    for (const auto& s : claims.sources) acc += s.intensity / lam * marginal_cdf(s.marginal, s.ruin_threshold(x));
    return acc;
}

// ---------------------------------------------------------------------------
// Penalty at ruin υ(x, α), defined on B = {(x, α) : x − α ∉ R₊ⁿ}
// ---------------------------------------------------------------------------

struct ZeroPenalty {};

struct ConstantPenalty {
    double value = 0.0;
};

/// υ(x, α) = υ_l(D) when α lies on the ray of source l, where
/// D = Σ_i max(0, α_i − x_i) is the total shortfall; 0 off every ray.
/// Each υ_l must be non-decreasing.
struct DeficitPerSource {
    std::vector<std::function<double(double)>> per_source;
};

/// Two companies: when one is ruined the other keeps its stand-alone value,
/// υ(x, α) = −(V₂(x₂)·1{x₁<α₁} + V₁(x₁)·1{x₂<α₂}).
struct SurvivorValue {
    std::vector<ValueTable> tables;  // tables[i] = V_{i+1}
};

struct CustomPenalty {
    std::function<double(std::span<const double>, std::span<const double>)> fn;
};

using PenaltySpec = std::variant<ZeroPenalty, ConstantPenalty, DeficitPerSource, SurvivorValue, CustomPenalty>;

// ---------------------------------------------------------------------------
// Switch value (obstacle) f
// ---------------------------------------------------------------------------

struct NeverSwitch {
    double value = -1e3;
};

/// f(x) = V_M(Σx − c_M)·1{Σx ≥ c_M}
struct MergerObstacle {
    ValueTable merged;
    double cost = 0.0;
};

struct CustomObstacle {
    std::function<double(std::span<const double>)> fn;
};

using ObstacleSpec = std::variant<NeverSwitch, MergerObstacle, CustomObstacle>;

// ---------------------------------------------------------------------------
// Problem instance
// ---------------------------------------------------------------------------

struct ModelSpec {
    int n = 1;
    Vec p;  // premium rates
    double c = 0.1;
    Vec a;  // dividend weights
    ClaimModel claims;
    PenaltySpec penalty = ZeroPenalty{};
    ObstacleSpec obstacle = NeverSwitch{};

    std::size_t dim() const { return static_cast<std::size_t>(n); }
    double lambda() const { return total_intensity(claims); }
};

inline double eval_obstacle(const ObstacleSpec& obstacle, std::span<const double> x) {
    return std::visit(
        [&](const auto& o) -> double {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, NeverSwitch>) {
                return o.value;
            } else if constexpr (std::is_same_v<T, MergerObstacle>) {
                const double total = std::accumulate(x.begin(), x.end(), 0.0);
                return total >= o.cost ? o.merged(total - o.cost) : 0.0;
            } else {
                return o.fn(x);
            }
        },
        obstacle);
}

namespace detail {

/// Index of the source whose ray carries α, or -1.
inline int source_of(const ClaimModel& claims, std::span<const double> alpha) {
    for (std::size_t l = 0; l < claims.sources.size(); ++l) {
        const auto& col = claims.sources[l].allocation;
        double beta = -1.0;
        bool ok = true;
        for (std::size_t i = 0; i < col.size() && ok; ++i) {
            if (col[i] == 0.0) {
                ok = alpha[i] == 0.0;
            } else {
                const double b = alpha[i] / col[i];
                if (beta < 0.0) beta = b;
                else ok = std::abs(b - beta) <= 1e-12 * std::max(1.0, std::abs(beta));
            }
        }
        if (ok && beta > 0.0) return static_cast<int>(l);
    }
    return -1;
}

inline double shortfall(std::span<const double> x, std::span<const double> alpha) {
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d += std::max(0.0, alpha[i] - x[i]);
    return d;
}

inline double survivor_value(const SurvivorValue& s, std::span<const double> x, std::span<const double> alpha) {
    double v = 0.0;
    if (x[0] < alpha[0]) v -= s.tables[1](x[1]);
    if (x[1] < alpha[1]) v -= s.tables[0](x[0]);
    return v;
}

}  // namespace detail

inline bool in_ruin_set(std::span<const double> x, std::span<const double> alpha) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] - alpha[i] < 0.0) return true;
    return false;
}

/// υ(x, α). Throws DomainError when (x, α) ∉ B.
inline double eval_penalty(const PenaltySpec& penalty, const ClaimModel& claims, std::span<const double> x,
                           std::span<const double> alpha) {
    require_nonnegative(x, "eval_penalty");
    require_nonnegative(alpha, "eval_penalty");
    if (!in_ruin_set(x, alpha)) throw DomainError("eval_penalty: x − α lies in the orthant (not a ruin event)");
    return std::visit(
        [&](const auto& pen) -> double {
            using T = std::decay_t<decltype(pen)>;
            if constexpr (std::is_same_v<T, ZeroPenalty>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, ConstantPenalty>) {
                return pen.value;
            } else if constexpr (std::is_same_v<T, DeficitPerSource>) {
                const int l = detail::source_of(claims, alpha);
                if (l < 0) return 0.0;
                return pen.per_source.at(static_cast<std::size_t>(l))(detail::shortfall(x, alpha));
            } else if constexpr (std::is_same_v<T, SurvivorValue>) {
                return detail::survivor_value(pen, x, alpha);
            } else {
                return pen.fn(x, alpha);
            }
        },
        penalty);
}

/// ∫_{β > β_max(y)} υ(y, β·a_l) dF_l(β) for one source (no intensity factor).
inline double ray_penalty_integral(const ModelSpec& model, std::size_t l, std::span<const double> y) {
    const auto& src = model.claims.sources[l];
    const auto& col = src.allocation;
    const double bmax = src.ruin_threshold(y);
    return std::visit(
        [&](const auto& pen) -> double {
            using T = std::decay_t<decltype(pen)>;
            if constexpr (std::is_same_v<T, ZeroPenalty>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, ConstantPenalty>) {
                return pen.value * marginal_tail(src.marginal, bmax);
            } else if constexpr (std::is_same_v<T, SurvivorValue>) {
                double acc = 0.0;
                if (col[0] > 0.0) acc -= pen.tables[1](y[1]) * marginal_tail(src.marginal, y[0] / col[0]);
                if (col[1] > 0.0) acc -= pen.tables[0](y[0]) * marginal_tail(src.marginal, y[1] / col[1]);
                return acc;
            } else {
                Vec alpha(col.size());
                auto integrand = [&](double beta) {
                    for (std::size_t i = 0; i < col.size(); ++i) alpha[i] = beta * col[i];
                    if constexpr (std::is_same_v<T, DeficitPerSource>)
                        return pen.per_source.at(l)(detail::shortfall(y, alpha));
                    else
                        return pen.fn(y, alpha);
                };
                // each further coordinate going negative is a kink of the integrand
                std::vector<double> kinks;
                for (std::size_t i = 0; i < col.size(); ++i)
                    if (col[i] > 0.0) kinks.push_back(y[i] / col[i]);
                double acc = 0.0;
                for (const auto& part : simple_parts(src.marginal))
                    acc += part.weight * law::tail_expectation(part.law, bmax, integrand, kinks);
                return acc;
            }
        },
        model.penalty);
}

/// R(x) = λ ∫_{x−α ∉ R₊ⁿ} υ(x, α) dF(α) = Σ_l λ_l ∫_{β>β_max} υ(x, β a_l) dF_l(β).
inline double eval_R(const ModelSpec& model, std::span<const double> x) {
    require_nonnegative(x, "eval_R");
    double acc = 0.0;
    for (std::size_t l = 0; l < model.claims.sources.size(); ++l)
        acc += model.claims.sources[l].intensity * ray_penalty_integral(model, l, x);
    if (!std::isfinite(acc)) throw NumericError("eval_R: penalty integral is not finite");
    return acc;
}

/// Points in (lo, hi) along coordinate i where R may have a kink.
inline std::vector<double> penalty_kinks(const ModelSpec& model, std::size_t i, double lo, double hi) {
    if (auto s = std::get_if<SurvivorValue>(&model.penalty)) return s->tables.at(i).knots_between(lo, hi);
    return {};
}

/// h₀(x) = exp((c / 2n) Σ x_i / p_i)
inline double growth_bound(const ModelSpec& model, std::span<const double> x) {
    double e = 0.0;
    for (std::size_t i = 0; i < model.dim(); ++i) e += x[i] / model.p[i];
    return std::exp(model.c / (2.0 * model.n) * e);
}

/// E|υ(0, U₁)|, the lower bound magnitude of the value function.
inline double expected_abs_penalty_at_zero(const ModelSpec& model) {
    const double lam = model.lambda();
    if (lam <= 0.0) return 0.0;
    const Vec zero(model.dim(), 0.0);
    double acc = 0.0;
    for (std::size_t l = 0; l < model.claims.sources.size(); ++l) {
        const auto& src = model.claims.sources[l];
        double e = std::visit(
            [&](const auto& pen) -> double {
                using T = std::decay_t<decltype(pen)>;
                if constexpr (std::is_same_v<T, ZeroPenalty>) {
                    return 0.0;
                } else if constexpr (std::is_same_v<T, ConstantPenalty>) {
                    return std::abs(pen.value);
                } else if constexpr (std::is_same_v<T, SurvivorValue>) {
                    // every coordinate carried by the source is ruined from the origin
                    double v = 0.0;
                    if (src.allocation[0] > 0.0) v += pen.tables[1](0.0);
                    if (src.allocation[1] > 0.0) v += pen.tables[0](0.0);
                    return std::abs(v);
                } else {
                    Vec alpha(model.dim());
                    auto integrand = [&](double beta) {
                        for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] = beta * src.allocation[i];
                        if constexpr (std::is_same_v<T, DeficitPerSource>)
                            return std::abs(pen.per_source.at(l)(detail::shortfall(zero, alpha)));
                        else
                            return std::abs(pen.fn(zero, alpha));
                    };
                    double s = 0.0;
                    for (const auto& part : simple_parts(src.marginal))
                        s += part.weight * law::tail_expectation(part.law, 0.0, integrand);
                    return s;
                }
            },
            model.penalty);
        acc += src.intensity / lam * e;
    }
    return acc;
}

/// Switch value that is never worth taking: −10·(1 + E|υ(0, U₁)|).
inline double default_never_switch(const ModelSpec& model) {
    return -10.0 * (1.0 + expected_abs_penalty_at_zero(model));
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace detail {

inline void validate_law(const SimpleLaw& l, const std::string& key) {
    if (auto e = std::get_if<Exponential>(&l)) {
        if (!(e->rate > 0.0) || !std::isfinite(e->rate)) throw ConfigError(key + ".rate: must be > 0");
        return;
    }
    const auto& em = std::get<Empirical>(l);
    if (em.support.empty() || em.support.size() != em.prob.size())
        throw ConfigError(key + ".atoms: support and probabilities must be non-empty and equal length");
    double total = 0.0;
    for (std::size_t i = 0; i < em.support.size(); ++i) {
        if (!(em.support[i] > 0.0)) throw ConfigError(key + ".atoms: support must be > 0 (no mass at zero)");
        if (i > 0 && !(em.support[i] > em.support[i - 1]))
            throw ConfigError(key + ".atoms: support must be strictly increasing");
        if (!(em.prob[i] >= 0.0)) throw ConfigError(key + ".atoms: probabilities must be >= 0");
        total += em.prob[i];
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError(key + ".atoms: probabilities must sum to 1");
}

}  // namespace detail

/// Checks every ModelSpec invariant; `allow_no_claims` admits the degenerate λ = 0 model.
inline void validate(const ModelSpec& m, bool allow_no_claims = false) {
    if (m.n < 1) throw ConfigError("n: must be >= 1");
    if (m.p.size() != m.dim()) throw ConfigError("p: expected n entries");
    if (m.a.size() != m.dim()) throw ConfigError("a: expected n entries");
    for (std::size_t i = 0; i < m.dim(); ++i) {
        if (!(m.p[i] > 0.0)) throw ConfigError("p[" + std::to_string(i) + "]: must be > 0");
        if (!(m.a[i] > 0.0)) throw ConfigError("a[" + std::to_string(i) + "]: must be > 0");
    }
    if (!(m.c > 0.0)) throw ConfigError("c: must be > 0");
    if (m.claims.sources.empty() && !allow_no_claims) throw ConfigError("sources: at least one claim source required");
    for (std::size_t l = 0; l < m.claims.sources.size(); ++l) {
        const auto& s = m.claims.sources[l];
        const std::string key = "sources[" + std::to_string(l) + "]";
        if (!(s.intensity > 0.0)) throw ConfigError(key + ".intensity: must be > 0");
        if (s.allocation.size() != m.dim()) throw ConfigError(key + ".allocation: expected n entries");
        double sum = 0.0;
        for (double v : s.allocation) {
            if (!(v >= 0.0)) throw ConfigError(key + ".allocation: entries must be >= 0");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw ConfigError(key + ".allocation: entries must sum to 1");
        for (std::size_t o = 0; o < l; ++o)
            if (m.claims.sources[o].allocation == s.allocation)
                throw ConfigError(key + ".allocation: duplicates the column of sources[" + std::to_string(o) + "]");
        if (auto mix = std::get_if<Mixture>(&s.marginal)) {
            double w = 0.0;
            for (std::size_t k = 0; k < mix->parts.size(); ++k) {
                if (!(mix->parts[k].weight >= 0.0)) throw ConfigError(key + ".marginal.parts: weight must be >= 0");
                w += mix->parts[k].weight;
                detail::validate_law(mix->parts[k].law, key + ".marginal.parts[" + std::to_string(k) + "]");
            }
            if (mix->parts.empty() || std::abs(w - 1.0) > 1e-12)
                throw ConfigError(key + ".marginal.parts: weights must sum to 1");
        } else if (auto e = std::get_if<Exponential>(&s.marginal)) {
            detail::validate_law(*e, key + ".marginal");
        } else {
            detail::validate_law(std::get<Empirical>(s.marginal), key + ".marginal");
        }
    }
    if (auto sv = std::get_if<SurvivorValue>(&m.penalty)) {
        if (m.n != 2) throw ConfigError("penalty.kind: survivor penalty requires n = 2");
        if (sv->tables.size() != 2) throw ConfigError("penalty.tables: expected two value tables");
    }
    if (auto d = std::get_if<DeficitPerSource>(&m.penalty)) {
        if (d->per_source.size() != m.claims.sources.size())
            throw ConfigError("penalty.per_source: expected one function per claim source");
    }
    if (auto mo = std::get_if<MergerObstacle>(&m.obstacle)) {
        if (!(mo->cost >= 0.0)) throw ConfigError("obstacle.c_M: must be >= 0");
        if (mo->merged.empty()) throw ConfigError("obstacle.table: merged value table missing");
    }
    if (auto ns = std::get_if<NeverSwitch>(&m.obstacle)) {
        if (!(ns->value < -expected_abs_penalty_at_zero(m)))
            throw ConfigError("obstacle.value: never-switch constant must lie below -E|υ(0,U)|");
    }
}

}  // namespace divswitch
