#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "divswitch/error.hpp"
#include "divswitch/grid.hpp"
#include "divswitch/model.hpp"
#include "divswitch/operators.hpp"
#include "divswitch/solver.hpp"

namespace divswitch {

/// Stand-alone company: no penalty, switching never pays.
inline ModelSpec one_company_model(double intensity, double premium, double c, const Marginal& marginal,
                                   double weight = 1.0) {
    ModelSpec m;
    m.n = 1;
    m.p = {premium};
    m.c = c;
    m.a = {weight};
    if (intensity > 0.0) m.claims.sources.push_back({intensity, {1.0}, marginal});
    m.penalty = ZeroPenalty{};
    m.obstacle = NeverSwitch{-10.0 * (weight * premium / c + 1.0)};
    validate(m, /*allow_no_claims=*/true);
    return m;
}

inline SolveOptions default_1d_options() {
    SolveOptions o;
    o.tol_iter = 1e-12;
    return o;
}

/// Value table of the one-company dividend problem on a 1-d grid of the given span.
inline ValueTable solve_1d(double intensity, double premium, double c, const Marginal& marginal, double delta,
                           double span, double weight = 1.0, const SolveOptions& opts = default_1d_options()) {
    const ModelSpec model = one_company_model(intensity, premium, c, marginal, weight);
    const Vec box{span};
    const GridSpec grid = grid_for_box(model, delta, box);
    const CoefficientTable coeffs = precompute_coeffs(model, grid);
    auto [v, rep] = value_iteration(model, coeffs, opts);
    std::vector<double> knots(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) knots[k] = grid.spacing(0) * static_cast<double>(k);
    return ValueTable(std::move(knots), std::move(v.data), weight);
}

struct MergerInputs {
    MergerObstacle obstacle;
    SurvivorValue penalty;
    double merged_intensity = 0.0;
    double merged_premium = 0.0;
    Marginal merged_marginal;
};

/// Parameters of the merged company: λ_M = Σλ, p_M = Σp, F_M(x) = F(x, …, x).
inline MergerInputs merged_parameters(const ModelSpec& model) {
    if (model.n != 2) throw ConfigError("merger: requires n = 2");
    std::vector<int> seen(2, 0);
    for (const auto& s : model.claims.sources) {
        const int ax = s.axis();
        if (ax < 0) throw ConfigError("merger: every claim source must hit a single company");
        ++seen[static_cast<std::size_t>(ax)];
    }
    if (seen[0] != 1 || seen[1] != 1) throw ConfigError("merger: expected one claim source per company");
    MergerInputs out;
    out.merged_intensity = model.lambda();
    out.merged_premium = model.p[0] + model.p[1];
    Mixture mix;
    for (const auto& s : model.claims.sources)
        for (const auto& part : simple_parts(s.marginal))
            mix.parts.push_back({s.intensity / out.merged_intensity * part.weight, part.law});
    out.merged_marginal = mix;
    return out;
}

/// V₁, V₂ and V_M by three 1-d solves; returns the merger obstacle and survivor penalty.
///
/// V_i spans `2·box_i`, V_M spans `4·|box|`. The merged company's dividend
/// weight is taken as the mean weight, which equals both weights when they agree.
inline MergerInputs build_merger_inputs(const ModelSpec& model, double merger_cost, double delta,
                                        std::span<const double> box, const SolveOptions& opts = default_1d_options()) {
    MergerInputs out = merged_parameters(model);
    if (box.size() != 2) throw ConfigError("merger: box must have two entries");
    if (!(merger_cost >= 0.0)) throw ConfigError("obstacle.c_M: must be >= 0");
    const double diag = std::hypot(box[0], box[1]);
    if (!(diag > 0.0)) throw ConfigError("merger: box must be non-empty");

    std::vector<ValueTable> single(2);
    for (int i = 0; i < 2; ++i) {
        const auto& s = *std::find_if(model.claims.sources.begin(), model.claims.sources.end(),
                                      [&](const ClaimSource& src) { return src.axis() == i; });
        const auto ii = static_cast<std::size_t>(i);
        single[ii] = solve_1d(s.intensity, model.p[ii], model.c, s.marginal, delta, 2.0 * box[ii], model.a[ii], opts);
    }
    const double a_m = 0.5 * (model.a[0] + model.a[1]);
    const ValueTable merged = solve_1d(out.merged_intensity, out.merged_premium, model.c, out.merged_marginal, delta,
                                       4.0 * diag, a_m, opts);
    if (merged.knots().back() < box[0] + box[1] - merger_cost)
        throw ConfigError("merger: merged-company grid does not cover the box; use a larger span");
    out.obstacle = MergerObstacle{merged, merger_cost};
    out.penalty = SurvivorValue{single};
    return out;
}

}  // namespace divswitch
