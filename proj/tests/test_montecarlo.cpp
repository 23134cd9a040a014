#include <gtest/gtest.h>

#include "support.hpp"

using namespace divswitch;
using namespace testing_support;

namespace {

ModelSpec survivor_model() {
    ModelSpec m = two_company();
    m.penalty = SurvivorValue{{linear_table(0.8, 1, 8), linear_table(0.5, 1, 8)}};
    m.obstacle = CustomObstacle{[](std::span<const double> x) { return 0.9 * (x[0] + x[1]) + 0.6; }};
    return m;
}

}  // namespace

TEST(AliasTable, MatchesProbabilities) {
    const Vec p{0.1, 0.0, 0.25, 0.65};
    const AliasTable t(p);
    std::mt19937_64 rng(4);
    std::vector<std::size_t> count(4, 0);
    const std::size_t n = 400000;
    for (std::size_t k = 0; k < n; ++k) ++count[t.sample(rng)];
    EXPECT_EQ(count[1], 0u);
    for (std::size_t i : {0u, 2u, 3u}) {
        const double se = std::sqrt(p[i] * (1 - p[i]) / n);
        EXPECT_NEAR(static_cast<double>(count[i]) / n, p[i], 4.5 * se);
    }
}

TEST(ClaimSampler, SourceFrequenciesAndSizes) {
    ClaimModel claims;
    claims.sources = {{2.4, {1, 0}, Exponential{3}},
                      {1.0, {0.5, 0.5}, Empirical{{0.2, 1.0}, {0.75, 0.25}}},
                      {0.6, {0, 1}, Mixture{{{0.5, Exponential{1}}, {0.5, Exponential{4}}}}}};
    const ClaimSampler s(claims);
    std::mt19937_64 rng(8);
    const std::size_t n = 300000;
    std::vector<double> freq(3, 0.0), sum(3, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const auto d = sample_claim(s, rng);
        freq[d.source] += 1;
        const Vec& col = claims.sources[d.source].allocation;
        const std::size_t axis = col[0] > 0 ? 0 : 1;
        sum[d.source] += d.alpha[axis] / col[axis];
    }
    const double lam = 4.0;
    const Vec expect_p{2.4 / lam, 1.0 / lam, 0.6 / lam};
    const Vec expect_mean{1.0 / 3, 0.75 * 0.2 + 0.25, 0.5 * 1 + 0.5 * 0.25};
    const Vec sd{1.0 / 3, std::sqrt(0.75 * 0.04 + 0.25 - 0.4 * 0.4), std::sqrt(0.5 * 2 + 0.5 * 2 / 16.0 - 0.625 * 0.625)};
    for (std::size_t l = 0; l < 3; ++l) {
        EXPECT_NEAR(freq[l] / n, expect_p[l], 4.5 * std::sqrt(expect_p[l] * (1 - expect_p[l]) / n));
        EXPECT_NEAR(sum[l] / freq[l], expect_mean[l], 4.5 * sd[l] / std::sqrt(freq[l]));
    }
}

TEST(PathStream, ReproducibleAndDistinct) {
    auto a = path_stream(7, 3), b = path_stream(7, 3), c = path_stream(7, 4), d = path_stream(8, 3);
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
    EXPECT_NE(x, d());
    std::mt19937_64 r(1);
    for (int k = 0; k < 1000; ++k) {
        const double u = uniform01(r);
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(SimulatePolicy, SwitchEverywhereIsDeterministic) {
    const ModelSpec m = survivor_model();
    const GridSpec g{0.1, {10, 10}, m.p};
    const PolicyField pol{g, std::vector<Action>(g.node_count(), Action::sw())};
    SimConfig cfg;
    cfg.paths = 500;
    cfg.start = NodeIndex{4, 7};
    const SimResult r = simulate_policy(m, pol, cfg);
    EXPECT_DOUBLE_EQ(r.mean, eval_obstacle(m.obstacle, to_point(g, cfg.start)));
    EXPECT_EQ(r.std_error, 0.0);
    EXPECT_EQ(r.dividends, 0.0);
}

TEST(SimulatePolicy, NoClaimsDividendStream) {
    ModelSpec m;
    m.n = 1;
    m.p = {1.2};
    m.c = 0.1;
    m.a = {1.0};
    m.obstacle = NeverSwitch{-100};
    const GridSpec g{0.1, {20}, m.p};
    PolicyField pol{g, std::vector<Action>(g.node_count(), Action::pay(0))};
    pol.action[0] = Action::wait();
    SimConfig cfg;
    cfg.paths = 10;
    cfg.horizon = 50.05;
    cfg.start = NodeIndex{5};
    const SimResult r = simulate_policy(m, pol, cfg);
    // pay 5 cells now, then one cell at every t = kδ < horizon
    double expect = 5 * 0.12, t = 0.0;
    while (true) {
        t += 0.1;
        if (t >= cfg.horizon) break;
        expect += std::exp(-m.c * t) * 0.12;
    }
    EXPECT_NEAR(r.mean, expect, 1e-12);
    EXPECT_EQ(r.std_error, 0.0);
    EXPECT_EQ(r.horizon_stops, 10u);
    const double q = std::exp(-m.c * 0.1), closed = 5 * 0.12 + 0.12 * q / (1 - q);
    EXPECT_NEAR(r.mean, closed, closed * std::exp(-m.c * cfg.horizon) * 1.01);
}

TEST(SimulatePolicy, ReproducibleBySeed) {
    const ModelSpec m = survivor_model();
    const GridSpec g{0.1, {12, 12}, m.p};
    const CoefficientTable t = precompute_coeffs(m, g);
    const Scheme s(m, t);
    SolveOptions o;
    o.tol_iter = 1e-11;
    auto [v, rep] = value_iteration(s, o);
    const PolicyField pol = extract_policy(s, v);
    SimConfig cfg;
    cfg.paths = 3000;
    cfg.seed = 11;
    cfg.start = NodeIndex{6, 3};
    const SimResult a = simulate_policy(m, pol, cfg), b = simulate_policy(m, pol, cfg);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.std_error, b.std_error);
    cfg.seed = 12;
    EXPECT_NE(simulate_policy(m, pol, cfg).mean, a.mean);
}

TEST(SimulatePolicy, AgreesWithGridValue) {
    const ModelSpec m = survivor_model();
    const GridSpec g{0.1, {30, 40}, m.p};
    const CoefficientTable t = precompute_coeffs(m, g);
    const Scheme s(m, t);
    SolveOptions o;
    o.tol_iter = 1e-11;
    auto [v, rep] = value_iteration(s, o);
    const PolicyField pol = extract_policy(s, v);
    for (const NodeIndex& start : {NodeIndex{2, 2}, NodeIndex{10, 5}, NodeIndex{5, 20}}) {
        SimConfig cfg;
        cfg.paths = 40000;
        cfg.seed = 5;
        cfg.start = start;
        const SimResult r = simulate_policy(m, pol, cfg);
        // the simulated chain is the grid chain; 1e-3 bounds the truncation e^{-cH}·sup|v|
        EXPECT_LT(std::abs(r.mean - v(start)), 4.0 * r.std_error + 1e-3) << node_label(start);
        EXPECT_NEAR(r.mean, r.dividends + r.switch_value + r.penalty, 1e-12);
    }
}

TEST(SimulatePath, TraceIsAdmissible) {
    const ModelSpec m = survivor_model();
    const GridSpec g{0.1, {20, 20}, m.p};
    const CoefficientTable t = precompute_coeffs(m, g);
    const Scheme s(m, t);
    SolveOptions o;
    o.tol_iter = 1e-11;
    auto [v, rep] = value_iteration(s, o);
    const PolicyField pol = extract_policy(s, v);
    const ClaimSampler sampler(m.claims);
    for (std::uint64_t k = 0; k < 200; ++k) {
        auto rng = path_stream(3, k);
        std::vector<PathEvent> trace;
        const auto out = simulate_path(m, pol, sampler, NodeIndex{8, 8}, 200.0, rng, &trace);
        double last = 0.0, paid = 0.0;
        for (std::size_t e = 0; e < trace.size(); ++e) {
            const auto& ev = trace[e];
            ASSERT_GE(ev.time, last);
            last = ev.time;
            if (ev.kind == PathEvent::Pay || ev.kind == PathEvent::Overshoot || ev.kind == PathEvent::Boundary) {
                ASSERT_GE(ev.amount, 0.0);
                // dividends never exceed the weighted surplus available
                ASSERT_LE(ev.amount, ev.surplus + 1e-12);
                paid += std::exp(-m.c * ev.time) * ev.amount;
            }
            if (ev.kind == PathEvent::Switch || ev.kind == PathEvent::Ruin) {
                ASSERT_EQ(e + 1, trace.size());
            }
        }
        ASSERT_NEAR(paid, out.dividends, 1e-12);
    }
}

TEST(MeanSe, PairwiseAndSampleError) {
    const Vec x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
    EXPECT_DOUBLE_EQ(detail::pairwise_sum(x), 210.0);
    const auto ms = detail::mean_se(x);
    EXPECT_DOUBLE_EQ(ms.mean, 10.5);
    EXPECT_NEAR(ms.se, std::sqrt(35.0 / 20.0), 1e-14);
}

TEST(SimulatePolicy, RejectsBadInputs) {
    const ModelSpec m = survivor_model();
    const GridSpec g{0.1, {5, 5}, m.p};
    const PolicyField pol{g, std::vector<Action>(g.node_count(), Action::sw())};
    SimConfig cfg;
    cfg.start = NodeIndex{6, 0};
    EXPECT_THROW(simulate_policy(m, pol, cfg), ConfigError);
    cfg.start = NodeIndex{1, 1};
    cfg.paths = 0;
    EXPECT_THROW(simulate_policy(m, pol, cfg), ConfigError);
    PolicyField bad{g, std::vector<Action>(g.node_count(), Action::pay(0))};
    cfg.paths = 10;
    cfg.start = NodeIndex{0, 2};
    EXPECT_THROW(simulate_policy(m, bad, cfg), ConfigError);
}
