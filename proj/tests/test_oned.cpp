#include <gtest/gtest.h>

#include "support.hpp"

using namespace divswitch;
using namespace testing_support;

namespace {

// Continuous-time optimal dividend value with exponential(d) claims: barrier
// strategy, V(x) = (r₁+d)e^{r₁x} − (r₂+d)e^{r₂x} up to normalisation below b*,
// slope one above. r₁ > 0 > r₂ solve p r² + (p d − λ − c) r − c d = 0.
struct BarrierSolution {
    double r1, r2, d, b, norm;

    BarrierSolution(double lam, double p, double c, double d_) : d(d_) {
        const double B = p * d - lam - c, disc = std::sqrt(B * B + 4 * p * c * d);
        r1 = (-B + disc) / (2 * p);
        r2 = (-B - disc) / (2 * p);
        b = std::max(0.0, std::log(r2 * r2 * (r2 + d) / (r1 * r1 * (r1 + d))) / (r1 - r2));
        norm = (r1 + d) * r1 * std::exp(r1 * b) - (r2 + d) * r2 * std::exp(r2 * b);
    }
    double below(double x) const { return ((r1 + d) * std::exp(r1 * x) - (r2 + d) * std::exp(r2 * x)) / norm; }
    double operator()(double x) const { return x <= b ? below(x) : below(b) + (x - b); }
};

}  // namespace

TEST(OneCompany, NoClaimsFixedPoint) {
    const double p = 1.08, c = 0.11, delta = 1.0 / 20;
    const ValueTable v = solve_1d(0.0, p, c, Exponential{3}, delta, 3.0);
    const double q = std::exp(-c * delta), v0 = p * delta * q / (1 - q);
    for (double x : v.knots()) ASSERT_NEAR(v(x), v0 + x, 1e-9);
    EXPECT_DOUBLE_EQ(v.tail_slope(), 1.0);
}

TEST(OneCompany, BarrierOracleAgreesAndIsApproachedFromBelow) {
    const double lam = 2.4, p = 1.08, c = 0.11, d = 3;
    const BarrierSolution exact(lam, p, c, d);
    ASSERT_GT(exact.b, 0.0);
    double prev_gap = 1e9;
    for (double delta : {1.0 / 15, 1.0 / 30, 1.0 / 60}) {
        const ValueTable v = solve_1d(lam, p, c, Exponential{d}, delta, 4.0);
        double gap = 0.0;
        for (double x : v.knots()) {
            const double diff = exact(x) - v(x);
            ASSERT_GT(diff, -1e-9) << "x " << x << " delta " << delta;
            gap = std::max(gap, diff);
        }
        EXPECT_LT(gap, prev_gap);
        prev_gap = gap;
    }
    EXPECT_LT(prev_gap, 0.02 * exact(0.0));
}

TEST(OneCompany, IncrementsAndLinearTail) {
    const double lam = 2.0, p = 0.674, c = 0.11, delta = 1.0 / 30;
    const ValueTable v = solve_1d(lam, p, c, Exponential{3.5}, delta, 3.0);
    const auto& x = v.knots();
    const double step = p * delta;
    for (std::size_t k = 1; k < x.size(); ++k) ASSERT_GE(v.values()[k] - v.values()[k - 1], step - 1e-11);
    // far above the barrier the scheme pays one cell per node
    const std::size_t top = x.size() - 1;
    for (std::size_t k = top - 10; k <= top; ++k) EXPECT_NEAR(v.values()[k] - v.values()[k - 1], step, 1e-10);
}

TEST(OneCompany, RefinementIsMonotone) {
    const double lam = 2.4, p = 1.08, c = 0.11, delta = 1.0 / 10;
    const ValueTable coarse = solve_1d(lam, p, c, Exponential{3}, delta, 2.0);
    const ValueTable fine = solve_1d(lam, p, c, Exponential{3}, delta / 2, 2.0);
    for (std::size_t k = 0; k < coarse.knots().size(); ++k)
        ASSERT_LE(coarse.values()[k], fine.values()[2 * k] + 1e-10) << k;
}

TEST(Merger, MergedParametersForFirstExample) {
    const ModelSpec m = two_company();
    const MergerInputs in = merged_parameters(m);
    EXPECT_NEAR(in.merged_intensity, 4.4, 1e-15);
    EXPECT_NEAR(in.merged_premium, 1.754, 1e-15);
    const auto& mix = std::get<Mixture>(in.merged_marginal);
    ASSERT_EQ(mix.parts.size(), 2u);
    EXPECT_NEAR(mix.parts[0].weight, 2.4 / 4.4, 1e-15);
    EXPECT_NEAR(mix.parts[1].weight, 2.0 / 4.4, 1e-15);
    // F_M(x) = F(x, x)
    for (double x : {0.0, 0.1, 0.5, 1.0, 2.5}) {
        const Vec xx{x, x};
        EXPECT_NEAR(marginal_cdf(in.merged_marginal, x), eval_cdf(m.claims, xx), 1e-15);
    }
    EXPECT_NEAR(marginal_mean(in.merged_marginal), 2.4 / 4.4 / 3 + 2.0 / 4.4 / 3.5, 1e-15);
}

TEST(Merger, RejectsUnsupportedModels) {
    ModelSpec shared = two_company();
    shared.claims.sources[0].allocation = {0.5, 0.5};
    EXPECT_THROW(merged_parameters(shared), ConfigError);
    ModelSpec twice = two_company();
    twice.claims.sources[1].allocation = {1, 0};
    EXPECT_THROW(merged_parameters(twice), ConfigError);
    ModelSpec three = two_company();
    three.n = 3;
    EXPECT_THROW(merged_parameters(three), ConfigError);
}

TEST(Merger, ObstacleAndSurvivorTables) {
    const ModelSpec m = two_company();
    const Vec box{1.5, 1.5};
    const MergerInputs in = build_merger_inputs(m, 0.0, 1.0 / 20, box);
    ASSERT_EQ(in.penalty.tables.size(), 2u);
    EXPECT_GE(in.penalty.tables[0].knots().back(), 3.0 - 1e-9);
    EXPECT_GE(in.obstacle.merged.knots().back(), 4 * std::hypot(1.5, 1.5) - 0.1);
    // c_M = 0: f(x) = V_M(x₁ + x₂)
    const Vec x{0.7, 0.4};
    EXPECT_DOUBLE_EQ(eval_obstacle(in.obstacle, x), in.obstacle.merged(1.1));
    // the merged company is worth at least its own dividend stream from zero
    EXPECT_GT(in.obstacle.merged(0.0), 0.0);
    // each survivor table equals the stand-alone solve
    const ValueTable v2 = solve_1d(2.0, 0.674, 0.11, Exponential{3.5}, 1.0 / 20, 3.0);
    for (double s : {0.0, 0.5, 1.7}) EXPECT_NEAR(in.penalty.tables[1](s), v2(s), 1e-12);
    EXPECT_THROW(build_merger_inputs(m, -1.0, 1.0 / 20, box), ConfigError);
}
