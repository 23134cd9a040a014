#include <gtest/gtest.h>

#include <cstdio>
#include <random>

#include "support.hpp"

using namespace divswitch;
using namespace testing_support;

TEST(TotalIntensity, SumsSources) {
    EXPECT_DOUBLE_EQ(total_intensity(two_company().claims), 4.4);
    ClaimModel one{{{1.0, {1.0}, Exponential{2}}}};
    EXPECT_DOUBLE_EQ(total_intensity(one), 1.0);
    EXPECT_NEAR(total_intensity(two_company(2.44, 2.22).claims), 4.66, 1e-15);
}

TEST(Cdf, HandEvaluation) {
    const auto m = two_company();
    const Vec zero{0, 0}, one{1, 1};
    EXPECT_EQ(eval_cdf(m.claims, zero), 0.0);
    const double expect = 2.4 / 4.4 * (1 - std::exp(-3.0)) + 2.0 / 4.4 * (1 - std::exp(-3.5));
    EXPECT_NEAR(eval_cdf(m.claims, one), expect, 1e-14);
    EXPECT_NEAR(expect, 0.9591, 5e-5);
    const Vec far{20.0 / 3.0, 20.0 / 3.0};
    EXPECT_NEAR(eval_cdf(m.claims, far), 1.0, 1e-8);
    const Vec very_far{40, 40};
    EXPECT_NEAR(eval_cdf(m.claims, very_far), 1.0, 1e-9);
}

TEST(Cdf, RejectsNegativeCoordinates) {
    const Vec bad{-0.1, 1};
    EXPECT_THROW(eval_cdf(two_company().claims, bad), DomainError);
}

TEST(Cdf, MonotoneInEachCoordinate) {
    ModelSpec m = two_company();
    m.claims.sources.push_back({1.0, {0.5, 0.5}, Empirical{{0.2, 0.7, 1.5}, {0.3, 0.5, 0.2}}});
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 3), du(0, 1);
    for (int k = 0; k < 200; ++k) {
        const Vec x{u(rng), u(rng)};
        const Vec y{x[0] + du(rng), x[1] + du(rng)};
        EXPECT_LE(eval_cdf(m.claims, x), eval_cdf(m.claims, y) + 1e-15);
    }
}

TEST(Penalty, ZeroAndSurvivor) {
    const auto m = two_company();
    const Vec x{0.5, 0.5}, a{0.7, 0};
    EXPECT_EQ(eval_penalty(ZeroPenalty{}, m.claims, x, a), 0.0);
    SurvivorValue sv{{linear_table(3, 0, 5), linear_table(7, 0, 5)}};
    EXPECT_DOUBLE_EQ(eval_penalty(sv, m.claims, x, a), -7.0);
    const Vec b{0, 0.9};
    EXPECT_DOUBLE_EQ(eval_penalty(sv, m.claims, x, b), -3.0);
}

TEST(Penalty, OutsideRuinSetIsDomainError) {
    const auto m = two_company();
    const Vec x{0.5, 0.5}, a{0.2, 0};
    EXPECT_THROW(eval_penalty(ConstantPenalty{1}, m.claims, x, a), DomainError);
}

TEST(Penalty, DeficitMatchesDirectFormula) {
    ModelSpec m = two_company();
    DeficitPerSource d{{[](double z) { return 2.0 * z; }, [](double z) { return z * z + z; }}};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 2);
    int checked = 0;
    while (checked < 10) {
        const Vec x{u(rng), u(rng)};
        const std::size_t l = rng() % 2;
        const double beta = u(rng) + 0.01;
        Vec alpha{0, 0};
        alpha[l] = beta;
        if (x[l] >= beta) continue;
        const double deficit = beta - x[l];
        const double expect = l == 0 ? 2.0 * deficit : deficit * deficit + deficit;
        EXPECT_NEAR(eval_penalty(d, m.claims, x, alpha), expect, 1e-14);
        ++checked;
    }
}

TEST(Penalty, MonotoneInSurplusAndClaim) {
    const auto m = two_company();
    SurvivorValue sv{{linear_table(1, 1, 6), linear_table(2, 1, 6)}};
    DeficitPerSource d{{[](double z) { return z; }, [](double z) { return 3 * z; }}};
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 2);
    for (int k = 0; k < 300; ++k) {
        const std::size_t l = rng() % 2;
        Vec x{u(rng), u(rng)};
        Vec alpha{0, 0};
        alpha[l] = x[l] + 0.01 + u(rng);
        Vec xs = x;
        xs[l] = std::min(alpha[l] - 1e-3, x[l] + 0.5 * u(rng));
        xs[1 - l] += u(rng);
        Vec alpha2 = alpha;
        alpha2[l] += u(rng);
        for (const PenaltySpec& p : {PenaltySpec{sv}, PenaltySpec{d}}) {
            EXPECT_GE(eval_penalty(p, m.claims, x, alpha), eval_penalty(p, m.claims, xs, alpha) - 1e-12);
            EXPECT_LE(eval_penalty(p, m.claims, x, alpha), eval_penalty(p, m.claims, x, alpha2) + 1e-12);
        }
    }
}

TEST(Obstacle, MergerAndNeverSwitch) {
    const ValueTable vm = linear_table(2, 1, 10);
    const Vec small{0.1, 0.1}, x{1, 1};
    EXPECT_EQ(eval_obstacle(MergerObstacle{vm, 0.364}, small), 0.0);
    EXPECT_DOUBLE_EQ(eval_obstacle(MergerObstacle{vm, 0.0}, x), vm(2.0));
    EXPECT_DOUBLE_EQ(eval_obstacle(MergerObstacle{vm, 0.5}, x), vm(1.5));
    EXPECT_EQ(eval_obstacle(NeverSwitch{-42}, x), -42);
}

TEST(RuinIntegral, ZeroPenaltyVanishes) {
    const auto m = two_company();
    for (double a : {0.0, 0.3, 2.0}) {
        const Vec x{a, 1 - a / 2};
        EXPECT_EQ(eval_R(m, x), 0.0);
    }
}

TEST(RuinIntegral, SurvivorMatchesQuadrature) {
    ModelSpec m = two_company();
    const ValueTable v1 = linear_table(1.5, 1, 8), v2 = linear_table(0.7, 1, 8);
    m.penalty = SurvivorValue{{v1, v2}};
    for (const Vec& x : {Vec{0.3, 0.8}, Vec{1.2, 0.1}, Vec{0.0, 2.0}}) {
        // ∫_{β > x_l} υ(x, β e_l) d·e^{-dβ} dβ, by Simpson on a truncated range
        const double s1 = simpson([&](double b) { return -v2(x[1]) * 3 * std::exp(-3 * b); }, x[0], x[0] + 15, 40000);
        const double s2 = simpson([&](double b) { return -v1(x[0]) * 3.5 * std::exp(-3.5 * b); }, x[1], x[1] + 15, 40000);
        const double oracle = 2.4 * s1 + 2.0 * s2;
        EXPECT_NEAR(eval_R(m, x), oracle, 1e-9);
        const double closed = -(2.4 * v2(x[1]) * std::exp(-3 * x[0]) + 2.0 * v1(x[0]) * std::exp(-3.5 * x[1]));
        EXPECT_NEAR(eval_R(m, x), closed, 1e-13);
    }
}

TEST(RuinIntegral, ConstantPenaltyOneCompany) {
    ModelSpec m;
    m.n = 1;
    m.p = {1};
    m.c = 0.1;
    m.a = {1};
    m.claims.sources = {{1.7, {1.0}, Exponential{2}}};
    m.penalty = ConstantPenalty{4.0};
    const Vec x{0.6};
    EXPECT_NEAR(eval_R(m, x), 1.7 * 4.0 * std::exp(-2 * 0.6), 1e-14);
}

TEST(RuinIntegral, DeficitOnSharedRayMatchesQuadrature) {
    ModelSpec m = two_company();
    m.claims.sources = {{1.5, {0.25, 0.75}, Exponential{2}}};
    m.penalty = DeficitPerSource{{[](double z) { return z; }}};
    const Vec x{0.4, 0.9};
    const double bmax = std::min(0.4 / 0.25, 0.9 / 0.75);
    auto defic = [&](double b) { return std::max(0.0, 0.25 * b - 0.4) + std::max(0.0, 0.75 * b - 0.9); };
    // kink where the second coordinate also goes negative
    const double kink = std::max(0.4 / 0.25, 0.9 / 0.75);
    const double oracle =
        1.5 * (simpson([&](double b) { return defic(b) * 2 * std::exp(-2 * b); }, bmax, kink, 4000) +
               simpson([&](double b) { return defic(b) * 2 * std::exp(-2 * b); }, kink, kink + 30, 20000));
    EXPECT_NEAR(eval_R(m, x), oracle, 1e-11);
}

TEST(RuinIntegral, LipschitzOnCompactBox) {
    ModelSpec m = two_company();
    m.penalty = SurvivorValue{{linear_table(1.5, 1, 8), linear_table(0.7, 1, 8)}};
    const double h = 1e-4;
    double worst = 0.0;
    for (double a = 0; a <= 3; a += 0.25)
        for (double b = 0; b <= 3; b += 0.25)
            for (std::size_t i = 0; i < 2; ++i) {
                Vec x{a, b}, y{a, b};
                y[i] += h;
                worst = std::max(worst, std::abs(eval_R(m, x) - eval_R(m, y)) / h);
            }
    EXPECT_LT(worst, 100.0);
}

TEST(GrowthBound, Examples) {
    const auto m = two_company();
    const Vec zero{0, 0};
    EXPECT_DOUBLE_EQ(growth_bound(m, zero), 1.0);
    ModelSpec one;
    one.n = 1;
    one.p = {1};
    one.c = 2;
    one.a = {1};
    const Vec x1{1};
    EXPECT_NEAR(growth_bound(one, x1), std::exp(1.0), 1e-15);
    const Vec x{1.08, 0.674};
    EXPECT_NEAR(growth_bound(m, x), std::exp(0.055), 1e-14);
    EXPECT_NEAR(growth_bound(m, x), 1.0565, 1e-4);
}

TEST(Validate, RejectsBrokenModels) {
    auto m = two_company();
    EXPECT_NO_THROW(validate(m));

    auto bad = m;
    bad.claims.sources[0].allocation = {0.6, 0.6};
    EXPECT_THROW(validate(bad), ConfigError);

    bad = m;
    bad.claims.sources[1].allocation = {1, 0};
    EXPECT_THROW(validate(bad), ConfigError);

    bad = m;
    bad.claims.sources[0].marginal = Empirical{{0.0, 1.0}, {0.5, 0.5}};
    EXPECT_THROW(validate(bad), ConfigError);

    bad = m;
    bad.c = 0;
    EXPECT_THROW(validate(bad), ConfigError);

    bad = m;
    bad.penalty = ConstantPenalty{50};
    bad.obstacle = NeverSwitch{-10};
    EXPECT_THROW(validate(bad), ConfigError);

    bad = m;
    bad.claims.sources.clear();
    EXPECT_THROW(validate(bad), ConfigError);
    EXPECT_NO_THROW(validate(bad, true));
}

TEST(Validate, DefaultNeverSwitchDominatesPenalty) {
    auto m = two_company();
    m.penalty = ConstantPenalty{-3};
    const double k = default_never_switch(m);
    EXPECT_DOUBLE_EQ(k, -40.0);
    m.obstacle = NeverSwitch{k};
    EXPECT_NO_THROW(validate(m));
}

TEST(ExpectedPenalty, SurvivorAtOrigin) {
    auto m = two_company();
    const ValueTable v1 = linear_table(1.5, 1, 8), v2 = linear_table(0.7, 1, 8);
    m.penalty = SurvivorValue{{v1, v2}};
    EXPECT_NEAR(expected_abs_penalty_at_zero(m), 2.4 / 4.4 * 0.7 + 2.0 / 4.4 * 1.5, 1e-15);
}

TEST(ValueTable, InterpolationAndTail) {
    const ValueTable t({0, 1, 2}, {1, 3, 4}, 0.5);
    EXPECT_DOUBLE_EQ(t(0.5), 2.0);
    EXPECT_DOUBLE_EQ(t(1.5), 3.5);
    EXPECT_DOUBLE_EQ(t(4.0), 5.0);
    EXPECT_DOUBLE_EQ(t(-1.0), 1.0);
    EXPECT_EQ(t.knots_between(0.5, 2.0), std::vector<double>{1.0});
    EXPECT_THROW(ValueTable({0, 0}, {1, 2}, 1), ConfigError);
}

TEST(ValueTable, CsvRoundTrip) {
    const ValueTable t({0, 0.1, 0.35}, {1.0 / 3, 2.0 / 7, 5.5}, 1.0);
    const std::string path = ::testing::TempDir() + "table.csv";
    t.write_csv(path);
    const ValueTable back = ValueTable::read_csv(path, 1.0);
    EXPECT_EQ(back.knots(), t.knots());
    EXPECT_EQ(back.values(), t.values());
    std::remove(path.c_str());
    EXPECT_THROW(ValueTable::read_csv(path, 1.0), IoError);
}
