#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "divswitch/divswitch.hpp"

namespace testing_support {

using namespace divswitch;

/// Two independent companies with exponential claims (rates 3 and 3.5).
inline ModelSpec two_company(double l1 = 2.4, double l2 = 2.0, Vec p = {1.08, 0.674}, double c = 0.11) {
    ModelSpec m;
    m.n = 2;
    m.p = std::move(p);
    m.c = c;
    m.a = {1, 1};
    m.claims.sources = {{l1, {1, 0}, Exponential{3}}, {l2, {0, 1}, Exponential{3.5}}};
    m.obstacle = NeverSwitch{-100};
    return m;
}

/// Linear table v(x) = v0 + s·x on [0, span], slope s beyond.
inline ValueTable linear_table(double v0, double s, double span, std::size_t knots = 50) {
    std::vector<double> x(knots), v(knots);
    for (std::size_t k = 0; k < knots; ++k) {
        x[k] = span * static_cast<double>(k) / static_cast<double>(knots - 1);
        v[k] = v0 + s * x[k];
    }
    return ValueTable(x, v, s);
}

/// Composite Simpson rule with `panels` (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels = 2000) {
    if (b <= a) return 0.0;
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
    return s * h / 3.0;
}

inline Vec random_field(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vec v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

}  // namespace testing_support
