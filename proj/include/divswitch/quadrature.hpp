#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include "divswitch/error.hpp"

namespace divswitch::quad {

/// ∫₀^len e^{-rate·t} dt.
inline double exp_integral(double rate, double len) {
    const double u = rate * len;
    if (std::abs(u) < 1e-300) return len;
    return -std::expm1(-u) / rate;
}

/// ∫₀^len t·e^{-rate·t} dt, stable for small rate·len.
inline double texp_integral(double rate, double len) {
    const double u = rate * len;
    if (std::abs(u) < 0.5) {
        // len² Σ_k (-u)^k / (k! (k+2))
        double term = 1.0, sum = 0.5;
        for (int k = 1; k < 30; ++k) {
            term *= -u / k;
            sum += term / (k + 2);
        }
        return len * len * sum;
    }
    return (1.0 - std::exp(-u) * (1.0 + u)) / (rate * rate);
}

/// u − 1 + e^{-u}
inline double psi(double u) {
    if (std::abs(u) < 0.1) {
        double term = 1.0, sum = 0.0;
        for (int k = 2; k < 20; ++k) {
            term = (k == 2) ? u * u / 2.0 : term * (-u) / k;
            sum += term;
        }
        return sum;
    }
    return u + std::expm1(-u);
}

/// 1 − e^{-u}(1 + u)
inline double phi(double u) {
    if (std::abs(u) < 0.1) {
        // Σ_{k≥2} (-1)^k u^k (k-1)/k!
        double fact = 1.0, pow_u = 1.0, sum = 0.0;
        for (int k = 1; k < 20; ++k) {
            fact *= k;
            pow_u *= u;
            if (k >= 2) sum += ((k % 2 == 0) ? 1.0 : -1.0) * pow_u * (k - 1) / fact;
        }
        return sum;
    }
    return -std::expm1(-u) - u * std::exp(-u);
}

/// Fixed 15-point Gauss–Legendre rule on [a, b].
template <class F>
double gauss(F&& f, double a, double b) {
    if (b <= a) return 0.0;
    return boost::math::quadrature::gauss<double, 15>::integrate(f, a, b);
}

/// Composite Gauss–Legendre on [a, b] split at `breaks` (kinks of the integrand).
/// Each piece is bisected until two successive levels agree to `rel_tol`.
template <class F>
double piecewise_gauss(F&& f, double a, double b, std::vector<double> breaks, double rel_tol = 1e-12,
                       int max_depth = 8) {
    if (b <= a) return 0.0;
    breaks.push_back(a);
    breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double lo = std::max(a, breaks[i]);
        const double hi = std::min(b, breaks[i + 1]);
        if (!(hi > lo)) continue;
        double coarse = gauss(f, lo, hi);
        int panels = 1;
        for (int depth = 0; depth < max_depth; ++depth) {
            panels *= 2;
            const double w = (hi - lo) / panels;
            double fine = 0.0;
            for (int k = 0; k < panels; ++k) fine += gauss(f, lo + k * w, lo + (k + 1) * w);
            const bool done = std::abs(fine - coarse) <= rel_tol * std::abs(fine) + 1e-300;
            coarse = fine;
            if (done) break;
        }
        total += coarse;
    }
    if (!std::isfinite(total)) throw NumericError("quadrature produced a non-finite value");
    return total;
}

/// ∫₀^∞ g(s)·rate·e^{-rate·s} ds by double-exponential quadrature.
template <class G>
double exponential_expectation(G&& g, double rate) {
    boost::math::quadrature::exp_sinh<double> integrator;
    auto integrand = [&](double s) {
        const double w = rate * std::exp(-rate * s);
        return w == 0.0 ? 0.0 : g(s) * w;
    };
    double err = 0.0;
    const double value = integrator.integrate(integrand, 0.0, std::numeric_limits<double>::infinity(),
                                              1e-12, &err);
    if (!std::isfinite(value)) throw NumericError("tail integral of the penalty is not finite");
    return value;
}

}  // namespace divswitch::quad
