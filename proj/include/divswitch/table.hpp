#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "divswitch/error.hpp"

namespace divswitch {

/// One-dimensional value function sampled at increasing knots.
///
/// Evaluation interpolates linearly between knots and extends linearly with
/// slope `tail_slope` beyond the last knot (the dividend weight of the
/// company the table belongs to). Arguments below the first knot clamp to it.
class ValueTable {
public:
    ValueTable() = default;

    ValueTable(std::vector<double> knots, std::vector<double> values, double tail_slope)
        : x_(std::move(knots)), v_(std::move(values)), slope_(tail_slope) {
        if (x_.empty() || x_.size() != v_.size())
            throw ConfigError("value table: knots and values must be non-empty and of equal length");
        for (std::size_t i = 1; i < x_.size(); ++i)
            if (!(x_[i] > x_[i - 1])) throw ConfigError("value table: knots must be strictly increasing");
        for (double v : v_)
            if (!std::isfinite(v)) throw ConfigError("value table: non-finite value");
    }

    double operator()(double x) const {
        if (x <= x_.front()) return v_.front();
        if (x >= x_.back()) return v_.back() + slope_ * (x - x_.back());
        const auto hi = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin());
        const std::size_t lo = hi - 1;
        const double w = (x - x_[lo]) / (x_[hi] - x_[lo]);
        return v_[lo] + w * (v_[hi] - v_[lo]);
    }

    /// Knots strictly inside (lo, hi); these are the kinks of the interpolant.
    std::vector<double> knots_between(double lo, double hi) const {
        auto first = std::upper_bound(x_.begin(), x_.end(), lo);
        auto last = std::lower_bound(x_.begin(), x_.end(), hi);
        if (first >= last) return {};
        return {first, last};
    }

    const std::vector<double>& knots() const { return x_; }
    const std::vector<double>& values() const { return v_; }
    double tail_slope() const { return slope_; }
    bool empty() const { return x_.empty(); }

    /// Two-column CSV `x,value` with a header line.
    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write value table: " + path);
        out << "x,value\n" << std::setprecision(17);
        for (std::size_t i = 0; i < x_.size(); ++i) out << x_[i] << ',' << v_[i] << '\n';
        if (!out) throw IoError("write failed: " + path);
    }

    static ValueTable read_csv(const std::string& path, double tail_slope) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read value table: " + path);
        std::vector<double> xs, vs;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            std::istringstream row(line);
            std::string a, b;
            if (!std::getline(row, a, ',') || !std::getline(row, b, ','))
                throw ConfigError(path + ":" + std::to_string(lineno) + ": expected two columns");
            try {
                std::size_t used = 0;
                double x = std::stod(a, &used);
                double v = std::stod(b);
                xs.push_back(x);
                vs.push_back(v);
            } catch (const std::invalid_argument&) {
                if (lineno == 1) continue;  // header
                throw ConfigError(path + ":" + std::to_string(lineno) + ": not a number");
            }
        }
        return ValueTable(std::move(xs), std::move(vs), tail_slope);
    }

private:
    std::vector<double> x_;
    std::vector<double> v_;
    double slope_ = 0.0;
};

}  // namespace divswitch
