// Builds the first two-company merger example on a coarse grid and prints the
// region map as text: '#' merge, '.' wait, '1'/'2' pay dividends from company 1/2.

#include <iostream>

#include "divswitch/divswitch.hpp"

using namespace divswitch;

int main(int argc, char** argv) {
    const double delta = argc > 1 ? 1.0 / std::atof(argv[1]) : 1.0 / 30;

    ModelSpec model;
    model.n = 2;
    model.p = {1.08, 0.674};
    model.c = 0.11;
    model.a = {1, 1};
    model.claims.sources = {{2.4, {1, 0}, Exponential{3}}, {2.0, {0, 1}, Exponential{3.5}}};

    const Vec box{3, 3};
    const MergerInputs in = build_merger_inputs(model, 0.0, delta, box);
    model.penalty = in.penalty;
    model.obstacle = in.obstacle;
    validate(model);

    const GridSpec grid = grid_for_box(model, delta, box);
    const CoefficientTable coeffs = precompute_coeffs(model, grid);
    const Scheme scheme(model, coeffs);
    SolveOptions opts;
    opts.tol_iter = 1e-10;
    auto [v, rep] = value_iteration(scheme, opts);
    const PolicyField pol = extract_policy(scheme, v);

    std::cout << "sweeps " << rep.iterations << ", residual " << rep.residual << ", v(0) " << v.data[0] << "\n\n";
    for (auto m2 = grid.m_max[1]; m2 >= 0; m2 -= 2) {
        for (std::int64_t m1 = 0; m1 <= grid.m_max[0]; ++m1) {
            const Action a = pol(NodeIndex{m1, m2});
            std::cout << (a.kind == Action::Switch ? '#' : a.kind == Action::NoAction ? '.' : char('1' + a.axis));
        }
        std::cout << '\n';
    }
    const auto waiting = region_components(pol, Action::wait());
    std::cout << "\nno-action components: " << waiting.count << '\n';
}
