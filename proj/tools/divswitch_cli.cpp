// divswitch_cli — solve, refine and simulate dividend/switching experiments.
//
//   divswitch_cli solve    --config exp.json --out DIR
//   divswitch_cli refine   --config exp.json --out DIR --levels 3
//   divswitch_cli simulate --out DIR --nodes "10,5;40,20" --paths 200000 --seed 7

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "divswitch/divswitch.hpp"

namespace fs = std::filesystem;
using namespace divswitch;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kNonConvergence = 3, kIo = 4 };

struct Args {
    std::string config;
    std::string out;
    std::size_t levels = 2;
    std::string nodes;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    double tol_iter = 0.0;
};

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
    const fs::path probe = fs::path(dir) / ".write_probe";
    std::ofstream out(probe);
    if (!out) throw IoError("output directory is not writable: " + dir);
    out.close();
    fs::remove(probe, ec);
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

/// Loads the experiment, solves any auto tables and stores them next to the outputs.
ExperimentConfig prepare(const Args& args, const std::string& out_dir) {
    ExperimentConfig cfg = load_experiment(args.config);
    if (args.tol_iter > 0.0) cfg.tol_iter = args.tol_iter;
    if (cfg.auto_penalty || cfg.auto_obstacle) std::cerr << "solving one-company tables...\n";
    const auto built = materialize(cfg);
    if (built) {
        if (cfg.auto_penalty) {
            built->penalty.tables[0].write_csv((fs::path(out_dir) / "V1.csv").string());
            built->penalty.tables[1].write_csv((fs::path(out_dir) / "V2.csv").string());
            cfg.effective["penalty"]["tables"] = {"V1.csv", "V2.csv"};
        }
        if (cfg.auto_obstacle) {
            built->obstacle.merged.write_csv((fs::path(out_dir) / "VM.csv").string());
            cfg.effective["obstacle"]["table_path"] = "VM.csv";
        }
    }
    cfg.effective["solver"]["tol_iter"] = cfg.tol_iter;
    return cfg;
}

SolveOptions solve_options(const ExperimentConfig& cfg) {
    SolveOptions so;
    so.tol_iter = cfg.tol_iter;
    so.max_iter = cfg.max_iter;
    so.progress_every = 2000;
    so.on_progress = [](std::size_t it, double d) { std::cerr << "  sweep " << it << "  increment " << d << '\n'; };
    return so;
}

json region_summary(const PolicyField& pol) {
    json out = json::object();
    std::vector<Action> kinds{Action::sw(), Action::wait()};
    for (std::size_t i = 0; i < pol.grid.dim(); ++i) kinds.push_back(Action::pay(i));
    for (auto a : kinds) {
        const auto comps = region_components(pol, a);
        std::size_t nodes = 0;
        for (auto s : comps.sizes) nodes += s;
        out[to_string(a)] = {{"nodes", nodes}, {"components", comps.count}};
    }
    return out;
}

/// True when every node on the far faces of the box pays dividends.
bool boundary_pays(const PolicyField& pol) {
    const GridSpec& g = pol.grid;
    for (std::size_t f = 0; f < pol.action.size(); ++f) {
        const NodeIndex m = g.unflat(f);
        bool far = false;
        for (std::size_t i = 0; i < g.dim(); ++i) far = far || m[i] == g.m_max[i];
        if (far && pol.action[f].kind != Action::PayDiv && pol.action[f].kind != Action::Switch) return false;
    }
    return true;
}

int cmd_solve(const Args& args) {
    ensure_dir(args.out);
    ExperimentConfig cfg = prepare(args, args.out);
    const CoefficientTable coeffs = precompute_coeffs(cfg.model, cfg.grid);
    const Scheme scheme(cfg.model, coeffs);
    std::cerr << "value iteration on " << cfg.grid.node_count() << " nodes...\n";
    auto [v, rep] = value_iteration(scheme, solve_options(cfg));
    const PolicyField pol = extract_policy(scheme, v);

    write_values_csv((fs::path(args.out) / "values.csv").string(), v, pol);
    if (cfg.grid.dim() == 2) write_policy_pgm((fs::path(args.out) / "regions.pgm").string(), pol);
    const bool pays = boundary_pays(pol);
    if (!pays) std::cerr << "warning: the dividend region does not cover the far faces of the box; enlarge grid.box\n";
    json report = {{"iterations", rep.iterations},
                   {"final_sup_delta", rep.final_sup_delta},
                   {"residual", rep.residual},
                   {"tol_iter", rep.tol_iter},
                   {"monotonicity_violations", rep.monotonicity_violations},
                   {"wall_time", rep.wall_time},
                   {"nodes", cfg.grid.node_count()},
                   {"delta", cfg.grid.delta},
                   {"m_max", cfg.grid.m_max},
                   {"growth_ratio", growth_ratio(cfg.model, cfg.grid)},
                   {"boundary_pays_dividends", pays},
                   {"regions", region_summary(pol)}};
    write_json((fs::path(args.out) / "report.json").string(), report);
    write_json((fs::path(args.out) / "effective_config.json").string(), cfg.effective);
    std::cout << "iterations " << rep.iterations << "  residual " << rep.residual << "  time " << rep.wall_time
              << " s\n";
    return kOk;
}

int cmd_refine(const Args& args) {
    if (args.levels < 1) throw ConfigError("--levels: must be >= 1");
    ensure_dir(args.out);
    ExperimentConfig cfg = prepare(args, args.out);
    RefineOptions ro;
    ro.solve = solve_options(cfg);
    ro.on_level = [](const RefinementLevel& l) {
        std::cerr << "delta " << l.delta << "  sup_diff " << l.sup_diff << "  violations " << l.violations << '\n';
    };
    const RefinementReport rep = refinement_run(cfg.model, cfg.grid, args.levels, ro);
    write_refinement_csv((fs::path(args.out) / "refinement.csv").string(), rep);
    write_json((fs::path(args.out) / "effective_config.json").string(), cfg.effective);
    std::size_t violations = 0;
    for (const auto& l : rep.levels) violations += l.violations;
    std::cout << "levels " << rep.levels.size() << "  violations " << violations << '\n';
    return kOk;
}

std::vector<NodeIndex> parse_nodes(const std::string& spec) {
    std::vector<NodeIndex> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.empty()) continue;
        NodeIndex m;
        std::stringstream is(item);
        std::string num;
        while (std::getline(is, num, ',')) {
            try {
                std::size_t used = 0;
                const long long v = std::stoll(num, &used);
                if (used != num.size() || v < 0) throw std::invalid_argument(num);
                m.m.push_back(v);
            } catch (const std::exception&) {
                throw ConfigError("--nodes: bad index \"" + num + "\" in \"" + item + "\"");
            }
        }
        out.push_back(m);
    }
    return out;
}

int cmd_simulate(const Args& args) {
    const std::string cfg_path =
        args.config.empty() ? (fs::path(args.out) / "effective_config.json").string() : args.config;
    if (!fs::exists(cfg_path)) throw IoError("no config found at " + cfg_path + " (run `solve` first)");
    ExperimentConfig cfg = load_experiment(cfg_path);
    materialize(cfg);
    auto [v, pol] = read_values_csv((fs::path(args.out) / "values.csv").string(), cfg.grid);

    std::vector<NodeIndex> nodes = args.nodes.empty() ? cfg.nodes : parse_nodes(args.nodes);
    if (nodes.empty()) throw ConfigError("--nodes: no start nodes given");
    for (const auto& m : nodes)
        if (m.size() != cfg.grid.dim() || !cfg.grid.contains(m))
            throw ConfigError("--nodes: " + node_label(m) + " is outside the grid");

    double bound = 0.0;
    for (double x : v.data) bound = std::max(bound, std::abs(x));
    std::vector<McRow> rows;
    for (const auto& m : nodes) {
        SimConfig sc;
        sc.paths = args.paths > 0 ? args.paths : cfg.paths;
        sc.seed = args.seed_set ? args.seed : cfg.seed;
        sc.horizon = cfg.horizon;
        sc.start = m;
        sc.value_bound = bound;
        const SimResult r = simulate_policy(cfg.model, pol, sc);
        if (r.off_box_moves > 0)
            std::cerr << "warning: " << r.off_box_moves << " moves left the box from node " << node_label(m) << '\n';
        rows.push_back({m, v(m), r});
        std::cout << node_label(m) << "  v " << v(m) << "  mc " << r.mean << " ± " << r.std_error << "  z "
                  << z_score(v(m), r) << '\n';
    }
    write_mc_csv((fs::path(args.out) / "montecarlo.csv").string(), rows);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal dividends with irreversible switching on the G^delta grid"};
    app.require_subcommand(1);
    Args args;
    auto common = [&](CLI::App* sub, bool need_config) {
        auto* c = sub->add_option("--config", args.config, "experiment JSON file");
        if (need_config) c->required()->check(CLI::ExistingFile);
        sub->add_option("--out", args.out, "output directory")->required();
        sub->add_option("--threads", args.threads, "worker threads (0 = all)")->check(CLI::NonNegativeNumber);
        sub->add_option("--tol-iter", args.tol_iter, "stopping tolerance for the sup increment");
    };
    auto* solve = app.add_subcommand("solve", "value iteration, policy and region map");
    common(solve, true);
    auto* refine = app.add_subcommand("refine", "solve at delta, delta/2, ... and check monotone embedding");
    common(refine, true);
    refine->add_option("--levels", args.levels, "number of grid levels")->check(CLI::PositiveNumber);
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo value of the solved policy");
    common(simulate, false);
    simulate->add_option("--nodes", args.nodes, "start nodes, e.g. \"10,5;40,20\"");
    simulate->add_option("--paths", args.paths, "paths per node");
    simulate->add_option("--seed", args.seed, "random seed")->each([&](const std::string&) { args.seed_set = true; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    if (args.threads > 0) omp_set_num_threads(args.threads);

    try {
        if (*solve) return cmd_solve(args);
        if (*refine) return cmd_refine(args);
        return cmd_simulate(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const CapacityError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const NonConvergenceError& e) {
        std::cerr << "no convergence: " << e.what() << '\n';
        return kNonConvergence;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}
