#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "divswitch/error.hpp"
#include "divswitch/grid.hpp"
#include "divswitch/model.hpp"
#include "divswitch/oned.hpp"
#include "divswitch/solver.hpp"

namespace divswitch {

using json = nlohmann::json;

/// Everything an experiment file describes, before any 1-d tables are solved.
struct ExperimentConfig {
    ModelSpec model;  // penalty/obstacle may still be placeholders when auto tables are requested
    GridSpec grid;
    Vec box;
    double tables_delta = 0.0;  // δ of the 1-d solves for auto tables
    bool auto_penalty = false;  // survivor tables solved from the model
    bool auto_obstacle = false; // merged-company table solved from the model
    bool never_default = false; // NeverSwitch constant derived from the penalty
    double merger_cost = 0.0;
    double tol_iter = 0.0;
    std::size_t max_iter = 1'000'000;
    std::size_t paths = 200'000;
    std::uint64_t seed = 1;
    double horizon = 0.0;
    std::vector<NodeIndex> nodes;
    json effective;  // the configuration with defaults filled
};

namespace detail {

inline const json& require(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(path + key + ": missing");
    return j.at(key);
}

inline double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path + ": expected a number");
    return j.get<double>();
}

inline Vec as_vector(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path + ": expected an array of numbers");
    Vec v;
    for (std::size_t i = 0; i < j.size(); ++i) v.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
    return v;
}

/// δ given as a number or as a fraction string "k/d".
inline double parse_delta(const json& j, const std::string& path) {
    if (j.is_number()) return j.get<double>();
    if (!j.is_string()) throw ConfigError(path + ": expected a number or a fraction such as \"1/60\"");
    const std::string s = j.get<std::string>();
    const auto slash = s.find('/');
    try {
        std::size_t used = 0;
        if (slash == std::string::npos) {
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        }
        const std::string a = s.substr(0, slash), b = s.substr(slash + 1);
        const double num = std::stod(a, &used);
        if (used != a.size()) throw std::invalid_argument(s);
        const double den = std::stod(b, &used);
        if (used != b.size() || den == 0.0) throw std::invalid_argument(s);
        return num / den;
    } catch (const std::exception&) {
        throw ConfigError(path + ": cannot parse \"" + s + "\"");
    }
}

inline SimpleLaw parse_simple_law(const json& j, const std::string& path) {
    const auto& kind = require(j, "kind", path + ".");
    if (!kind.is_string()) throw ConfigError(path + ".kind: expected a string");
    const std::string k = kind.get<std::string>();
    if (k == "exponential") return Exponential{as_number(require(j, "rate", path + "."), path + ".rate")};
    if (k == "empirical") {
        const auto& atoms = require(j, "atoms", path + ".");
        if (!atoms.is_array()) throw ConfigError(path + ".atoms: expected [[size, probability], ...]");
        Empirical em;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            const std::string ap = path + ".atoms[" + std::to_string(i) + "]";
            const Vec pair = as_vector(atoms[i], ap);
            if (pair.size() != 2) throw ConfigError(ap + ": expected [size, probability]");
            em.support.push_back(pair[0]);
            em.prob.push_back(pair[1]);
        }
        return em;
    }
    throw ConfigError(path + ".kind: unknown marginal kind \"" + k + "\"");
}

inline Marginal parse_marginal(const json& j, const std::string& path) {
    const auto& kind = require(j, "kind", path + ".");
    if (kind.is_string() && kind.get<std::string>() == "mixture") {
        const auto& parts = require(j, "parts", path + ".");
        if (!parts.is_array()) throw ConfigError(path + ".parts: expected an array");
        Mixture mix;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            const std::string pp = path + ".parts[" + std::to_string(i) + "]";
            mix.parts.push_back({as_number(require(parts[i], "weight", pp + "."), pp + ".weight"),
                                 parse_simple_law(require(parts[i], "law", pp + "."), pp + ".law")});
        }
        return mix;
    }
    const SimpleLaw law = parse_simple_law(j, path);
    if (auto e = std::get_if<Exponential>(&law)) return *e;
    return std::get<Empirical>(law);
}

inline std::string resolve(const std::string& base, const std::string& p) {
    const std::filesystem::path path(p);
    if (path.is_absolute() || base.empty()) return p;
    return (std::filesystem::path(base) / path).string();
}

}  // namespace detail

/// Parses an experiment document. Relative table paths resolve against `base_dir`.
inline ExperimentConfig parse_experiment(const json& doc, const std::string& base_dir = {}) {
    using namespace detail;
    if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
    ExperimentConfig cfg;
    json eff = doc;
    ModelSpec& m = cfg.model;

    const auto& jn = require(doc, "n", "");
    if (!jn.is_number_integer() || jn.get<int>() < 1) throw ConfigError("n: expected an integer >= 1");
    m.n = jn.get<int>();
    m.p = as_vector(require(doc, "p", ""), "p");
    m.c = as_number(require(doc, "c", ""), "c");
    if (m.p.size() != m.dim()) throw ConfigError("p: expected n entries");
    m.a = doc.contains("a") ? as_vector(doc["a"], "a") : Vec(m.dim(), 1.0);
    if (m.a.size() != m.dim()) throw ConfigError("a: expected n entries");
    eff["a"] = m.a;

    const auto& sources = require(doc, "sources", "");
    if (!sources.is_array()) throw ConfigError("sources: expected an array");
    for (std::size_t l = 0; l < sources.size(); ++l) {
        const std::string sp = "sources[" + std::to_string(l) + "]";
        ClaimSource s;
        s.intensity = as_number(require(sources[l], "intensity", sp + "."), sp + ".intensity");
        s.allocation = as_vector(require(sources[l], "allocation", sp + "."), sp + ".allocation");
        s.marginal = parse_marginal(require(sources[l], "marginal", sp + "."), sp + ".marginal");
        m.claims.sources.push_back(std::move(s));
    }

    // grid
    const auto& jg = require(doc, "grid", "");
    const double delta = parse_delta(require(jg, "delta", "grid."), "grid.delta");
    if (!(delta > 0.0)) throw ConfigError("grid.delta: must be > 0");
    cfg.grid.delta = delta;
    cfg.grid.premiums = m.p;
    if (jg.contains("m_max")) {
        const Vec mm = as_vector(jg["m_max"], "grid.m_max");
        if (mm.size() != m.dim()) throw ConfigError("grid.m_max: expected n entries");
        for (double x : mm) {
            if (x < 0 || x != std::floor(x)) throw ConfigError("grid.m_max: expected non-negative integers");
            cfg.grid.m_max.push_back(static_cast<std::int64_t>(x));
        }
        for (std::size_t i = 0; i < m.dim(); ++i)
            cfg.box.push_back(cfg.grid.spacing(i) * static_cast<double>(cfg.grid.m_max[i]));
    } else {
        cfg.box = as_vector(require(jg, "box", "grid."), "grid.box");
        if (cfg.box.size() != m.dim()) throw ConfigError("grid.box: expected n entries");
        for (std::size_t i = 0; i < m.dim(); ++i)
            cfg.grid.m_max.push_back(static_cast<std::int64_t>(std::ceil(cfg.box[i] / cfg.grid.spacing(i) - 1e-9)));
        eff["grid"]["m_max"] = cfg.grid.m_max;
    }
    cfg.tables_delta = jg.contains("tables_delta") ? parse_delta(jg["tables_delta"], "grid.tables_delta") : delta;
    if (!(cfg.tables_delta > 0.0)) throw ConfigError("grid.tables_delta: must be > 0");

    // penalty
    const json jp = doc.contains("penalty") ? doc["penalty"] : json{{"kind", "zero"}};
    eff["penalty"] = jp;
    const auto& pk = require(jp, "kind", "penalty.");
    const std::string pkind = pk.is_string() ? pk.get<std::string>() : "";
    if (pkind == "zero") {
        m.penalty = ZeroPenalty{};
    } else if (pkind == "constant") {
        m.penalty = ConstantPenalty{as_number(require(jp, "value", "penalty."), "penalty.value")};
    } else if (pkind == "deficit") {
        const Vec slope = as_vector(require(jp, "slope", "penalty."), "penalty.slope");
        DeficitPerSource d;
        for (std::size_t l = 0; l < slope.size(); ++l) {
            if (!(slope[l] >= 0.0)) throw ConfigError("penalty.slope[" + std::to_string(l) + "]: must be >= 0");
            const double k = slope[l];
            d.per_source.push_back([k](double z) { return k * z; });
        }
        m.penalty = d;
    } else if (pkind == "survivor") {
        if (m.n != 2) throw ConfigError("penalty.kind: survivor penalty requires n = 2");
        const json tables = jp.contains("tables") ? jp["tables"] : json("auto");
        if (tables.is_string() && tables.get<std::string>() == "auto") {
            cfg.auto_penalty = true;
        } else {
            if (!tables.is_array() || tables.size() != 2)
                throw ConfigError("penalty.tables: expected \"auto\" or two CSV paths");
            SurvivorValue sv;
            for (std::size_t i = 0; i < 2; ++i) {
                if (!tables[i].is_string()) throw ConfigError("penalty.tables[" + std::to_string(i) + "]: expected a path");
                sv.tables.push_back(ValueTable::read_csv(resolve(base_dir, tables[i].get<std::string>()), m.a[i]));
            }
            m.penalty = sv;
        }
        eff["penalty"]["tables"] = tables;
    } else {
        throw ConfigError("penalty.kind: expected one of zero, constant, deficit, survivor");
    }

    // obstacle
    const json jo = doc.contains("obstacle") ? doc["obstacle"] : json{{"kind", "never"}};
    eff["obstacle"] = jo;
    const auto& ok = require(jo, "kind", "obstacle.");
    const std::string okind = ok.is_string() ? ok.get<std::string>() : "";
    if (okind == "never") {
        // the default needs the penalty, fixed up after auto tables are built
        m.obstacle = NeverSwitch{jo.contains("value") ? as_number(jo["value"], "obstacle.value") : 0.0};
        cfg.never_default = !jo.contains("value");
    } else if (okind == "merger") {
        cfg.merger_cost = jo.contains("c_M") ? as_number(jo["c_M"], "obstacle.c_M") : 0.0;
        if (!(cfg.merger_cost >= 0.0)) throw ConfigError("obstacle.c_M: must be >= 0");
        eff["obstacle"]["c_M"] = cfg.merger_cost;
        const json tp = jo.contains("table_path") ? jo["table_path"] : json("auto");
        if (tp.is_string() && tp.get<std::string>() == "auto") {
            cfg.auto_obstacle = true;
        } else {
            if (!tp.is_string()) throw ConfigError("obstacle.table_path: expected \"auto\" or a CSV path");
            const double a_m = m.a.empty() ? 1.0 : std::accumulate(m.a.begin(), m.a.end(), 0.0) / m.a.size();
            m.obstacle = MergerObstacle{ValueTable::read_csv(resolve(base_dir, tp.get<std::string>()), a_m),
                                        cfg.merger_cost};
        }
        eff["obstacle"]["table_path"] = tp;
    } else {
        throw ConfigError("obstacle.kind: expected one of never, merger");
    }

    // solver / simulation settings
    const json js = doc.contains("solver") ? doc["solver"] : json::object();
    if (js.contains("tol_iter")) cfg.tol_iter = as_number(js["tol_iter"], "solver.tol_iter");
    if (js.contains("max_iter")) {
        if (!js["max_iter"].is_number_unsigned()) throw ConfigError("solver.max_iter: expected a positive integer");
        cfg.max_iter = js["max_iter"].get<std::size_t>();
    }
    eff["solver"]["tol_iter"] = cfg.tol_iter;
    eff["solver"]["max_iter"] = cfg.max_iter;

    const json jsim = doc.contains("simulate") ? doc["simulate"] : json::object();
    if (jsim.contains("paths")) {
        if (!jsim["paths"].is_number_unsigned()) throw ConfigError("simulate.paths: expected a positive integer");
        cfg.paths = jsim["paths"].get<std::size_t>();
    }
    if (jsim.contains("seed")) {
        if (!jsim["seed"].is_number_unsigned()) throw ConfigError("simulate.seed: expected a non-negative integer");
        cfg.seed = jsim["seed"].get<std::uint64_t>();
    }
    if (jsim.contains("horizon")) cfg.horizon = as_number(jsim["horizon"], "simulate.horizon");
    if (jsim.contains("nodes")) {
        const auto& nodes = jsim["nodes"];
        if (!nodes.is_array()) throw ConfigError("simulate.nodes: expected an array of index vectors");
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const std::string np = "simulate.nodes[" + std::to_string(k) + "]";
            const Vec idx = as_vector(nodes[k], np);
            NodeIndex node;
            for (double x : idx) {
                if (x < 0 || x != std::floor(x)) throw ConfigError(np + ": expected non-negative integers");
                node.m.push_back(static_cast<std::int64_t>(x));
            }
            cfg.nodes.push_back(node);
        }
    }
    eff["simulate"]["paths"] = cfg.paths;
    eff["simulate"]["seed"] = cfg.seed;
    eff["simulate"]["horizon"] = cfg.horizon;

    cfg.effective = std::move(eff);

    // structural checks that do not need the 1-d tables
    ModelSpec probe = m;
    if (cfg.auto_penalty) probe.penalty = ZeroPenalty{};
    if (cfg.auto_obstacle || cfg.never_default) probe.obstacle = NeverSwitch{-std::numeric_limits<double>::max()};
    validate(probe);
    cfg.grid.validate();
    for (std::size_t k = 0; k < cfg.nodes.size(); ++k)
        if (cfg.nodes[k].size() != m.dim() || !cfg.grid.contains(cfg.nodes[k]))
            throw ConfigError("simulate.nodes[" + std::to_string(k) + "]: outside the grid");
    return cfg;
}

inline ExperimentConfig load_experiment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config: " + path);
    json doc;
    try {
        doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_experiment(doc, std::filesystem::path(path).parent_path().string());
}

/// Solves the 1-d tables requested as "auto" and fills in default constants.
/// Returns the inputs that were built, if any.
inline std::optional<MergerInputs> materialize(ExperimentConfig& cfg, const SolveOptions& opts = default_1d_options()) {
    std::optional<MergerInputs> built;
    if (cfg.auto_penalty || cfg.auto_obstacle) {
        built = build_merger_inputs(cfg.model, cfg.merger_cost, cfg.tables_delta, cfg.box, opts);
        if (cfg.auto_penalty) cfg.model.penalty = built->penalty;
        if (cfg.auto_obstacle) cfg.model.obstacle = built->obstacle;
    }
    if (cfg.never_default) {
        cfg.model.obstacle = NeverSwitch{default_never_switch(cfg.model)};
        cfg.effective["obstacle"]["value"] = std::get<NeverSwitch>(cfg.model.obstacle).value;
    }
    validate(cfg.model);
    return built;
}

}  // namespace divswitch
