#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "markprod/constructions.hpp"
#include "markprod/linalg.hpp"
#include "markprod/markov.hpp"
#include "markprod/rng.hpp"
#include "markprod/system.hpp"
#include "markprod/version.hpp"

namespace markprod {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace cfg {

using nlohmann::json;

inline void check_keys(const json& j, const std::vector<std::string>& allowed,
                       const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const auto& a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError(where + ": unknown key \"" + key + "\"");
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

template <typename T>
T require(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing required key \"" + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

inline Eigen::VectorXd as_vector(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(where + ": expected numbers");
        v[static_cast<long>(i)] = j[i].get<double>();
    }
    return v;
}

inline Eigen::MatrixXd as_matrix(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected an array of rows");
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    if (cols == 0) throw ConfigError(where + ": expected nonempty rows");
    Eigen::MatrixXd m(j.size(), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols) {
            throw ConfigError(where + ": ragged rows");
        }
        for (std::size_t k = 0; k < cols; ++k) {
            if (!j[i][k].is_number()) throw ConfigError(where + ": expected numbers");
            m(static_cast<long>(i), static_cast<long>(k)) = j[i][k].get<double>();
        }
    }
    return m;
}

} // namespace cfg

// ---- System specs -------------------------------------------------------------

/// Builds a chain from {"initial_law": [...], "kernels": [[[...]]]}.
inline NonstationaryChain build_chain(const nlohmann::json& spec, const std::string& where) {
    cfg::check_keys(spec, {"initial_law", "kernels"}, where);
    Eigen::VectorXd law = cfg::as_vector(cfg::require<nlohmann::json>(spec, "initial_law", where),
                                         where + ".initial_law");
    const auto kspec = cfg::require<nlohmann::json>(spec, "kernels", where);
    if (!kspec.is_array() || kspec.empty()) throw ConfigError(where + ".kernels: expected kernels");
    std::vector<Eigen::MatrixXd> kernels;
    for (std::size_t i = 0; i < kspec.size(); ++i) {
        kernels.push_back(cfg::as_matrix(kspec[i], where + ".kernels[" + std::to_string(i) + "]"));
    }
    try {
        return NonstationaryChain::cyclic(std::move(law), std::move(kernels));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

MatrixSystem build_system(const nlohmann::json& spec, std::uint64_t seed,
                          const std::string& where = "system");

namespace builtins {

struct Entry {
    std::string doc;
    std::function<MatrixSystem(const nlohmann::json&, std::uint64_t, const std::string&)> build;
};

inline MatrixSystem build_anderson(const nlohmann::json& p, std::uint64_t, const std::string& w) {
    cfg::check_keys(p, {"kernel", "initial_law", "potential", "C", "delta", "check_horizon"}, w);
    Eigen::MatrixXd k = cfg::as_matrix(cfg::require<nlohmann::json>(p, "kernel", w), w + ".kernel");
    Eigen::VectorXd law;
    if (p.contains("initial_law")) {
        law = cfg::as_vector(p.at("initial_law"), w + ".initial_law");
    } else {
        law = Eigen::VectorXd::Constant(k.rows(), 1.0 / static_cast<double>(k.rows()));
    }
    Eigen::VectorXd q = cfg::as_vector(cfg::require<nlohmann::json>(p, "potential", w), w + ".potential");
    const double C = cfg::require<double>(p, "C", w);
    const double delta = cfg::require<double>(p, "delta", w);
    const int horizon = cfg::get_or<int>(p, "check_horizon", 64, w);
    try {
        NonstationaryChain chain = NonstationaryChain::cyclic(std::move(law), {std::move(k)});
        return anderson_system(chain, {std::move(q)}, C, delta, horizon).system;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(w + ": " + e.what());
    }
}

inline MatrixSystem build_rotations(const nlohmann::json& p, std::uint64_t, const std::string& w) {
    cfg::check_keys(p, {"kernel", "initial_law", "angles"}, w);
    Eigen::MatrixXd k = cfg::as_matrix(cfg::require<nlohmann::json>(p, "kernel", w), w + ".kernel");
    Eigen::VectorXd law;
    if (p.contains("initial_law")) {
        law = cfg::as_vector(p.at("initial_law"), w + ".initial_law");
    } else {
        law = Eigen::VectorXd::Constant(k.rows(), 1.0 / static_cast<double>(k.rows()));
    }
    Eigen::VectorXd angles = cfg::as_vector(cfg::require<nlohmann::json>(p, "angles", w), w + ".angles");
    if (angles.size() != k.rows()) throw ConfigError(w + ".angles: one angle per state required");
    std::vector<UnimodularMatrix> tab;
    for (long x = 0; x < angles.size(); ++x) tab.push_back(UnimodularMatrix::rotation(angles[x]));
    try {
        NonstationaryChain chain = NonstationaryChain::cyclic(std::move(law), {std::move(k)});
        return MatrixSystem::cyclic(std::move(chain), {std::move(tab)});
    } catch (const std::invalid_argument& e) {
        throw ConfigError(w + ": " + e.what());
    }
}

inline MatrixSystem build_virtser(const nlohmann::json& p, std::uint64_t seed, const std::string& w) {
    cfg::check_keys(p, {"base", "p"}, w);
    MatrixSystem base = build_system(cfg::require<nlohmann::json>(p, "base", w), seed, w + ".base");
    const double prob = cfg::require<double>(p, "p", w);
    try {
        return virtser_lift(base, prob).lifted;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(w + ": " + e.what());
    }
}

inline MatrixSystem build_perturbed(const nlohmann::json& p, std::uint64_t seed,
                                    const std::string& w) {
    cfg::check_keys(p, {"base", "kind", "C", "t", "matrices", "pert_seed"}, w);
    MatrixSystem base = build_system(cfg::require<nlohmann::json>(p, "base", w), seed, w + ".base");
    const std::string kind = cfg::require<std::string>(p, "kind", w);
    try {
        if (kind == "rotations") {
            const auto pert_seed = cfg::get_or<std::uint64_t>(p, "pert_seed", 1u, w);
            CounterRng rng(pert_seed, 0);
            return perturb_system(
                base,
                [rng](int n) {
                    return UnimodularMatrix::rotation(2.0 * std::numbers::pi *
                                                      rng.uniform(static_cast<std::uint64_t>(n)));
                },
                1.0);
        }
        if (kind == "alternating-diag") {
            const double t = cfg::require<double>(p, "t", w);
            if (t <= 0.0) throw ConfigError(w + ".t: must be positive");
            const double C = cfg::get_or<double>(p, "C", std::max(t, 1.0 / t), w);
            Eigen::Matrix2d d1, d2;
            d1 << t, 0.0, 0.0, 1.0 / t;
            d2 << 1.0 / t, 0.0, 0.0, t;
            return perturb_system(base, {UnimodularMatrix(d1), UnimodularMatrix(d2)}, C);
        }
        if (kind == "matrices") {
            const double C = cfg::require<double>(p, "C", w);
            const auto ms = cfg::require<nlohmann::json>(p, "matrices", w);
            if (!ms.is_array() || ms.empty()) throw ConfigError(w + ".matrices: expected matrices");
            std::vector<UnimodularMatrix> cycle;
            for (std::size_t i = 0; i < ms.size(); ++i) {
                cycle.emplace_back(cfg::as_matrix(ms[i], w + ".matrices[" + std::to_string(i) + "]"));
            }
            return perturb_system(base, std::move(cycle), C);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(w + ": " + e.what());
    }
    throw ConfigError(w + ".kind: unknown perturbation \"" + kind + "\"");
}

inline MatrixSystem build_blocked(const nlohmann::json& p, std::uint64_t seed,
                                  const std::string& w) {
    cfg::check_keys(p, {"base", "k", "scheme", "c"}, w);
    MatrixSystem base = build_system(cfg::require<nlohmann::json>(p, "base", w), seed, w + ".base");
    try {
        if (p.contains("k")) {
            return block_system_uniform(base, cfg::require<int>(p, "k", w)).system;
        }
        const auto sspec = cfg::require<nlohmann::json>(p, "scheme", w);
        cfg::check_keys(sspec, {"n", "l"}, w + ".scheme");
        IntervalScheme scheme;
        for (const auto& v : cfg::require<std::vector<int>>(sspec, "n", w + ".scheme")) {
            scheme.n_points.push_back(v);
        }
        for (const auto& v : cfg::require<std::vector<int>>(sspec, "l", w + ".scheme")) {
            scheme.lengths.push_back(v);
        }
        return block_system(base, scheme, cfg::get_or<double>(p, "c", 0.0, w)).system;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(w + ": " + e.what());
    }
}

inline const std::map<std::string, Entry>& registry() {
    static const std::map<std::string, Entry> reg = {
        {"anderson",
         {"Markov Anderson transfer matrices [[q,-1],[1,0]].\n"
          "    params: kernel (r x r rows), initial_law (optional, default uniform),\n"
          "            potential (q per state), C (bound on |q|), delta (variance floor),\n"
          "            check_horizon (optional, default 64)",
          build_anderson}},
        {"rotations",
         {"Rotation-valued tables, the no-growth negative control.\n"
          "    params: kernel, initial_law (optional), angles (radians per state)",
          build_rotations}},
        {"virtser",
         {"Lazy-chain lift of a stationary base system; adjoins identity steps.\n"
          "    params: base (system spec), p (laziness, 0 <= p < 1)",
          build_virtser}},
        {"perturbed",
         {"Bounded deterministic distortion a_n g_n of a base system.\n"
          "    params: base (system spec), kind (rotations | alternating-diag | matrices),\n"
          "            C (norm bound; for matrices), t (for alternating-diag),\n"
          "            pert_seed (for rotations), matrices (for kind=matrices)",
          build_perturbed}},
        {"blocked",
         {"Regrouped time: eta_j = (xi_{a_j}, ..., xi_{b_j}) with per-block products.\n"
          "    params: base (system spec), k (uniform block length) or\n"
          "            scheme {n: [...], l: [...]} (interval endpoints), c (optional gap check)",
          build_blocked}},
    };
    return reg;
}

} // namespace builtins

inline MatrixSystem build_system(const nlohmann::json& spec, std::uint64_t seed,
                                 const std::string& where) {
    if (!spec.is_object()) throw ConfigError(where + ": expected an object");
    if (spec.contains("builtin")) {
        cfg::check_keys(spec, {"builtin", "params"}, where);
        const std::string name = cfg::require<std::string>(spec, "builtin", where);
        const auto& reg = builtins::registry();
        auto it = reg.find(name);
        if (it == reg.end()) {
            throw ConfigError(where + ".builtin: unknown builtin \"" + name + "\"");
        }
        nlohmann::json params = cfg::get_or<nlohmann::json>(spec, "params", nlohmann::json::object(), where);
        return it->second.build(params, seed, where + ".params");
    }
    cfg::check_keys(spec, {"chain", "tables"}, where);
    NonstationaryChain chain =
        build_chain(cfg::require<nlohmann::json>(spec, "chain", where), where + ".chain");
    const auto tspec = cfg::require<nlohmann::json>(spec, "tables", where);
    if (!tspec.is_array() || tspec.empty()) throw ConfigError(where + ".tables: expected tables");
    std::vector<std::vector<UnimodularMatrix>> tables;
    for (std::size_t j = 0; j < tspec.size(); ++j) {
        const auto& tj = tspec[j];
        if (!tj.is_array() || tj.empty()) {
            throw ConfigError(where + ".tables[" + std::to_string(j) + "]: expected per-state matrices");
        }
        std::vector<UnimodularMatrix> tab;
        for (std::size_t x = 0; x < tj.size(); ++x) {
            const std::string wx =
                where + ".tables[" + std::to_string(j) + "][" + std::to_string(x) + "]";
            try {
                tab.emplace_back(cfg::as_matrix(tj[x], wx));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(wx + ": " + e.what());
            }
        }
        tables.push_back(std::move(tab));
    }
    try {
        return MatrixSystem::cyclic(std::move(chain), std::move(tables));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

// ---- Experiment configuration ---------------------------------------------------

struct SimulateParams {
    std::vector<int> horizons{1000, 2000, 5000, 10000};
    int trajectories = 200;
};

struct DecayParams {
    std::vector<int> horizons{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    long samples = 10000;
    bool exact = false;
    int mode_cutoff = 64; // used for the exact column
};

struct CertifyParams {
    double beta = 0.999;
    double margin = 1e-2;
    int mode_cutoff = 64;
    std::vector<int> steps{2};
    std::string target = "two-step"; // or "measure"
};

struct InvariantParams {
    int mode_cutoff = 32;
    int lemma_step = 2;   // n for the Khat/Vhat identities
    int chain_step = 5;   // horizon for the decay chaining check
    int trials = 20;      // random functions per identity
    double tol_identity = 1e-10;
    double tol_lemma = 1e-8;
    double tol_qv = 1e-8;
    double tol_chain = 1e-6;
};

struct ExperimentConfig {
    std::string task;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    int threads = 0; // 0: resolve from env / default 1
    nlohmann::json system_spec;
    SimulateParams simulate;
    DecayParams decay;
    CertifyParams certify;
    InvariantParams invariants;
    nlohmann::json raw;

    std::string canonical() const { return raw.dump(); }
    std::uint64_t hash() const { return fnv1a64(canonical()); }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        cfg::check_keys(j, {"task", "seed", "out_dir", "threads", "system", "simulate", "decay",
                            "certify", "invariants"},
                        "config");
        ExperimentConfig c;
        c.raw = j;
        c.task = cfg::get_or<std::string>(j, "task", "", "config");
        const std::vector<std::string> known_tasks = {"simulate", "certify", "decay",
                                                      "check-invariants", ""};
        if (std::find(known_tasks.begin(), known_tasks.end(), c.task) == known_tasks.end()) {
            throw ConfigError("config.task: unknown task \"" + c.task + "\"");
        }
        c.seed = cfg::get_or<std::uint64_t>(j, "seed", 1u, "config");
        c.out_dir = cfg::get_or<std::string>(j, "out_dir", "out", "config");
        c.threads = cfg::get_or<int>(j, "threads", 0, "config");
        if (!j.contains("system")) throw ConfigError("config: missing required key \"system\"");
        c.system_spec = j.at("system");
        // validate the system spec eagerly so errors name the field
        build_system(c.system_spec, c.seed);

        if (j.contains("simulate")) {
            const auto& s = j.at("simulate");
            cfg::check_keys(s, {"horizons", "trajectories"}, "config.simulate");
            c.simulate.horizons =
                cfg::get_or<std::vector<int>>(s, "horizons", c.simulate.horizons, "config.simulate");
            c.simulate.trajectories =
                cfg::get_or<int>(s, "trajectories", c.simulate.trajectories, "config.simulate");
        }
        if (j.contains("decay")) {
            const auto& s = j.at("decay");
            cfg::check_keys(s, {"horizons", "samples", "exact", "mode_cutoff"}, "config.decay");
            c.decay.horizons =
                cfg::get_or<std::vector<int>>(s, "horizons", c.decay.horizons, "config.decay");
            c.decay.samples = cfg::get_or<long>(s, "samples", c.decay.samples, "config.decay");
            c.decay.exact = cfg::get_or<bool>(s, "exact", c.decay.exact, "config.decay");
            c.decay.mode_cutoff =
                cfg::get_or<int>(s, "mode_cutoff", c.decay.mode_cutoff, "config.decay");
        }
        if (j.contains("certify")) {
            const auto& s = j.at("certify");
            cfg::check_keys(s, {"beta", "margin", "mode_cutoff", "steps", "target"}, "config.certify");
            c.certify.beta = cfg::get_or<double>(s, "beta", c.certify.beta, "config.certify");
            c.certify.margin = cfg::get_or<double>(s, "margin", c.certify.margin, "config.certify");
            c.certify.mode_cutoff =
                cfg::get_or<int>(s, "mode_cutoff", c.certify.mode_cutoff, "config.certify");
            c.certify.steps =
                cfg::get_or<std::vector<int>>(s, "steps", c.certify.steps, "config.certify");
            c.certify.target = cfg::get_or<std::string>(s, "target", c.certify.target, "config.certify");
            if (c.certify.target != "two-step" && c.certify.target != "measure") {
                throw ConfigError("config.certify.target: expected \"two-step\" or \"measure\"");
            }
        }
        if (j.contains("invariants")) {
            const auto& s = j.at("invariants");
            cfg::check_keys(s,
                            {"mode_cutoff", "lemma_step", "chain_step", "trials", "tol_identity",
                             "tol_lemma", "tol_qv", "tol_chain"},
                            "config.invariants");
            auto& iv = c.invariants;
            iv.mode_cutoff = cfg::get_or<int>(s, "mode_cutoff", iv.mode_cutoff, "config.invariants");
            iv.lemma_step = cfg::get_or<int>(s, "lemma_step", iv.lemma_step, "config.invariants");
            iv.chain_step = cfg::get_or<int>(s, "chain_step", iv.chain_step, "config.invariants");
            iv.trials = cfg::get_or<int>(s, "trials", iv.trials, "config.invariants");
            iv.tol_identity = cfg::get_or<double>(s, "tol_identity", iv.tol_identity, "config.invariants");
            iv.tol_lemma = cfg::get_or<double>(s, "tol_lemma", iv.tol_lemma, "config.invariants");
            iv.tol_qv = cfg::get_or<double>(s, "tol_qv", iv.tol_qv, "config.invariants");
            iv.tol_chain = cfg::get_or<double>(s, "tol_chain", iv.tol_chain, "config.invariants");
        }
        return c;
    }

    static ExperimentConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read config file: " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config parse error in " + path + ": " + e.what());
        }
        return from_json(j);
    }
};

} // namespace markprod
