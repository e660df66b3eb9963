#pragma once

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "markprod/cocycle_sim.hpp"
#include "markprod/config.hpp"
#include "markprod/constructions.hpp"
#include "markprod/product_space.hpp"
#include "markprod/sphere.hpp"
#include "markprod/version.hpp"

namespace markprod {

// Exit codes: 0 success, 2 config error, 3 failed certification (margin not
// met), 4 failed invariant suite.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitCertification = 3;
inline constexpr int kExitInvariants = 4;

namespace detail {

inline std::string hex_hash(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace detail

/// Comment lines embedded at the top of every output file.
inline std::vector<std::string> output_meta(const ExperimentConfig& config) {
    return {version_line(), "config_hash=" + detail::hex_hash(config.hash()),
            "seed=" + std::to_string(config.seed)};
}

inline int resolve_threads(const ExperimentConfig& config) {
    if (config.threads > 0) return config.threads;
    if (const char* env = std::getenv("MARKPROD_THREADS")) {
        const int t = std::atoi(env);
        if (t > 0) return t;
    }
    return 1;
}

// ---- task: simulate -----------------------------------------------------------

inline int run_simulate(const ExperimentConfig& config, std::ostream& log) {
    MatrixSystem system = build_system(config.system_spec, config.seed);
    GrowthReport rep = lyapunov_estimate(system, config.simulate.horizons,
                                         config.simulate.trajectories, config.seed,
                                         resolve_threads(config));

    std::filesystem::create_directories(config.out_dir);
    {
        std::ofstream csv(std::filesystem::path(config.out_dir) / "growth.csv",
                          std::ios::binary);
        write_growth_csv(rep, csv, output_meta(config));
    }
    nlohmann::json summary = {
        {"tool", version_line()},
        {"config_hash", detail::hex_hash(config.hash())},
        {"task", "simulate"},
        {"seed", config.seed},
        {"trajectories", rep.trajectories},
        {"fitted_slope", rep.fitted_slope},
        {"fitted_r2", rep.fitted_r2},
        {"min_rate_at_max_horizon", rep.rows.back().min},
        {"mean_rate_at_max_horizon", rep.rows.back().mean},
        {"superlinear_hint", rep.superlinear_hint},
        {"note", "min over trajectories is a finite-n liminf proxy, not the a.s. liminf"},
    };
    std::ofstream js(std::filesystem::path(config.out_dir) / "summary.json", std::ios::binary);
    js << summary.dump(2) << "\n";
    log << "simulate: slope=" << rep.fitted_slope << " min_rate=" << rep.rows.back().min << "\n";
    return kExitOk;
}

// ---- task: decay ----------------------------------------------------------------

inline int run_decay(const ExperimentConfig& config, std::ostream& log) {
    MatrixSystem system = build_system(config.system_spec, config.seed);
    DecayCurve curve = moment_decay_mc(system, config.decay.horizons, config.decay.samples,
                                       config.seed, resolve_threads(config));

    std::unique_ptr<std::vector<double>> exact;
    if (config.decay.exact) {
        auto grid = std::make_shared<const CircleGrid>(config.decay.mode_cutoff);
        exact = std::make_unique<std::vector<double>>();
        for (int n : config.decay.horizons) exact->push_back(moment_functional(system, n, grid));
    }

    std::filesystem::create_directories(config.out_dir);
    {
        std::ofstream csv(std::filesystem::path(config.out_dir) / "decay.csv", std::ios::binary);
        write_decay_csv(curve, csv, output_meta(config), exact.get());
    }
    std::vector<double> xs, ys;
    for (const auto& r : curve.rows) {
        if (r.mean > 0.0) {
            xs.push_back(static_cast<double>(r.horizon));
            ys.push_back(std::log(r.mean));
        }
    }
    nlohmann::json summary = {
        {"tool", version_line()},
        {"config_hash", detail::hex_hash(config.hash())},
        {"task", "decay"},
        {"seed", config.seed},
        {"samples", config.decay.samples},
    };
    if (xs.size() >= 2) {
        LinearFit fit = linear_fit(xs, ys);
        summary["log_slope"] = fit.slope;
        summary["log_r2"] = fit.r_squared;
    }
    std::ofstream js(std::filesystem::path(config.out_dir) / "summary.json", std::ios::binary);
    js << summary.dump(2) << "\n";
    log << "decay: points=" << curve.rows.size() << "\n";
    return kExitOk;
}

// ---- task: certify -----------------------------------------------------------------

inline int run_certify(const ExperimentConfig& config, std::ostream& log) {
    MatrixSystem system = build_system(config.system_spec, config.seed);
    std::vector<NormCertificate> certs;
    for (int step : config.certify.steps) {
        NormCertificate cert;
        MatrixMeasure nu = step_measure(system, step);
        if (config.certify.target == "two-step") {
            cert = two_step_certificate(system, step, config.certify.mode_cutoff,
                                        config.certify.beta, config.certify.margin);
        } else {
            cert = certify_measure_norm(nu, config.certify.mode_cutoff, config.certify.beta,
                                        config.certify.margin);
        }
        if (!cert.certified) {
            HeuristicReport h = invariant_measure_heuristic(nu);
            if (h.verdict != GroupVerdict::NoneFound) {
                cert.note = "no contraction; invariant measure suspected (" +
                            std::string(to_string(h.verdict)) + ")";
            } else {
                cert.note = "no contraction at the tested resolutions";
            }
        } else {
            cert.note = "finite-rank Galerkin evidence with refinement margin; heuristic, not a proof";
        }
        certs.push_back(std::move(cert));
    }

    std::filesystem::create_directories(config.out_dir);
    std::ofstream out(std::filesystem::path(config.out_dir) / "certificates.txt", std::ios::binary);
    for (const auto& line : output_meta(config)) out << "# " << line << "\n";
    bool all_ok = true;
    for (const auto& c : certs) {
        out << format_certificate(c) << "\n";
        log << format_certificate(c) << "\n";
        all_ok = all_ok && c.certified;
    }
    return all_ok ? kExitOk : kExitCertification;
}

// ---- task: check-invariants ----------------------------------------------------------

struct InvariantResult {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    bool ok = false;
};

/// Operator-identity suite on the configured system: Gram, projections,
/// the Khat/Vhat lemma parts, the QV isomorphism, and decay chaining.
inline std::vector<InvariantResult> invariant_suite(const MatrixSystem& system,
                                                    const InvariantParams& p,
                                                    std::uint64_t seed) {
    std::vector<InvariantResult> out;
    auto push = [&](const std::string& name, double value, double bound) {
        out.push_back(InvariantResult{name, value, bound, value <= bound});
    };

    auto grid = std::make_shared<const CircleGrid>(p.mode_cutoff);
    const int n = p.lemma_step;

    // Gram and V_I
    push("gram-identity",
         operator_norm(grid->gram() - Eigen::MatrixXd::Identity(grid->dim(), grid->dim())),
         p.tol_identity);
    push("V-identity",
         operator_norm(assemble_V(UnimodularMatrix::identity(2), *grid) -
                       Eigen::MatrixXd::Identity(grid->dim(), grid->dim())),
         p.tol_identity);

    ProductSpace sp_n = make_product_space(system.chain(), n, grid);
    ProductSpace sp_n1 = make_product_space(system.chain(), n + 1, grid);
    ProductOperator P1 = project_P(sp_n1);
    ProductOperator Q1 = project_Q(sp_n1);
    ProductOperator K = assemble_Khat(system, n, grid);

    // projections algebra
    push("P-plus-Q-identity",
         operator_norm(P1.matrix + Q1.matrix -
                       Eigen::MatrixXd::Identity(sp_n1.dim(), sp_n1.dim())),
         p.tol_identity);
    push("P-idempotent", operator_norm(P1.matrix * P1.matrix - P1.matrix), p.tol_identity);
    push("Q-idempotent", operator_norm(Q1.matrix * Q1.matrix - Q1.matrix), p.tol_identity);

    CounterRng rng(seed, 0x1eafu);
    auto random_vec = [&](int dim, std::uint64_t stream) {
        Eigen::VectorXd v(dim);
        for (int i = 0; i < dim; ++i) {
            v[i] = rng.uniform(stream, static_cast<std::uint64_t>(i)) - 0.5;
        }
        return v;
    };

    const double c = zero_mean_norm(system.chain(), n);
    double worst_i = 0.0, worst_ii = 0.0, worst_pyth = 0.0, worst_iv = 0.0, worst_a1 = 0.0;
    for (int t = 0; t < p.trials; ++t) {
        Eigen::VectorXd f = random_vec(sp_n1.dim(), static_cast<std::uint64_t>(t));
        f.normalize();
        Eigen::VectorXd pf = P1.apply(f);
        Eigen::VectorXd qf = Q1.apply(f);
        Eigen::VectorXd kpf = K.apply(pf);
        Eigen::VectorXd kqf = K.apply(qf);
        Eigen::VectorXd kf = K.apply(f);

        // (i) Khat P maps into the orthogonal complement of L_n
        worst_i = std::max(worst_i, sp_n.restrict_sphere(kpf).lpNorm<Eigen::Infinity>());
        // (ii) Khat Q is an isometry into L_n
        worst_ii = std::max(worst_ii, std::abs(kqf.norm() - qf.norm()));
        worst_ii = std::max(
            worst_ii, (kqf - sp_n.embed_sphere(sp_n.restrict_sphere(kqf))).lpNorm<Eigen::Infinity>());
        // Pythagoras
        worst_pyth = std::max(worst_pyth, std::abs(kf.squaredNorm() - kpf.squaredNorm() -
                                                   qf.squaredNorm()));
        // (iv) with epsilon realized by this f
        const double eps = 1.0 - kf.squaredNorm() / f.squaredNorm();
        if (c < 1.0) {
            const double bound = std::max(eps, 0.0) / (1.0 - c * c) * f.squaredNorm();
            worst_iv = std::max(worst_iv, pf.squaredNorm() - bound);
        }
        // appendix: zero-mean functions integrate to zero against mu_n
        worst_a1 = std::max(worst_a1, sp_n1.restrict_sphere(pf).lpNorm<Eigen::Infinity>());
    }
    push("lemma-i-KP-into-H0", worst_i, p.tol_lemma);
    push("lemma-ii-KQ-isometry", worst_ii, p.tol_lemma);
    push("lemma-iii-KP-norm-vs-c", operator_norm(K.matrix * P1.matrix) - c, p.tol_lemma);
    push("lemma-iv-projection-bound", worst_iv, p.tol_lemma);
    push("pythagoras", worst_pyth, p.tol_lemma);
    push("zero-mean-average", worst_a1, p.tol_lemma);

    push("qv-isomorphism", QV_isomorphism_check(system, n, grid), p.tol_qv);

    // decay chaining at the largest odd step <= chain_step
    int chain_n = p.chain_step;
    if (chain_n % 2 == 0) --chain_n;
    if (chain_n >= 3) {
        const double mf = moment_functional(system, chain_n, grid);
        const double bound = decay_chain_bound(system, chain_n, grid);
        push("decay-chaining", mf - bound, p.tol_chain);
    }
    return out;
}

inline int run_check_invariants(const ExperimentConfig& config, std::ostream& log) {
    MatrixSystem system = build_system(config.system_spec, config.seed);
    std::vector<InvariantResult> results = invariant_suite(system, config.invariants, config.seed);

    std::filesystem::create_directories(config.out_dir);
    std::ofstream out(std::filesystem::path(config.out_dir) / "invariants.txt", std::ios::binary);
    for (const auto& line : output_meta(config)) out << "# " << line << "\n";
    bool all_ok = true;
    for (const auto& r : results) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "[%s] %s: value=%.3e bound=%.3e",
                      r.ok ? "ok" : "FAIL", r.name.c_str(), r.value, r.bound);
        out << buf << "\n";
        log << buf << "\n";
        all_ok = all_ok && r.ok;
    }
    return all_ok ? kExitOk : kExitInvariants;
}

// ---- task: list-builtins ---------------------------------------------------------------

inline int run_list_builtins(std::ostream& log) {
    log << version_line() << " builtin constructions:\n";
    for (const auto& [name, entry] : builtins::registry()) {
        log << "  " << name << ": " << entry.doc << "\n";
    }
    return kExitOk;
}

// ---- dispatch ---------------------------------------------------------------------------

inline int run_experiment(const ExperimentConfig& config, std::ostream& log) {
    try {
        if (config.task == "simulate") return run_simulate(config, log);
        if (config.task == "decay") return run_decay(config, log);
        if (config.task == "certify") return run_certify(config, log);
        if (config.task == "check-invariants") return run_check_invariants(config, log);
        throw ConfigError("config.task: no task selected");
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
}

/// Loads the config, applies command-line overrides, runs the task.
inline int run_task(const std::string& task, const std::string& config_path, std::ostream& log,
                    bool has_seed = false, std::uint64_t seed = 0,
                    const std::string& out_override = "", int threads_override = 0) {
    ExperimentConfig config;
    try {
        config = ExperimentConfig::load(config_path);
        if (!config.task.empty() && config.task != task) {
            throw ConfigError("config.task = \"" + config.task +
                              "\" does not match the requested subcommand \"" + task + "\"");
        }
        config.task = task;
        if (has_seed) config.seed = seed;
        if (!out_override.empty()) config.out_dir = out_override;
        if (threads_override > 0) config.threads = threads_override;
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    return run_experiment(config, log);
}

} // namespace markprod
