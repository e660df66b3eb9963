#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "markprod/linalg.hpp"
#include "markprod/markov.hpp"
#include "markprod/system.hpp"

namespace markprod {

/// The transfer matrix [[q, -1], [1, 0]].
inline UnimodularMatrix anderson_matrix(double q) {
    Eigen::Matrix2d g;
    g << q, -1.0, 1.0, 0.0;
    return UnimodularMatrix(g);
}

// ---- Anderson systems -------------------------------------------------------

/// Markov-driven Anderson transfer matrices with a bounded, non-degenerate
/// potential: |q_n| <= C and Var(q_n) >= delta under mu_n, checked per step.
struct AndersonSystem {
    MatrixSystem system;
    double bound_C = 0.0;
    double var_delta = 0.0;
    int checked_horizon = 0;
};

/// `potentials` is a cyclic per-step schedule; entry j is the map
/// state -> q value at steps j, j + P, ... The bound and variance
/// constraints are verified against the marginals for n = 1..check_horizon.
inline AndersonSystem anderson_system(const NonstationaryChain& chain,
                                      std::vector<Eigen::VectorXd> potentials, double C,
                                      double delta, int check_horizon = 64) {
    if (potentials.empty()) throw std::invalid_argument("anderson_system: no potentials");
    if (check_horizon < 1) throw std::invalid_argument("anderson_system: check horizon must be >= 1");

    MarginalSequence mus = marginal_evolve(chain, check_horizon);
    const int period = static_cast<int>(potentials.size());
    for (int n = 1; n <= check_horizon; ++n) {
        const Eigen::VectorXd& q = potentials[static_cast<std::size_t>((n - 1) % period)];
        if (q.size() != chain.state_count(n)) {
            throw std::invalid_argument("anderson_system: potential at step " + std::to_string(n) +
                                        " has " + std::to_string(q.size()) + " entries, chain has " +
                                        std::to_string(chain.state_count(n)) + " states");
        }
        const Eigen::VectorXd& mu = mus.law(n);
        double mean = 0.0, second = 0.0;
        for (long x = 0; x < mu.size(); ++x) {
            if (mu[x] == 0.0) continue;
            if (std::abs(q[x]) > C) {
                throw std::invalid_argument("anderson_system: |q| = " + std::to_string(std::abs(q[x])) +
                                            " exceeds C = " + std::to_string(C) + " at step " +
                                            std::to_string(n) + ", state " + std::to_string(x));
            }
            mean += mu[x] * q[x];
            second += mu[x] * q[x] * q[x];
        }
        const double var = second - mean * mean;
        if (var < delta) {
            throw std::invalid_argument("anderson_system: Var(q) = " + std::to_string(var) +
                                        " below delta = " + std::to_string(delta) + " at step " +
                                        std::to_string(n));
        }
    }

    std::vector<std::vector<UnimodularMatrix>> tables;
    tables.reserve(potentials.size());
    for (const auto& q : potentials) {
        std::vector<UnimodularMatrix> tab;
        tab.reserve(static_cast<std::size_t>(q.size()));
        for (long x = 0; x < q.size(); ++x) tab.push_back(anderson_matrix(q[x]));
        tables.push_back(std::move(tab));
    }
    return AndersonSystem{MatrixSystem::cyclic(chain, std::move(tables)), C, delta, check_horizon};
}

/// g_z g_y (g_zbar g_ybar)^{-1} e with e = (1, 0)^T; equals
/// (z (ybar - y) + 1, ybar - y)^T, which is not proportional to e whenever
/// ybar != y. This is the witness that no measure supported on {e, -e}
/// survives the two-step group.
inline Eigen::Vector2d two_step_group_witness(double y, double z, double ybar, double zbar) {
    if (std::abs(ybar - y) <= 1e-12) {
        throw std::invalid_argument("two_step_group_witness: ybar == y gives the degenerate witness e");
    }
    const Eigen::Matrix2d prod = anderson_matrix(z).entries() * anderson_matrix(y).entries() *
                                 (anderson_matrix(zbar).entries() * anderson_matrix(ybar).entries())
                                     .inverse();
    return prod * Eigen::Vector2d(1.0, 0.0);
}

// ---- Bounded perturbations --------------------------------------------------

/// Replace g_n by a_n g_n for a deterministic bounded unimodular sequence,
/// ||a_n|| <= C. Growth persists; the limit generally does not.
inline MatrixSystem perturb_system(const MatrixSystem& system,
                                   std::function<UnimodularMatrix(int)> perturbation, double C) {
    if (!perturbation) throw std::invalid_argument("perturb_system: null perturbation");
    const int m = system.matrix_dim();
    MatrixSystem base = system;
    auto pert = std::move(perturbation);
    const double tol = 1e-9;
    return MatrixSystem::generated(
        system.chain(),
        [base, pert, C, m, tol](int n, int x) {
            UnimodularMatrix a = pert(n);
            if (a.dim() != m) {
                throw std::invalid_argument("perturb_system: perturbation dimension mismatch at step " +
                                            std::to_string(n));
            }
            const double norm = a.spectral_norm();
            if (norm > C + tol) {
                throw std::invalid_argument("perturb_system: ||a_" + std::to_string(n) + "|| = " +
                                            std::to_string(norm) + " exceeds the bound C = " +
                                            std::to_string(C));
            }
            return a * base.matrix_at(n, x);
        },
        m);
}

inline MatrixSystem perturb_system(const MatrixSystem& system,
                                   std::vector<UnimodularMatrix> cycle, double C) {
    if (cycle.empty()) throw std::invalid_argument("perturb_system: empty perturbation list");
    return perturb_system(
        system,
        [cycle = std::move(cycle)](int n) {
            return cycle[static_cast<std::size_t>((n - 1) % static_cast<int>(cycle.size()))];
        },
        C);
}

// ---- The Virtser lift -------------------------------------------------------

/// The lazy-chain lift: phase space X u Xbar, an identity matrix step taken
/// with probability p, so the lifted measure supports supp(nu) u {I}. The
/// state layout is [X states 0..r-1, Xbar states r..2r-1].
struct VirtserLift {
    MatrixSystem lifted;
    double p = 0.0;
    double q = 1.0;
    int base_states = 0;
    Eigen::VectorXd mu_tilde;      // (q mu, p mu)
    Eigen::MatrixXd lifted_kernel; // K-tilde, 2r x 2r

    bool is_identity_state(int s) const { return s >= base_states; }

    /// max-norm defect of mu-tilde K-tilde = mu-tilde.
    double invariance_defect() const {
        return (lifted_kernel.transpose() * mu_tilde - mu_tilde).lpNorm<Eigen::Infinity>();
    }

    /// Norm of K-tilde restricted to the invariant subspace of functions with
    /// phi(x) = psi((x,1)) and zero mean; this is the quantity bounded by
    /// q c + p. Computed from the lifted kernel on supported states.
    double lifted_zero_mean_norm(double tol = 1e-10) const {
        const std::vector<int> sup = detail::support(mu_tilde);
        const int ns = static_cast<int>(sup.size());
        Eigen::VectorXd w(ns);
        for (int i = 0; i < ns; ++i) w[i] = mu_tilde[sup[i]];
        Eigen::MatrixXd a(ns, ns);
        for (int i = 0; i < ns; ++i) {
            for (int j = 0; j < ns; ++j) {
                a(i, j) = std::sqrt(w[i]) * lifted_kernel(sup[i], sup[j]) / std::sqrt(w[j]);
            }
        }
        // basis of J(H^0): phi = psi, zero mean against the base marginal
        std::vector<int> base_sup;
        for (int x = 0; x < base_states; ++x) {
            if (mu_tilde[x] > 0.0 || mu_tilde[x + base_states] > 0.0) base_sup.push_back(x);
        }
        const int nb = static_cast<int>(base_sup.size());
        if (nb <= 1) return 0.0;
        Eigen::VectorXd base_mu(nb);
        for (int i = 0; i < nb; ++i) {
            base_mu[i] = mu_tilde[base_sup[i]] + mu_tilde[base_sup[i] + base_states];
        }
        Eigen::MatrixXd embed = Eigen::MatrixXd::Zero(ns, nb); // J in weighted coordinates
        for (int i = 0; i < ns; ++i) {
            const int x = sup[i] % base_states;
            for (int jb = 0; jb < nb; ++jb) {
                if (base_sup[jb] == x) {
                    embed(i, jb) = std::sqrt(w[i]) / std::sqrt(base_mu[jb]);
                }
            }
        }
        Eigen::MatrixXd zero_mean = detail::complement_basis(base_mu.cwiseSqrt());
        return operator_norm(a * embed * zero_mean, tol);
    }
};

inline VirtserLift virtser_lift(const MatrixSystem& base, double p,
                                double stationarity_tol = 1e-10) {
    if (p < 0.0 || p >= 1.0) {
        throw std::invalid_argument("virtser_lift: need 0 <= p < 1, got " + std::to_string(p));
    }
    const NonstationaryChain& chain = base.chain();
    if (!chain.is_cyclic() || chain.cycle_length() != 1) {
        throw std::invalid_argument("virtser_lift: the base chain must be time-homogeneous");
    }
    Eigen::MatrixXd k = chain.kernel(1);
    const Eigen::VectorXd& mu = chain.initial_law();
    const double defect = (k.transpose() * mu - mu).lpNorm<Eigen::Infinity>();
    if (defect > stationarity_tol) {
        throw std::invalid_argument("virtser_lift: base chain is not stationary (defect " +
                                    std::to_string(defect) + "); stationarity is required");
    }

    const int r = static_cast<int>(mu.size());
    const double q = 1.0 - p;
    Eigen::MatrixXd lifted_kernel = Eigen::MatrixXd::Zero(2 * r, 2 * r);
    for (int x = 0; x < r; ++x) {
        for (int y = 0; y < r; ++y) {
            lifted_kernel(x, y) = q * k(x, y);
            lifted_kernel(x + r, y) = q * k(x, y);
        }
        lifted_kernel(x, x + r) = p;
        lifted_kernel(x + r, x + r) = p;
    }
    Eigen::VectorXd mu_tilde(2 * r);
    mu_tilde.head(r) = q * mu;
    mu_tilde.tail(r) = p * mu;

    NonstationaryChain lifted_chain = NonstationaryChain::cyclic(mu_tilde, {lifted_kernel});
    std::vector<UnimodularMatrix> table = base.table(1);
    const int m = base.matrix_dim();
    for (int x = 0; x < r; ++x) table.push_back(UnimodularMatrix::identity(m));

    VirtserLift lift;
    lift.lifted = MatrixSystem::cyclic(std::move(lifted_chain), {std::move(table)});
    lift.p = p;
    lift.q = q;
    lift.base_states = r;
    lift.mu_tilde = std::move(mu_tilde);
    lift.lifted_kernel = std::move(lifted_kernel);
    return lift;
}

// ---- Blocking ---------------------------------------------------------------

/// Interval endpoints (n_j, l_j) with n_1 >= 1, l_j >= 1, n_{j+1} >= n_j + l_j.
struct IntervalScheme {
    std::vector<int> n_points;
    std::vector<int> lengths;

    void validate() const {
        if (n_points.size() != lengths.size()) {
            throw std::invalid_argument("interval scheme: n and l lists differ in length");
        }
        if (n_points.size() < 2) {
            throw std::invalid_argument("interval scheme: need at least two (n_j, l_j) pairs");
        }
        if (n_points.front() < 1) throw std::invalid_argument("interval scheme: n_1 must be >= 1");
        for (std::size_t j = 0; j < n_points.size(); ++j) {
            if (lengths[j] < 1) {
                throw std::invalid_argument("interval scheme: l_" + std::to_string(j + 1) +
                                            " must be >= 1");
            }
            if (j + 1 < n_points.size() && n_points[j + 1] < n_points[j] + lengths[j]) {
                throw std::invalid_argument("interval scheme: n_" + std::to_string(j + 2) + " = " +
                                            std::to_string(n_points[j + 1]) + " violates n_{j+1} >= n_j + l_j = " +
                                            std::to_string(n_points[j] + lengths[j]));
            }
        }
    }
};

namespace detail {

inline constexpr int kBlockStateCap = 4096;

/// Lexicographic enumeration of base-state tuples for steps [a, b].
inline std::vector<std::vector<int>> enumerate_block_paths(const NonstationaryChain& base, int a,
                                                           int b) {
    long total = 1;
    std::vector<int> counts;
    for (int t = a; t <= b; ++t) {
        counts.push_back(base.state_count(t));
        total *= counts.back();
        if (total > kBlockStateCap) {
            throw std::invalid_argument("block [" + std::to_string(a) + "," + std::to_string(b) +
                                        "] has more than " + std::to_string(kBlockStateCap) +
                                        " path states");
        }
    }
    std::vector<std::vector<int>> paths;
    paths.reserve(static_cast<std::size_t>(total));
    std::vector<int> cur(counts.size(), 0);
    for (long i = 0; i < total; ++i) {
        paths.push_back(cur);
        for (int pos = static_cast<int>(counts.size()) - 1; pos >= 0; --pos) {
            if (++cur[static_cast<std::size_t>(pos)] < counts[static_cast<std::size_t>(pos)]) break;
            cur[static_cast<std::size_t>(pos)] = 0;
        }
    }
    return paths;
}

inline double path_weight(const NonstationaryChain& base, int a, const std::vector<int>& path) {
    double w = 1.0;
    for (std::size_t t = 0; t + 1 < path.size(); ++t) {
        w *= base.kernel(a + static_cast<int>(t))(path[t], path[t + 1]);
    }
    return w;
}

inline UnimodularMatrix blocked_matrix(const MatrixSystem& base, int a,
                                       const std::vector<int>& path) {
    UnimodularMatrix prod = UnimodularMatrix::identity(base.matrix_dim());
    for (std::size_t t = 0; t < path.size(); ++t) {
        prod = base.matrix_at(a + static_cast<int>(t), path[t]) * prod;
    }
    return prod;
}

} // namespace detail

/// The chain eta_j = (xi_{a_j}, ..., xi_{b_j}) with the per-block matrix
/// products as tables. Blocked products reproduce the flat products exactly:
/// gbar_j ... gbar_1 = g_{b_j} ... g_1.
struct BlockedSystem {
    MatrixSystem system;
    std::vector<std::pair<int, int>> intervals;                // [a_j, b_j], j = 1..blocks
    std::vector<std::vector<std::vector<int>>> block_paths;    // block -> state -> base path

    int blocks() const { return static_cast<int>(intervals.size()); }
};

/// General interval blocking. With J supplied pairs the usable blocks are
/// j = 1..J-1 (the odd-j right endpoint is n_{j+1}). If `c` is positive the
/// spectral-gap precondition ||K0|| <= c is verified at every n_j and
/// n_j + l_j named by the scheme.
inline BlockedSystem block_system(const MatrixSystem& base, const IntervalScheme& scheme,
                                  double c = 0.0) {
    scheme.validate();
    const int pairs = static_cast<int>(scheme.n_points.size());
    if (c > 0.0) {
        for (int j = 0; j < pairs; ++j) {
            for (int endpoint : {scheme.n_points[j], scheme.n_points[j] + scheme.lengths[j]}) {
                const double norm = zero_mean_norm(base.chain(), endpoint);
                if (norm > c + 1e-9) {
                    throw std::invalid_argument("block_system: ||K0|| = " + std::to_string(norm) +
                                                " at step " + std::to_string(endpoint) +
                                                " exceeds the required c = " + std::to_string(c));
                }
            }
        }
    }

    // a_j, b_j per the alternating rule, with n_0 = l_0 = 0
    std::vector<std::pair<int, int>> ab;
    for (int j = 1; j < pairs; ++j) {
        int a, b;
        if (j % 2 == 1) {
            a = (j == 1 ? 1 : scheme.n_points[j - 2] + scheme.lengths[j - 2] + 1);
            b = scheme.n_points[j]; // n_{j+1} in 1-based paper indexing
        } else {
            a = scheme.n_points[j - 1] + 1;
            b = scheme.n_points[j - 1] + scheme.lengths[j - 1];
        }
        if (b < a) {
            throw std::invalid_argument("block_system: interval [" + std::to_string(a) + "," +
                                        std::to_string(b) + "] at block " + std::to_string(j) +
                                        " is empty");
        }
        ab.emplace_back(a, b);
    }

    BlockedSystem out;
    out.intervals = ab;
    out.block_paths.reserve(ab.size());
    for (const auto& [a, b] : ab) {
        out.block_paths.push_back(detail::enumerate_block_paths(base.chain(), a, b));
    }

    // blocked initial law over block-1 paths
    const auto& first_paths = out.block_paths.front();
    Eigen::VectorXd law(static_cast<long>(first_paths.size()));
    const Eigen::VectorXd& mu1 = base.chain().initial_law();
    for (std::size_t i = 0; i < first_paths.size(); ++i) {
        law[static_cast<long>(i)] =
            mu1[first_paths[i].front()] * detail::path_weight(base.chain(), ab.front().first, first_paths[i]);
    }

    // blocked kernels j -> j+1
    std::vector<Eigen::MatrixXd> kernels;
    for (std::size_t j = 0; j + 1 < ab.size(); ++j) {
        const auto& from = out.block_paths[j];
        const auto& to = out.block_paths[j + 1];
        Eigen::MatrixXd kk(static_cast<long>(from.size()), static_cast<long>(to.size()));
        for (std::size_t i = 0; i < from.size(); ++i) {
            for (std::size_t jj = 0; jj < to.size(); ++jj) {
                kk(static_cast<long>(i), static_cast<long>(jj)) =
                    base.chain().kernel(ab[j].second)(from[i].back(), to[jj].front()) *
                    detail::path_weight(base.chain(), ab[j + 1].first, to[jj]);
            }
        }
        kernels.push_back(std::move(kk));
    }

    // finite schedule: generator that refuses steps beyond the scheme
    const int usable = static_cast<int>(ab.size());
    NonstationaryChain blocked_chain = NonstationaryChain::generated(
        law, [kernels, usable](int j) {
            if (j < 1 || j > static_cast<int>(kernels.size())) {
                throw std::invalid_argument("blocked chain: step " + std::to_string(j) +
                                            " is beyond the interval scheme (" +
                                            std::to_string(usable) + " blocks)");
            }
            return kernels[static_cast<std::size_t>(j - 1)];
        });

    // blocked tables, precomputed per block
    std::vector<std::vector<UnimodularMatrix>> tables;
    for (std::size_t j = 0; j < ab.size(); ++j) {
        std::vector<UnimodularMatrix> tab;
        tab.reserve(out.block_paths[j].size());
        for (const auto& path : out.block_paths[j]) {
            tab.push_back(detail::blocked_matrix(base, ab[j].first, path));
        }
        tables.push_back(std::move(tab));
    }
    const int m = base.matrix_dim();
    auto tables_ptr = std::make_shared<std::vector<std::vector<UnimodularMatrix>>>(std::move(tables));
    out.system = MatrixSystem::generated(
        std::move(blocked_chain),
        [tables_ptr, usable](int j, int state) {
            if (j < 1 || j > usable) {
                throw std::invalid_argument("blocked tables: step beyond the interval scheme");
            }
            return (*tables_ptr)[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(state)];
        },
        m);
    return out;
}

/// Uniform k-step grouping: eta_j = (xi_{(j-1)k+1}, ..., xi_{jk}). For a
/// cyclic base this produces a cyclic blocked system, so unbounded horizons
/// work; this is the grouping behind the k-step corollary.
inline BlockedSystem block_system_uniform(const MatrixSystem& base, int k) {
    if (k < 1) throw std::invalid_argument("block_system_uniform: k must be >= 1");
    const NonstationaryChain& chain = base.chain();
    if (!chain.is_cyclic()) {
        throw std::invalid_argument("block_system_uniform: base chain must be cyclic");
    }
    // blocked schedule period: block j is determined by base steps mod L
    const int L = chain.cycle_length();
    const int period = L / std::gcd(L, k);

    BlockedSystem out;
    std::vector<std::vector<std::vector<int>>> paths;
    for (int j = 1; j <= period + 1; ++j) {
        const int a = (j - 1) * k + 1;
        out.intervals.emplace_back(a, a + k - 1);
        paths.push_back(detail::enumerate_block_paths(chain, a, a + k - 1));
    }

    const auto& first_paths = paths.front();
    Eigen::VectorXd law(static_cast<long>(first_paths.size()));
    for (std::size_t i = 0; i < first_paths.size(); ++i) {
        law[static_cast<long>(i)] =
            chain.initial_law()[first_paths[i].front()] * detail::path_weight(chain, 1, first_paths[i]);
    }

    std::vector<Eigen::MatrixXd> kernels;
    std::vector<std::vector<UnimodularMatrix>> tables;
    for (int j = 1; j <= period; ++j) {
        const auto& from = paths[static_cast<std::size_t>(j - 1)];
        const auto& to = paths[static_cast<std::size_t>(j)];
        const int b_j = j * k;
        Eigen::MatrixXd kk(static_cast<long>(from.size()), static_cast<long>(to.size()));
        for (std::size_t i = 0; i < from.size(); ++i) {
            for (std::size_t jj = 0; jj < to.size(); ++jj) {
                kk(static_cast<long>(i), static_cast<long>(jj)) =
                    chain.kernel(b_j)(from[i].back(), to[jj].front()) *
                    detail::path_weight(chain, b_j + 1, to[jj]);
            }
        }
        kernels.push_back(std::move(kk));

        std::vector<UnimodularMatrix> tab;
        tab.reserve(from.size());
        for (const auto& path : from) {
            tab.push_back(detail::blocked_matrix(base, (j - 1) * k + 1, path));
        }
        tables.push_back(std::move(tab));
    }
    out.block_paths = std::move(paths);
    out.block_paths.pop_back();
    out.intervals.pop_back();
    out.system = MatrixSystem::cyclic(NonstationaryChain::cyclic(law, std::move(kernels)),
                                      std::move(tables));
    return out;
}

// ---- Invariant-measure heuristic ---------------------------------------------

enum class GroupVerdict { CompactType, CommonFixedDirections, NoneFound };

inline const char* to_string(GroupVerdict v) {
    switch (v) {
        case GroupVerdict::CompactType: return "compact-type";
        case GroupVerdict::CommonFixedDirections: return "common-fixed-directions";
        case GroupVerdict::NoneFound: return "none-found";
    }
    return "?";
}

struct HeuristicReport {
    GroupVerdict verdict = GroupVerdict::NoneFound;
    std::string detail;                            // always labeled heuristic
    std::vector<Eigen::Vector2d> fixed_directions; // witnesses, when applicable
};

namespace detail {

inline Eigen::Vector2d canonical_direction(Eigen::Vector2d d) {
    d.normalize();
    if (d[0] < 0.0 || (d[0] == 0.0 && d[1] < 0.0)) d = -d;
    return d;
}

inline bool same_direction(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double tol) {
    return std::abs(std::abs(a.dot(b)) - 1.0) <= tol;
}

inline Eigen::Vector2d act(const Eigen::Matrix2d& h, const Eigen::Vector2d& d) {
    Eigen::Vector2d v = h * d;
    return v / v.norm();
}

} // namespace detail

/// Evidence gathering for the group condition: forms the pairwise products
/// h = g_i g_j^{-1} and looks for the obstruction patterns that make a
/// measure on S survive. Never a proof in either direction; every report is
/// labeled heuristic.
inline HeuristicReport invariant_measure_heuristic(const MatrixMeasure& nu, double tol = 1e-8) {
    if (nu.dim() != 2) {
        throw std::invalid_argument("invariant_measure_heuristic: only m = 2 is supported");
    }
    const auto& atoms = nu.atoms();
    std::vector<Eigen::Matrix2d> hs;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        for (std::size_t j = i + 1; j < atoms.size(); ++j) {
            Eigen::Matrix2d h =
                atoms[i].first.entries() * atoms[j].first.entries().inverse();
            if ((h - Eigen::Matrix2d::Identity()).lpNorm<Eigen::Infinity>() > tol) {
                hs.push_back(h);
            }
        }
    }

    HeuristicReport rep;
    if (hs.empty()) {
        rep.verdict = GroupVerdict::CompactType;
        rep.detail = "heuristic: all generators coincide, the group is trivial";
        return rep;
    }

    bool all_orthogonal = true;
    for (const auto& h : hs) {
        if ((h.transpose() * h - Eigen::Matrix2d::Identity()).lpNorm<Eigen::Infinity>() > tol) {
            all_orthogonal = false;
            break;
        }
    }
    if (all_orthogonal) {
        rep.verdict = GroupVerdict::CompactType;
        rep.detail = "heuristic: every pairwise quotient is orthogonal; rotation-invariant "
                     "measures survive";
        return rep;
    }

    // candidate directions: real eigenvectors of the quotients
    std::vector<Eigen::Vector2d> candidates;
    for (const auto& h : hs) {
        Eigen::EigenSolver<Eigen::Matrix2d> es(h);
        for (int i = 0; i < 2; ++i) {
            if (std::abs(es.eigenvalues()[i].imag()) <= tol * std::max(1.0, std::abs(es.eigenvalues()[i].real()))) {
                Eigen::Vector2d d(es.eigenvectors().col(i)[0].real(), es.eigenvectors().col(i)[1].real());
                if (d.norm() > tol) {
                    d = detail::canonical_direction(d);
                    bool dup = false;
                    for (const auto& c : candidates) {
                        if (detail::same_direction(c, d, 1e-9)) {
                            dup = true;
                            break;
                        }
                    }
                    if (!dup) candidates.push_back(d);
                }
            }
        }
    }

    auto fixes = [&](const Eigen::Vector2d& d) {
        for (const auto& h : hs) {
            if (!detail::same_direction(detail::act(h, d), d, tol)) return false;
        }
        return true;
    };
    for (const auto& d : candidates) {
        if (fixes(d)) {
            rep.verdict = GroupVerdict::CommonFixedDirections;
            rep.detail = "heuristic: all pairwise quotients fix a common direction";
            rep.fixed_directions = {d};
            return rep;
        }
    }

    // invariant direction pairs: a two-element projective orbit
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        for (std::size_t j = i + 1; j < candidates.size(); ++j) {
            const Eigen::Vector2d& d1 = candidates[i];
            const Eigen::Vector2d& d2 = candidates[j];
            bool invariant = true;
            for (const auto& h : hs) {
                for (const Eigen::Vector2d& d : {d1, d2}) {
                    Eigen::Vector2d hd = detail::act(h, d);
                    if (!detail::same_direction(hd, d1, tol) && !detail::same_direction(hd, d2, tol)) {
                        invariant = false;
                        break;
                    }
                }
                if (!invariant) break;
            }
            if (invariant) {
                rep.verdict = GroupVerdict::CommonFixedDirections;
                rep.detail = "heuristic: the quotients permute a two-direction orbit";
                rep.fixed_directions = {d1, d2};
                return rep;
            }
        }
    }

    rep.verdict = GroupVerdict::NoneFound;
    rep.detail = "heuristic: no orthogonality, common fixed direction, or two-direction orbit found";
    return rep;
}

} // namespace markprod
