#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "markprod/norms.hpp"
#include "markprod/rng.hpp"

namespace markprod {

namespace detail {

inline void check_stochastic(const Eigen::MatrixXd& k, int step, double tol = 1e-12) {
    if (k.rows() < 1 || k.cols() < 1) {
        throw std::invalid_argument("kernel " + std::to_string(step) + ": empty matrix");
    }
    for (long i = 0; i < k.rows(); ++i) {
        double row = 0.0;
        for (long j = 0; j < k.cols(); ++j) {
            if (k(i, j) < 0.0) {
                throw std::invalid_argument("kernel " + std::to_string(step) + ": negative entry at (" +
                                            std::to_string(i) + "," + std::to_string(j) + ")");
            }
            row += k(i, j);
        }
        if (std::abs(row - 1.0) > tol) {
            throw std::invalid_argument("kernel " + std::to_string(step) + ": row " + std::to_string(i) +
                                        " sums to " + std::to_string(row));
        }
    }
}

inline void check_probability_vector(const Eigen::VectorXd& p, const std::string& what,
                                     double tol = 1e-12) {
    double total = 0.0;
    for (long i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0) throw std::invalid_argument(what + ": negative entry");
        total += p[i];
    }
    if (std::abs(total - 1.0) > tol) {
        throw std::invalid_argument(what + ": mass " + std::to_string(total) + " != 1");
    }
}

} // namespace detail

/// Finite non-stationary Markov chain. The per-step kernels k_n may change
/// shape over time (r_n x r_{n+1} row-stochastic), which is what blocked
/// chains with time-dependent phase spaces need. Kernels come either from a
/// finite list cycled forever or from a pure generator of the step index;
/// both are deterministic so every derived quantity is reproducible.
class NonstationaryChain {
public:
    static NonstationaryChain cyclic(Eigen::VectorXd initial_law,
                                     std::vector<Eigen::MatrixXd> kernels) {
        detail::check_probability_vector(initial_law, "initial law");
        if (kernels.empty()) throw std::invalid_argument("chain: no kernels supplied");
        long r = initial_law.size();
        for (std::size_t i = 0; i < kernels.size(); ++i) {
            detail::check_stochastic(kernels[i], static_cast<int>(i + 1));
            if (kernels[i].rows() != r) {
                throw std::invalid_argument("kernel " + std::to_string(i + 1) + ": expected " +
                                            std::to_string(r) + " rows, got " +
                                            std::to_string(kernels[i].rows()));
            }
            r = kernels[i].cols();
        }
        if (r != initial_law.size()) {
            throw std::invalid_argument("cyclic kernels do not close: final column count " +
                                        std::to_string(r) + " != initial state count " +
                                        std::to_string(initial_law.size()));
        }
        NonstationaryChain c;
        c.initial_law_ = std::move(initial_law);
        c.kernels_ = std::move(kernels);
        return c;
    }

    static NonstationaryChain generated(Eigen::VectorXd initial_law,
                                        std::function<Eigen::MatrixXd(int)> kernel_fn) {
        detail::check_probability_vector(initial_law, "initial law");
        if (!kernel_fn) throw std::invalid_argument("chain: null kernel generator");
        NonstationaryChain c;
        c.initial_law_ = std::move(initial_law);
        c.kernel_fn_ = std::move(kernel_fn);
        return c;
    }

    /// k_n, 1-based step index.
    Eigen::MatrixXd kernel(int n) const {
        if (n < 1) throw std::invalid_argument("kernel: step index must be >= 1");
        if (!kernels_.empty()) {
            return kernels_[static_cast<std::size_t>((n - 1) % static_cast<int>(kernels_.size()))];
        }
        Eigen::MatrixXd k = kernel_fn_(n);
        detail::check_stochastic(k, n);
        return k;
    }

    /// Number of states in the phase space at time n.
    int state_count(int n) const {
        if (n < 1) throw std::invalid_argument("state_count: step index must be >= 1");
        if (n == 1) return static_cast<int>(initial_law_.size());
        return static_cast<int>(kernel(n - 1).cols());
    }

    const Eigen::VectorXd& initial_law() const { return initial_law_; }
    bool is_cyclic() const { return !kernels_.empty(); }
    int cycle_length() const { return static_cast<int>(kernels_.size()); }

private:
    NonstationaryChain() = default;

    Eigen::VectorXd initial_law_;
    std::vector<Eigen::MatrixXd> kernels_;           // cyclic schedule if nonempty
    std::function<Eigen::MatrixXd(int)> kernel_fn_;  // otherwise
};

/// The laws mu_1, ..., mu_horizon of the chain.
class MarginalSequence {
public:
    explicit MarginalSequence(std::vector<Eigen::VectorXd> laws) : laws_(std::move(laws)) {
        if (laws_.empty()) throw std::invalid_argument("MarginalSequence: empty");
    }

    const Eigen::VectorXd& law(int n) const {
        if (n < 1 || n > horizon()) {
            throw std::invalid_argument("MarginalSequence::law: step " + std::to_string(n) +
                                        " outside [1, " + std::to_string(horizon()) + "]");
        }
        return laws_[static_cast<std::size_t>(n - 1)];
    }

    int horizon() const { return static_cast<int>(laws_.size()); }

private:
    std::vector<Eigen::VectorXd> laws_;
};

/// mu_{n+1} = mu_n k_n (row-vector convention), evolved up to `horizon`.
inline MarginalSequence marginal_evolve(const NonstationaryChain& chain, int horizon) {
    if (horizon < 1) throw std::invalid_argument("marginal_evolve: horizon must be >= 1");
    std::vector<Eigen::VectorXd> laws;
    laws.reserve(static_cast<std::size_t>(horizon));
    laws.push_back(chain.initial_law());
    for (int n = 1; n < horizon; ++n) {
        laws.push_back(chain.kernel(n).transpose() * laws.back());
    }
    return MarginalSequence(std::move(laws));
}

/// (K_n f)(x) = sum_y k_n(x, y) f(y), the plain conditional-expectation action
/// on function values over the full state space.
inline Eigen::VectorXd apply_kernel(const NonstationaryChain& chain, int n,
                                    const Eigen::VectorXd& f) {
    Eigen::MatrixXd k = chain.kernel(n);
    if (f.size() != k.cols()) {
        throw std::invalid_argument("apply_kernel: function has " + std::to_string(f.size()) +
                                    " values, kernel expects " + std::to_string(k.cols()));
    }
    return k * f;
}

/// The matrix of K_n : H_{n+1} -> H_n in orthonormalized coordinates
/// (functions f are stored as f(x) sqrt(mu(x))), restricted to the states
/// that carry mass at the respective times. In these coordinates
/// A = D_n^{1/2} k_n D_{n+1}^{-1/2} and the constant function corresponds to
/// the unit vector sqrt(mu).
struct TransitionOperator {
    int step = 0;
    std::vector<int> domain_states;    // supp mu_{n+1}
    std::vector<int> codomain_states;  // supp mu_n
    Eigen::VectorXd domain_weights;    // mu_{n+1} on supported states
    Eigen::VectorXd codomain_weights;  // mu_n on supported states
    Eigen::MatrixXd weighted;          // |cod| x |dom|
};

namespace detail {

inline std::vector<int> support(const Eigen::VectorXd& mu) {
    std::vector<int> idx;
    for (long i = 0; i < mu.size(); ++i) {
        if (mu[i] > 0.0) idx.push_back(static_cast<int>(i));
    }
    return idx;
}

/// Orthonormal basis of the orthogonal complement of a unit vector, as the
/// trailing columns of a Householder Q.
inline Eigen::MatrixXd complement_basis(const Eigen::VectorXd& unit) {
    const long r = unit.size();
    if (r <= 1) return Eigen::MatrixXd(r, 0);
    Eigen::MatrixXd m(r, 1);
    m.col(0) = unit;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ();
    return q.rightCols(r - 1);
}

} // namespace detail

inline TransitionOperator transition_operator(const NonstationaryChain& chain, int n) {
    if (n < 1) throw std::invalid_argument("transition_operator: step must be >= 1");
    MarginalSequence mus = marginal_evolve(chain, n + 1);
    const Eigen::VectorXd& mu_n = mus.law(n);
    const Eigen::VectorXd& mu_n1 = mus.law(n + 1);
    Eigen::MatrixXd k = chain.kernel(n);

    TransitionOperator op;
    op.step = n;
    op.codomain_states = detail::support(mu_n);
    op.domain_states = detail::support(mu_n1);
    const int rc = static_cast<int>(op.codomain_states.size());
    const int rd = static_cast<int>(op.domain_states.size());
    op.codomain_weights.resize(rc);
    op.domain_weights.resize(rd);
    for (int i = 0; i < rc; ++i) op.codomain_weights[i] = mu_n[op.codomain_states[i]];
    for (int j = 0; j < rd; ++j) op.domain_weights[j] = mu_n1[op.domain_states[j]];

    op.weighted.resize(rc, rd);
    for (int i = 0; i < rc; ++i) {
        const double si = std::sqrt(op.codomain_weights[i]);
        for (int j = 0; j < rd; ++j) {
            op.weighted(i, j) =
                si * k(op.codomain_states[i], op.domain_states[j]) / std::sqrt(op.domain_weights[j]);
        }
    }
    return op;
}

/// || K_n restricted to zero-mean functions ||, measured H^0_{n+1} -> H^0_n.
/// Always in [0, 1] up to roundoff; 0 iff all supported rows equal mu_{n+1}.
inline double zero_mean_norm(const NonstationaryChain& chain, int n, double tol = 1e-10) {
    TransitionOperator op = transition_operator(chain, n);
    const long rd = op.weighted.cols();
    if (rd <= 1) return 0.0;
    Eigen::VectorXd s = op.domain_weights.cwiseSqrt();
    Eigen::MatrixXd basis = detail::complement_basis(s);
    return operator_norm(op.weighted * basis, tol);
}

/// A trajectory xi_1 .. xi_horizon (0-based state indices), a deterministic
/// function of (seed, stream).
inline std::vector<int> sample_path(const NonstationaryChain& chain, int horizon,
                                    std::uint64_t seed, std::uint64_t stream = 0) {
    if (horizon < 1) throw std::invalid_argument("sample_path: horizon must be >= 1");
    CounterRng rng(seed, stream);

    auto draw = [](const Eigen::VectorXd& p, double u) {
        double acc = 0.0;
        int last_positive = 0;
        for (long i = 0; i < p.size(); ++i) {
            if (p[i] > 0.0) last_positive = static_cast<int>(i);
            acc += p[i];
            if (u < acc) return static_cast<int>(i);
        }
        return last_positive; // u landed in the rounding gap at the top
    };

    std::vector<int> path;
    path.reserve(static_cast<std::size_t>(horizon));
    path.push_back(draw(chain.initial_law(), rng.uniform(0)));
    for (int n = 1; n < horizon; ++n) {
        Eigen::MatrixXd k = chain.kernel(n);
        path.push_back(draw(k.row(path.back()).transpose(), rng.uniform(static_cast<std::uint64_t>(n))));
    }
    return path;
}

} // namespace markprod
