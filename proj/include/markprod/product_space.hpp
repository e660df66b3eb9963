#pragma once

#include <Eigen/Dense>

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "markprod/markov.hpp"
#include "markprod/norms.hpp"
#include "markprod/sphere.hpp"
#include "markprod/system.hpp"

namespace markprod {

/// Spaces larger than this are not assembled densely; use the matrix-free
/// appliers instead.
inline constexpr int kDenseSpaceCap = 4096;

/// The discretized lifted space H_n = L2(X x S, mu_n x du). The basis is the
/// tensor of per-supported-state indicators (weighted by mu_n(x)^{-1/2}) with
/// the Fourier basis, so the Gram matrix is the identity and every operator
/// below is an explicit matrix statement. Coefficient layout: state-major
/// blocks of size 2M + 1. The subspace L_n of functions of u alone is the
/// image of the isometry iota : v -> sqrt(mu) (x) v.
struct ProductSpace {
    int step = 0;
    std::vector<int> states;    // supported states of mu_n
    Eigen::VectorXd weights;    // mu_n restricted to `states`
    Eigen::VectorXd sqrt_weights;
    std::shared_ptr<const CircleGrid> grid;

    int block_dim() const { return grid->dim(); }
    int dim() const { return static_cast<int>(states.size()) * grid->dim(); }

    bool same_space(const ProductSpace& other) const {
        return step == other.step && states == other.states &&
               grid->mode_cutoff() == other.grid->mode_cutoff() &&
               grid->quad_nodes() == other.grid->quad_nodes() &&
               (weights - other.weights).lpNorm<Eigen::Infinity>() == 0.0;
    }

    /// Coefficients of the constant-one function: sqrt(mu) (x) e_0.
    Eigen::VectorXd constant_one() const {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(dim());
        const int d = block_dim();
        for (std::size_t i = 0; i < states.size(); ++i) {
            c[static_cast<long>(i) * d] = sqrt_weights[static_cast<long>(i)];
        }
        return c;
    }

    /// iota: embed a function of u alone.
    Eigen::VectorXd embed_sphere(const Eigen::VectorXd& f) const {
        if (f.size() != block_dim()) throw std::invalid_argument("embed_sphere: size mismatch");
        Eigen::VectorXd c(dim());
        const int d = block_dim();
        for (std::size_t i = 0; i < states.size(); ++i) {
            c.segment(static_cast<long>(i) * d, d) = sqrt_weights[static_cast<long>(i)] * f;
        }
        return c;
    }

    /// iota^T: the L_n component, as a function of u.
    Eigen::VectorXd restrict_sphere(const Eigen::VectorXd& c) const {
        if (c.size() != dim()) throw std::invalid_argument("restrict_sphere: size mismatch");
        const int d = block_dim();
        Eigen::VectorXd f = Eigen::VectorXd::Zero(d);
        for (std::size_t i = 0; i < states.size(); ++i) {
            f += sqrt_weights[static_cast<long>(i)] * c.segment(static_cast<long>(i) * d, d);
        }
        return f;
    }
};

inline ProductSpace make_product_space(const NonstationaryChain& chain, int n,
                                       std::shared_ptr<const CircleGrid> grid) {
    if (!grid) throw std::invalid_argument("make_product_space: null grid");
    MarginalSequence mus = marginal_evolve(chain, n);
    const Eigen::VectorXd& mu = mus.law(n);
    ProductSpace sp;
    sp.step = n;
    sp.grid = std::move(grid);
    sp.states = detail::support(mu);
    sp.weights.resize(static_cast<long>(sp.states.size()));
    for (std::size_t i = 0; i < sp.states.size(); ++i) {
        sp.weights[static_cast<long>(i)] = mu[sp.states[i]];
    }
    sp.sqrt_weights = sp.weights.cwiseSqrt();
    return sp;
}

/// Dense operator between two product spaces, tagged with the factorization
/// it was assembled from. Composition refuses mismatched endpoint spaces.
struct ProductOperator {
    ProductSpace domain;
    ProductSpace codomain;
    Eigen::MatrixXd matrix;
    std::string factorization;

    Eigen::VectorXd apply(const Eigen::VectorXd& c) const {
        if (c.size() != matrix.cols()) throw std::invalid_argument("ProductOperator::apply: size");
        return matrix * c;
    }

    /// (*this) o rhs: rhs acts first.
    ProductOperator operator*(const ProductOperator& rhs) const {
        if (!rhs.codomain.same_space(domain)) {
            throw std::invalid_argument("ProductOperator composition: endpoint spaces differ (step " +
                                        std::to_string(rhs.codomain.step) + " vs " +
                                        std::to_string(domain.step) + ")");
        }
        return ProductOperator{rhs.domain, codomain, matrix * rhs.matrix,
                               factorization + "*" + rhs.factorization};
    }

    double norm(double tol = 1e-10) const { return operator_norm(matrix, tol); }
};

namespace detail {

inline void check_dense_cap(const ProductSpace& sp) {
    if (sp.dim() > kDenseSpaceCap) {
        throw std::invalid_argument("product space dimension " + std::to_string(sp.dim()) +
                                    " exceeds the dense assembly cap " +
                                    std::to_string(kDenseSpaceCap) +
                                    "; use the matrix-free appliers");
    }
}

/// a (x) I_d with the state-major block layout.
inline Eigen::MatrixXd kron_identity(const Eigen::MatrixXd& a, int d) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.rows() * d, a.cols() * d);
    for (long i = 0; i < a.rows(); ++i) {
        for (long j = 0; j < a.cols(); ++j) {
            if (a(i, j) != 0.0) {
                out.block(i * d, j * d, d, d) = a(i, j) * Eigen::MatrixXd::Identity(d, d);
            }
        }
    }
    return out;
}

} // namespace detail

/// Khat_n : H_{n+1} -> H_n, acting as k_n (x) identity-on-S. In orthonormal
/// coordinates this is the weighted kernel matrix tensored with I.
inline ProductOperator assemble_Khat(const MatrixSystem& system, int n,
                                     std::shared_ptr<const CircleGrid> grid) {
    ProductSpace dom = make_product_space(system.chain(), n + 1, grid);
    ProductSpace cod = make_product_space(system.chain(), n, grid);
    detail::check_dense_cap(dom);
    detail::check_dense_cap(cod);
    TransitionOperator top = transition_operator(system.chain(), n);
    if (top.domain_states != dom.states || top.codomain_states != cod.states) {
        throw std::runtime_error("assemble_Khat: inconsistent supported states");
    }
    return ProductOperator{std::move(dom), std::move(cod),
                           detail::kron_identity(top.weighted, grid->dim()),
                           "Khat_" + std::to_string(n)};
}

/// Vhat_{g_n} : H_n -> H_n, block-diagonal over states with blocks V_{g_n(x)}.
inline ProductOperator assemble_Vhat(const MatrixSystem& system, int n,
                                     std::shared_ptr<const CircleGrid> grid) {
    ProductSpace sp = make_product_space(system.chain(), n, grid);
    detail::check_dense_cap(sp);
    const int d = sp.block_dim();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(sp.dim(), sp.dim());
    for (std::size_t i = 0; i < sp.states.size(); ++i) {
        m.block(static_cast<long>(i) * d, static_cast<long>(i) * d, d, d) =
            assemble_V(system.matrix_at(n, sp.states[i]), *grid);
    }
    ProductSpace cod = sp;
    return ProductOperator{std::move(sp), std::move(cod), std::move(m),
                           "Vhat_" + std::to_string(n)};
}

/// P_n: orthogonal projector onto the complement of L_n,
/// (P_n f)(x, u) = f(x, u) - integral of f(., u) d mu_n.
inline ProductOperator project_P(const ProductSpace& space) {
    detail::check_dense_cap(space);
    const int d = space.block_dim();
    Eigen::MatrixXd ss = space.sqrt_weights * space.sqrt_weights.transpose();
    Eigen::MatrixXd q = detail::kron_identity(ss, d);
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(space.dim(), space.dim()) - q;
    return ProductOperator{space, space, std::move(p), "P_" + std::to_string(space.step)};
}

/// Q_n: orthogonal projector onto L_n (functions of u alone).
inline ProductOperator project_Q(const ProductSpace& space) {
    detail::check_dense_cap(space);
    const int d = space.block_dim();
    Eigen::MatrixXd ss = space.sqrt_weights * space.sqrt_weights.transpose();
    return ProductOperator{space, space, detail::kron_identity(ss, d),
                           "Q_" + std::to_string(space.step)};
}

namespace detail {

/// Matrix-free application of the alternating pipeline; used by
/// moment_functional and by the power-iteration path of two_step_norm.
class StepApplier {
public:
    StepApplier(const MatrixSystem& system, std::shared_ptr<const CircleGrid> grid, int max_step)
        : system_(system), grid_(std::move(grid)),
          mus_(marginal_evolve(system.chain(), max_step + 1)) {}

    const Eigen::VectorXd& mu(int n) const { return mus_.law(n); }

    std::vector<int> support_at(int n) const { return support(mus_.law(n)); }

    /// Vhat_n applied to the coefficient vector over supp(mu_n).
    Eigen::VectorXd apply_vhat(int n, const Eigen::VectorXd& c, bool transpose = false) const {
        const std::vector<int> sup = support_at(n);
        const int d = grid_->dim();
        Eigen::VectorXd out(c.size());
        for (std::size_t i = 0; i < sup.size(); ++i) {
            Eigen::MatrixXd v = assemble_V(system_.matrix_at(n, sup[i]), *grid_);
            const long off = static_cast<long>(i) * d;
            out.segment(off, d) =
                transpose ? (v.transpose() * c.segment(off, d)).eval() : (v * c.segment(off, d)).eval();
        }
        return out;
    }

    /// Khat_n : H_{n+1} -> H_n on coefficients (or its transpose).
    Eigen::VectorXd apply_khat(int n, const Eigen::VectorXd& c, bool transpose = false) const {
        TransitionOperator top = transition_operator(system_.chain(), n);
        const int d = grid_->dim();
        const Eigen::MatrixXd a = transpose ? top.weighted.transpose() : top.weighted;
        Eigen::VectorXd out = Eigen::VectorXd::Zero(a.rows() * d);
        for (long i = 0; i < a.rows(); ++i) {
            for (long j = 0; j < a.cols(); ++j) {
                if (a(i, j) != 0.0) out.segment(i * d, d) += a(i, j) * c.segment(j * d, d);
            }
        }
        return out;
    }

    const CircleGrid& grid() const { return *grid_; }

private:
    const MatrixSystem& system_;
    std::shared_ptr<const CircleGrid> grid_;
    MarginalSequence mus_;
};

} // namespace detail

/// The exact moment formula: integral over S of E ||S_n u||^{-m/2} du equals
/// < Vhat_{g_1} Khat_1 ... Khat_{n-1} Vhat_{g_n} 1_n , 1_1 >, computed by
/// applying the alternating pipeline to the constant-one coefficients.
inline double moment_functional(const MatrixSystem& system, int n,
                                std::shared_ptr<const CircleGrid> grid) {
    if (n < 1) throw std::invalid_argument("moment_functional: n must be >= 1");
    detail::StepApplier ap(system, grid, n);

    const int d = grid->dim();
    const std::vector<int> sup_n = ap.support_at(n);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<long>(sup_n.size()) * d);
    for (std::size_t i = 0; i < sup_n.size(); ++i) {
        c[static_cast<long>(i) * d] = std::sqrt(ap.mu(n)[sup_n[i]]);
    }

    c = ap.apply_vhat(n, c);
    for (int j = n - 1; j >= 1; --j) {
        c = ap.apply_khat(j, c);
        c = ap.apply_vhat(j, c);
    }

    const std::vector<int> sup_1 = ap.support_at(1);
    double out = 0.0;
    for (std::size_t i = 0; i < sup_1.size(); ++i) {
        out += std::sqrt(ap.mu(1)[sup_1[i]]) * c[static_cast<long>(i) * d];
    }
    return out;
}

/// || Khat_{n-1} Vhat_{g_n} Khat_n ||, the two-step contraction quantity
/// (the trailing Vhat_{g_{n+1}} is dropped: it is unitary up to truncation).
inline double two_step_norm(const MatrixSystem& system, int n,
                            std::shared_ptr<const CircleGrid> grid, double tol = 1e-10) {
    if (n < 2) throw std::invalid_argument("two_step_norm: n must be >= 2");
    const int d = grid->dim();
    detail::StepApplier ap(system, grid, n + 1);
    const long dim_m1 = static_cast<long>(ap.support_at(n - 1).size()) * d;
    const long dim_p1 = static_cast<long>(ap.support_at(n + 1).size()) * d;
    const long dim_n = static_cast<long>(ap.support_at(n).size()) * d;

    if (std::max({dim_m1, dim_p1, dim_n}) <= kDenseSpaceCap) {
        ProductOperator k1 = assemble_Khat(system, n - 1, grid);
        ProductOperator v = assemble_Vhat(system, n, grid);
        ProductOperator k2 = assemble_Khat(system, n, grid);
        return (k1 * v * k2).norm(tol);
    }

    // matrix-free power iteration on (K1 V K2)^T (K1 V K2)
    auto forward = [&](const Eigen::VectorXd& x) {
        return ap.apply_khat(n - 1, ap.apply_vhat(n, ap.apply_khat(n, x)));
    };
    auto backward = [&](const Eigen::VectorXd& y) {
        return ap.apply_khat(n, ap.apply_vhat(n, ap.apply_khat(n - 1, y, true), true), true);
    };
    CounterRng rng(0x747332u, static_cast<std::uint64_t>(n));
    Eigen::VectorXd v(dim_p1);
    for (long i = 0; i < dim_p1; ++i) v[i] = rng.uniform(static_cast<std::uint64_t>(i)) - 0.5;
    v.normalize();
    double sigma = 0.0;
    for (int it = 0; it < 10000; ++it) {
        Eigen::VectorXd fv = forward(v);
        Eigen::VectorXd w = backward(fv);
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        const double next = fv.norm();
        w /= nw;
        if (it > 2 && std::abs(next - sigma) <= tol * std::max(next, 1e-300)) return next;
        sigma = next;
        v = w;
    }
    throw std::runtime_error("two_step_norm: power iteration did not converge at step " +
                             std::to_string(n));
}

/// Margin-protocol certificate for || Khat_{n-1} Vhat_n Khat_n || <= beta,
/// evaluated at M and 2M.
inline NormCertificate two_step_certificate(const MatrixSystem& system, int n, int mode_cutoff,
                                            double beta, double margin = 1e-2) {
    auto coarse = std::make_shared<const CircleGrid>(mode_cutoff);
    auto fine = std::make_shared<const CircleGrid>(2 * mode_cutoff);
    const double nm = two_step_norm(system, n, coarse);
    const double n2m = two_step_norm(system, n, fine);
    return make_certificate("two-step-" + std::to_string(n), mode_cutoff, coarse->quad_nodes(),
                            nm, n2m, beta, margin);
}

/// || restriction of Q_n Vhat_n to L_n  -  W_{nu_n} || where nu_n is the
/// pushforward of mu_n under g_n. Vanishes to quadrature accuracy: the two
/// sides are the same weighted sums of per-matrix Galerkin blocks.
inline double QV_isomorphism_check(const MatrixSystem& system, int n,
                                   std::shared_ptr<const CircleGrid> grid) {
    ProductSpace sp = make_product_space(system.chain(), n, grid);
    const int d = sp.block_dim();
    Eigen::MatrixXd restricted = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < sp.states.size(); ++i) {
        restricted += sp.weights[static_cast<long>(i)] *
                      assemble_V(system.matrix_at(n, sp.states[i]), *grid);
    }
    Eigen::MatrixXd w = assemble_W(step_measure(system, n), *grid);
    return operator_norm(restricted - w);
}

/// Product of the chainable two-step norms, the discrete analogue of the
/// alpha^{(n-1)/2} decay bound: factors || Khat_{2j-1} Vhat_{2j} Khat_{2j} ||
/// for 2j + 1 <= n (unpaired prefix/suffix factors have norm <= 1).
inline double decay_chain_bound(const MatrixSystem& system, int n,
                                std::shared_ptr<const CircleGrid> grid) {
    double bound = 1.0;
    for (int j = 1; 2 * j + 1 <= n; ++j) {
        bound *= two_step_norm(system, 2 * j, grid);
    }
    return bound;
}

} // namespace markprod
