#pragma once

#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "markprod/linalg.hpp"
#include "markprod/markov.hpp"

namespace markprod {

/// A chain together with the per-step matrix tables g_n : X -> SL(m, R).
/// Tables follow the same schedule discipline as kernels: a finite list
/// cycled forever, or a pure generator of (step, state).
class MatrixSystem {
public:
    static MatrixSystem cyclic(NonstationaryChain chain,
                               std::vector<std::vector<UnimodularMatrix>> tables) {
        if (tables.empty()) throw std::invalid_argument("MatrixSystem: no tables supplied");
        MatrixSystem s(std::move(chain));
        s.m_ = tables.front().front().dim();
        for (std::size_t j = 0; j < tables.size(); ++j) {
            const int expect = s.chain_.state_count(static_cast<int>(j) + 1);
            if (static_cast<int>(tables[j].size()) != expect) {
                throw std::invalid_argument("MatrixSystem: table " + std::to_string(j + 1) + " has " +
                                            std::to_string(tables[j].size()) + " entries, chain has " +
                                            std::to_string(expect) + " states");
            }
            for (const auto& g : tables[j]) {
                if (g.dim() != s.m_) {
                    throw std::invalid_argument("MatrixSystem: mixed matrix dimensions");
                }
            }
        }
        if (s.chain_.is_cyclic()) {
            // table sizes must match state counts along the whole joint cycle
            const int tc = static_cast<int>(tables.size());
            const int span = std::lcm(tc, s.chain_.cycle_length());
            for (int n = 1; n <= span; ++n) {
                if (static_cast<int>(tables[static_cast<std::size_t>((n - 1) % tc)].size()) !=
                    s.chain_.state_count(n)) {
                    throw std::invalid_argument(
                        "MatrixSystem: table cycle incompatible with kernel cycle at step " +
                        std::to_string(n));
                }
            }
        }
        s.tables_ = std::move(tables);
        return s;
    }

    static MatrixSystem generated(NonstationaryChain chain,
                                  std::function<UnimodularMatrix(int, int)> table_fn, int m) {
        if (!table_fn) throw std::invalid_argument("MatrixSystem: null table generator");
        MatrixSystem s(std::move(chain));
        s.table_fn_ = std::move(table_fn);
        s.m_ = m;
        return s;
    }

    const NonstationaryChain& chain() const { return chain_; }
    int matrix_dim() const { return m_; }

    /// g_n(x), 1-based step, 0-based state.
    UnimodularMatrix matrix_at(int n, int state) const {
        if (n < 1) throw std::invalid_argument("matrix_at: step must be >= 1");
        if (state < 0 || state >= chain_.state_count(n)) {
            throw std::invalid_argument("matrix_at: state " + std::to_string(state) +
                                        " out of range at step " + std::to_string(n));
        }
        if (!tables_.empty()) {
            const auto& tab = tables_[static_cast<std::size_t>((n - 1) % static_cast<int>(tables_.size()))];
            return tab[static_cast<std::size_t>(state)];
        }
        UnimodularMatrix g = table_fn_(n, state);
        if (g.dim() != m_) throw std::invalid_argument("matrix_at: generator returned wrong dimension");
        return g;
    }

    std::vector<UnimodularMatrix> table(int n) const {
        const int r = chain_.state_count(n);
        std::vector<UnimodularMatrix> out;
        out.reserve(static_cast<std::size_t>(r));
        for (int x = 0; x < r; ++x) out.push_back(matrix_at(n, x));
        return out;
    }

private:
    explicit MatrixSystem(NonstationaryChain chain) : chain_(std::move(chain)) {}

    NonstationaryChain chain_;
    std::vector<std::vector<UnimodularMatrix>> tables_;
    std::function<UnimodularMatrix(int, int)> table_fn_;
    int m_ = 2;
};

/// A finitely supported probability measure on SL(m, R).
class MatrixMeasure {
public:
    using Atom = std::pair<UnimodularMatrix, double>;

    explicit MatrixMeasure(std::vector<Atom> atoms, std::string label = "",
                           double tol = tolerances().weight_sum)
        : atoms_(std::move(atoms)), label_(std::move(label)) {
        if (atoms_.empty()) throw std::invalid_argument("MatrixMeasure: empty atom list");
        double total = 0.0;
        for (const auto& [g, w] : atoms_) {
            if (w <= 0.0) throw std::invalid_argument("MatrixMeasure: nonpositive weight");
            total += w;
        }
        if (std::abs(total - 1.0) > tol) {
            throw std::invalid_argument("MatrixMeasure: weights sum to " + std::to_string(total));
        }
    }

    const std::vector<Atom>& atoms() const { return atoms_; }
    const std::string& label() const { return label_; }
    int dim() const { return atoms_.front().first.dim(); }

private:
    std::vector<Atom> atoms_;
    std::string label_;
};

/// nu_n, the law of g_n(xi_n): atoms (g_n(x), mu_n(x)) over supported states.
inline MatrixMeasure step_measure(const MatrixSystem& system, int n) {
    MarginalSequence mus = marginal_evolve(system.chain(), n);
    const Eigen::VectorXd& mu = mus.law(n);
    std::vector<MatrixMeasure::Atom> atoms;
    for (long x = 0; x < mu.size(); ++x) {
        if (mu[x] > 0.0) atoms.emplace_back(system.matrix_at(n, static_cast<int>(x)), mu[x]);
    }
    return MatrixMeasure(std::move(atoms), "step-" + std::to_string(n));
}

/// nu_{n,l}, the law of the product g_{n+l-1}(xi_{n+l-1}) ... g_n(xi_n):
/// one atom per path of positive probability.
inline MatrixMeasure window_measure(const MatrixSystem& system, int n, int l) {
    if (l < 1) throw std::invalid_argument("window_measure: window length must be >= 1");
    MarginalSequence mus = marginal_evolve(system.chain(), n + l - 1);
    std::vector<std::pair<UnimodularMatrix, double>> atoms;
    // enumerate paths (x_n, ..., x_{n+l-1}) by depth-first walk
    struct Frame { int state; double prob; UnimodularMatrix prod; };
    std::function<void(int, int, double, const UnimodularMatrix&)> walk =
        [&](int step, int state, double prob, const UnimodularMatrix& prod) {
            UnimodularMatrix next = system.matrix_at(step, state) * prod;
            if (step == n + l - 1) {
                atoms.emplace_back(next, prob);
                return;
            }
            Eigen::MatrixXd k = system.chain().kernel(step);
            for (long y = 0; y < k.cols(); ++y) {
                if (k(state, y) > 0.0) {
                    walk(step + 1, static_cast<int>(y), prob * k(state, y), next);
                }
            }
        };
    const Eigen::VectorXd& mu = mus.law(n);
    for (long x = 0; x < mu.size(); ++x) {
        if (mu[x] > 0.0) {
            walk(n, static_cast<int>(x), mu[x], UnimodularMatrix::identity(system.matrix_dim()));
        }
    }
    return MatrixMeasure(std::move(atoms),
                         "window-" + std::to_string(n) + "-" + std::to_string(l));
}

} // namespace markprod
