#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "markprod/linalg.hpp"
#include "markprod/norms.hpp"
#include "markprod/system.hpp"

namespace markprod {

/// Discretized L2 of the circle: real Fourier modes |k| <= M, so dimension
/// 2M + 1, orthonormal for the normalized measure du = dtheta / 2pi; uniform
/// quadrature at Q >= 8M nodes, which integrates products of basis functions
/// exactly up to mode 2M (aliasing needs a mode divisible by Q).
class CircleGrid {
public:
    explicit CircleGrid(int mode_cutoff, int quad_nodes = 0)
        : mode_cutoff_(mode_cutoff),
          quad_nodes_(quad_nodes == 0 ? 8 * mode_cutoff : quad_nodes) {
        if (mode_cutoff_ < 1) throw std::invalid_argument("CircleGrid: mode cutoff must be >= 1");
        if (quad_nodes_ < 8 * mode_cutoff_) {
            throw std::invalid_argument("CircleGrid: need at least 8M quadrature nodes, got " +
                                        std::to_string(quad_nodes_));
        }
        angles_.resize(quad_nodes_);
        for (int q = 0; q < quad_nodes_; ++q) {
            angles_[q] = 2.0 * std::numbers::pi * q / quad_nodes_;
        }
        basis_ = basis_at(angles_);
    }

    int mode_cutoff() const { return mode_cutoff_; }
    int quad_nodes() const { return quad_nodes_; }
    int dim() const { return 2 * mode_cutoff_ + 1; }
    const Eigen::VectorXd& angles() const { return angles_; }
    const Eigen::MatrixXd& basis() const { return basis_; }

    /// Rows: evaluation points, columns: e_0 = 1, e_{2k-1} = sqrt2 cos(k .),
    /// e_{2k} = sqrt2 sin(k .).
    Eigen::MatrixXd basis_at(const Eigen::VectorXd& thetas) const {
        const long q = thetas.size();
        Eigen::MatrixXd b(q, dim());
        const double s2 = std::numbers::sqrt2;
        for (long i = 0; i < q; ++i) {
            b(i, 0) = 1.0;
            // angle-addition recurrence over k
            const double c1 = std::cos(thetas[i]), s1 = std::sin(thetas[i]);
            double ck = c1, sk = s1;
            for (int k = 1; k <= mode_cutoff_; ++k) {
                b(i, 2 * k - 1) = s2 * ck;
                b(i, 2 * k) = s2 * sk;
                const double cn = ck * c1 - sk * s1;
                sk = sk * c1 + ck * s1;
                ck = cn;
            }
        }
        return b;
    }

    /// Quadrature Gram matrix B^T B / Q; identity up to roundoff.
    Eigen::MatrixXd gram() const {
        return basis_.transpose() * basis_ / static_cast<double>(quad_nodes_);
    }

    Eigen::VectorXd eval(const Eigen::VectorXd& coeffs, const Eigen::VectorXd& thetas) const {
        if (coeffs.size() != dim()) throw std::invalid_argument("CircleGrid::eval: coefficient size");
        return basis_at(thetas) * coeffs;
    }

private:
    int mode_cutoff_;
    int quad_nodes_;
    Eigen::VectorXd angles_;
    Eigen::MatrixXd basis_;
};

/// A function on the circle stored by Fourier coefficients; the norm is the
/// coefficient norm (Parseval on the finite basis).
struct SphereFunction {
    Eigen::VectorXd coeffs;
    double norm() const { return coeffs.norm(); }
};

/// Galerkin matrix of (V_g f)(u) = f(g.u) ||gu||^{-m/2} for m = 2.
/// Entries by quadrature: V[i][j] = (1/Q) sum_q e_i(th_q) ||g u_q||^{-1} e_j(phi_q)
/// with phi = angle of g.u.
inline Eigen::MatrixXd assemble_V(const UnimodularMatrix& g, const CircleGrid& grid) {
    if (g.dim() != 2) {
        throw std::invalid_argument("assemble_V: only m = 2 is supported (got m = " +
                                    std::to_string(g.dim()) + ")");
    }
    const int q = grid.quad_nodes();
    const Eigen::MatrixXd& a = g.entries();
    Eigen::VectorXd phis(q), w(q);
    for (int i = 0; i < q; ++i) {
        const double c = std::cos(grid.angles()[i]);
        const double s = std::sin(grid.angles()[i]);
        const double x = a(0, 0) * c + a(0, 1) * s;
        const double y = a(1, 0) * c + a(1, 1) * s;
        const double n = std::hypot(x, y);
        phis[i] = std::atan2(y, x);
        w[i] = 1.0 / n;
    }
    Eigen::MatrixXd bphi = grid.basis_at(phis);
    return grid.basis().transpose() * (w.asDiagonal() * bphi) / static_cast<double>(q);
}

/// W_nu = integral of V_g over nu: weighted sum of the atom operators.
inline Eigen::MatrixXd assemble_W(const MatrixMeasure& nu, const CircleGrid& grid) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(grid.dim(), grid.dim());
    for (const auto& [g, weight] : nu.atoms()) {
        w += weight * assemble_V(g, grid);
    }
    return w;
}

/// Deviation || V_{g1 g2} - V_{g2} V_{g1} || restricted to modes |k| <= M/2;
/// the outer modes suffer truncation leakage and are excluded.
inline double cocycle_check(const UnimodularMatrix& g1, const UnimodularMatrix& g2,
                            const CircleGrid& grid) {
    Eigen::MatrixXd direct = assemble_V(g1 * g2, grid);
    Eigen::MatrixXd composed = assemble_V(g2, grid) * assemble_V(g1, grid);
    const int half = grid.mode_cutoff() / 2;
    const int d = 2 * half + 1;
    return operator_norm((direct - composed).topLeftCorner(d, d));
}

/// Two-resolution certificate for a norm bound "|| . || <= beta". The
/// finite-dimensional norm is not a rigorous bound on the operator norm;
/// the certificate therefore requires the computed value at both M and 2M to
/// clear beta by `margin`, and reports are labeled heuristic.
struct NormCertificate {
    std::string subject;
    int mode_cutoff = 0;   // M (the lower of the two resolutions)
    int quad_nodes = 0;    // Q at M
    double norm_at_m = 0.0;
    double norm_at_2m = 0.0;
    double margin = 0.0;
    double beta = 0.0;
    bool certified = false;
    std::string note;

    std::string verdict() const {
        return certified ? "CERTIFIED(heuristic)" : "NOT-CERTIFIED";
    }
};

inline NormCertificate make_certificate(std::string subject, int m_level, int q_level,
                                        double norm_m, double norm_2m, double beta,
                                        double margin = 1e-2) {
    NormCertificate c;
    c.subject = std::move(subject);
    c.mode_cutoff = m_level;
    c.quad_nodes = q_level;
    c.norm_at_m = norm_m;
    c.norm_at_2m = norm_2m;
    c.beta = beta;
    c.margin = margin;
    c.certified = (norm_m <= beta - margin) && (norm_2m <= beta - margin);
    return c;
}

/// || W_nu || at M and 2M with the margin protocol.
inline NormCertificate certify_measure_norm(const MatrixMeasure& nu, int mode_cutoff,
                                            double beta, double margin = 1e-2) {
    CircleGrid grid(mode_cutoff);
    CircleGrid fine(2 * mode_cutoff);
    const double nm = operator_norm(assemble_W(nu, grid));
    const double n2m = operator_norm(assemble_W(nu, fine));
    std::string label = nu.label().empty() ? "measure" : nu.label();
    return make_certificate(label, mode_cutoff, grid.quad_nodes(), nm, n2m, beta, margin);
}

inline std::string format_certificate(const NormCertificate& c) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "certificate subject=%s M=%d Q=%d norm_M=%.12g norm_2M=%.12g margin=%.3g "
                  "beta=%.6g verdict=%s%s%s",
                  c.subject.c_str(), c.mode_cutoff, c.quad_nodes, c.norm_at_m, c.norm_at_2m,
                  c.margin, c.beta, c.verdict().c_str(), c.note.empty() ? "" : " note=",
                  c.note.c_str());
    return std::string(buf);
}

} // namespace markprod
