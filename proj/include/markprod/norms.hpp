#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <stdexcept>

#include "markprod/rng.hpp"

namespace markprod {

/// Largest singular value of a dense matrix.
///
/// Full SVD when the smaller dimension is at most `svd_cutoff`; power
/// iteration on A^T A with relative tolerance `tol` above that. A
/// non-converging iteration falls back to the full SVD rather than
/// returning a possibly wrong estimate.
inline double operator_norm(const Eigen::MatrixXd& a, double tol = 1e-10,
                            int svd_cutoff = 512, int max_iters = 10000) {
    if (a.rows() == 0 || a.cols() == 0) return 0.0;
    const long small = std::min(a.rows(), a.cols());
    if (small <= svd_cutoff) {
        return Eigen::BDCSVD<Eigen::MatrixXd>(a).singularValues()(0);
    }

    CounterRng rng(0x6f70a07u, 0); // fixed key: deterministic start vector
    Eigen::VectorXd v(a.cols());
    for (long i = 0; i < a.cols(); ++i) {
        v[i] = rng.uniform(static_cast<std::uint64_t>(i)) - 0.5;
    }
    v.normalize();

    double sigma = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd av = a * v;
        Eigen::VectorXd w = a.transpose() * av;
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        const double next = av.norm();
        w /= nw;
        if (it > 2 && std::abs(next - sigma) <= tol * std::max(next, 1e-300)) {
            return next;
        }
        sigma = next;
        v = w;
    }
    return Eigen::BDCSVD<Eigen::MatrixXd>(a).singularValues()(0);
}

} // namespace markprod
