#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace markprod {

/// Numeric tolerances used by the value types. Kept in one place so they
/// are configuration, not magic literals scattered through the code.
struct Tolerances {
    double det_drift = 1e-9;   // |det(g) - 1| allowed on unimodular matrices
    double unit_norm = 1e-12;  // | ||u|| - 1 | allowed on sphere points
    double weight_sum = 1e-12; // mass defect allowed on discrete measures
};

inline const Tolerances& tolerances() {
    static const Tolerances t{};
    return t;
}

/// Real m x m matrix with unit determinant, m >= 2. The cocycle alphabet.
class UnimodularMatrix {
public:
    explicit UnimodularMatrix(Eigen::MatrixXd entries,
                              double det_tol = tolerances().det_drift)
        : entries_(std::move(entries)) {
        if (entries_.rows() != entries_.cols() || entries_.rows() < 2) {
            throw std::invalid_argument("UnimodularMatrix: need square m x m with m >= 2, got " +
                                        std::to_string(entries_.rows()) + " x " +
                                        std::to_string(entries_.cols()));
        }
        const double d = entries_.determinant();
        if (std::abs(d - 1.0) > det_tol) {
            throw std::invalid_argument("UnimodularMatrix: |det - 1| = " +
                                        std::to_string(std::abs(d - 1.0)) +
                                        " exceeds tolerance");
        }
    }

    static UnimodularMatrix identity(int m) {
        return UnimodularMatrix(Eigen::MatrixXd::Identity(m, m));
    }

    static UnimodularMatrix rotation(double angle) {
        Eigen::Matrix2d r;
        r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
        return UnimodularMatrix(r);
    }

    int dim() const { return static_cast<int>(entries_.rows()); }
    const Eigen::MatrixXd& entries() const { return entries_; }

    UnimodularMatrix operator*(const UnimodularMatrix& rhs) const {
        if (dim() != rhs.dim()) {
            throw std::invalid_argument("UnimodularMatrix product: dimension mismatch");
        }
        return UnimodularMatrix(entries_ * rhs.entries_);
    }

    UnimodularMatrix inverse() const {
        return UnimodularMatrix(entries_.inverse());
    }

    /// g / det(g)^{1/m}: pins the determinant back to exactly 1 without
    /// changing the projective action.
    UnimodularMatrix renormalized() const {
        const double d = entries_.determinant();
        if (d <= 0.0) {
            throw std::runtime_error("UnimodularMatrix::renormalized: determinant drifted to " +
                                     std::to_string(d));
        }
        return UnimodularMatrix(entries_ / std::pow(d, 1.0 / dim()));
    }

    /// Largest singular value. Closed form for m = 2, iterative otherwise.
    double spectral_norm() const { return spectral_norm_of(entries_); }

    static double spectral_norm_of(const Eigen::MatrixXd& a) {
        if (a.rows() == 2 && a.cols() == 2) {
            const double t = a.squaredNorm();
            const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
            const double disc = std::max(t * t - 4.0 * det * det, 0.0);
            return std::sqrt(0.5 * (t + std::sqrt(disc)));
        }
        // power iteration on a^T a, deterministic start
        Eigen::VectorXd v = Eigen::VectorXd::Ones(a.cols());
        for (int i = 0; i < a.cols(); ++i) v[i] += 1e-3 * static_cast<double>(i);
        v.normalize();
        double sigma = 0.0;
        for (int it = 0; it < 500; ++it) {
            Eigen::VectorXd w = a.transpose() * (a * v);
            const double nw = w.norm();
            if (nw == 0.0) return 0.0;
            w /= nw;
            const double next = std::sqrt(nw);
            if (it > 2 && std::abs(next - sigma) <= 1e-13 * std::max(next, 1.0)) {
                return next;
            }
            sigma = next;
            v = w;
        }
        // never silently wrong: fall back to full SVD
        return a.jacobiSvd().singularValues()(0);
    }

private:
    Eigen::MatrixXd entries_;
};

/// Unit vector in R^m.
class SpherePoint {
public:
    explicit SpherePoint(Eigen::VectorXd coords,
                         double tol = tolerances().unit_norm)
        : coords_(std::move(coords)) {
        if (std::abs(coords_.norm() - 1.0) > tol) {
            throw std::invalid_argument("SpherePoint: | ||u|| - 1 | = " +
                                        std::to_string(std::abs(coords_.norm() - 1.0)) +
                                        " exceeds tolerance");
        }
    }

    /// Normalizes a nonzero vector onto the sphere.
    static SpherePoint direction(const Eigen::VectorXd& v) {
        const double n = v.norm();
        if (n == 0.0) throw std::invalid_argument("SpherePoint::direction: zero vector");
        return SpherePoint(v / n);
    }

    static SpherePoint from_angle(double theta) {
        Eigen::Vector2d u(std::cos(theta), std::sin(theta));
        return SpherePoint(u);
    }

    int dim() const { return static_cast<int>(coords_.size()); }
    const Eigen::VectorXd& coords() const { return coords_; }
    double angle() const {
        if (dim() != 2) throw std::invalid_argument("SpherePoint::angle: only defined for m = 2");
        return std::atan2(coords_[1], coords_[0]);
    }

private:
    Eigen::VectorXd coords_;
};

/// g.u = gu / ||gu||.
inline SpherePoint project_action(const UnimodularMatrix& g, const SpherePoint& u) {
    if (g.dim() != u.dim()) {
        throw std::invalid_argument("project_action: dimension mismatch (" +
                                    std::to_string(g.dim()) + " vs " + std::to_string(u.dim()) + ")");
    }
    return SpherePoint::direction(g.entries() * u.coords());
}

/// ||gu||, the multiplicative norm cocycle: ||g1 g2 u|| = ||g1 (g2.u)|| ||g2 u||.
inline double norm_cocycle(const UnimodularMatrix& g, const SpherePoint& u) {
    if (g.dim() != u.dim()) {
        throw std::invalid_argument("norm_cocycle: dimension mismatch");
    }
    return (g.entries() * u.coords()).norm();
}

/// Finitely supported probability measure on the sphere.
class DiscreteSphereMeasure {
public:
    using Atom = std::pair<SpherePoint, double>;

    explicit DiscreteSphereMeasure(std::vector<Atom> atoms,
                                   double tol = tolerances().weight_sum)
        : atoms_(std::move(atoms)) {
        double total = 0.0;
        for (const auto& [pt, w] : atoms_) {
            if (w < 0.0) throw std::invalid_argument("DiscreteSphereMeasure: negative weight");
            total += w;
        }
        if (std::abs(total - 1.0) > tol) {
            throw std::invalid_argument("DiscreteSphereMeasure: weights sum to " +
                                        std::to_string(total));
        }
    }

    const std::vector<Atom>& atoms() const { return atoms_; }

private:
    std::vector<Atom> atoms_;
};

/// (g kappa)(B) = kappa(g.^{-1} B): each atom at u moves to g.u, weight unchanged.
inline DiscreteSphereMeasure pushforward_measure(const UnimodularMatrix& g,
                                                 const DiscreteSphereMeasure& kappa) {
    std::vector<DiscreteSphereMeasure::Atom> moved;
    moved.reserve(kappa.atoms().size());
    for (const auto& [pt, w] : kappa.atoms()) {
        moved.emplace_back(project_action(g, pt), w);
    }
    return DiscreteSphereMeasure(std::move(moved));
}

/// Left-product accumulator with periodic determinant renormalization, for
/// words long enough that det drift would otherwise accumulate.
class UnimodularProduct {
public:
    explicit UnimodularProduct(int m, int renorm_interval = 64)
        : value_(Eigen::MatrixXd::Identity(m, m)), interval_(renorm_interval) {}

    void left_multiply(const UnimodularMatrix& g) {
        value_ = g.entries() * value_;
        if (++count_ % interval_ == 0) {
            const double d = value_.determinant();
            if (d <= 0.0) {
                throw std::runtime_error("UnimodularProduct: determinant drifted to " +
                                         std::to_string(d));
            }
            value_ /= std::pow(d, 1.0 / static_cast<double>(value_.rows()));
        }
    }

    const Eigen::MatrixXd& raw() const { return value_; }
    UnimodularMatrix value() const { return UnimodularMatrix(value_); }
    long count() const { return count_; }

private:
    Eigen::MatrixXd value_;
    int interval_;
    long count_ = 0;
};

} // namespace markprod
