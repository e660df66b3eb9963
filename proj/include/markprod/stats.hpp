#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace markprod {

/// Compensated summation; reductions stay order-insensitive in practice and
/// reproducible because callers always reduce in a fixed order.
class KahanSum {
public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

struct SampleStats {
    double mean = 0.0;
    double stderr_of_mean = 0.0;
    double min = 0.0;
    std::size_t count = 0;
};

inline SampleStats sample_stats(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("sample_stats: empty sample");
    KahanSum s;
    double mn = xs.front();
    for (double x : xs) {
        s.add(x);
        if (x < mn) mn = x;
    }
    const double mean = s.value() / static_cast<double>(xs.size());
    KahanSum sq;
    for (double x : xs) sq.add((x - mean) * (x - mean));
    double se = 0.0;
    if (xs.size() > 1) {
        const double var = sq.value() / static_cast<double>(xs.size() - 1);
        se = std::sqrt(var / static_cast<double>(xs.size()));
    }
    return SampleStats{mean, se, mn, xs.size()};
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 1.0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("linear_fit: need two or more paired points");
    }
    const double n = static_cast<double>(x.size());
    KahanSum sx, sy;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx.add(x[i]);
        sy.add(y[i]);
    }
    const double mx = sx.value() / n, my = sy.value() / n;
    KahanSum sxx, sxy, syy;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx.add((x[i] - mx) * (x[i] - mx));
        sxy.add((x[i] - mx) * (y[i] - my));
        syy.add((y[i] - my) * (y[i] - my));
    }
    if (sxx.value() == 0.0) throw std::invalid_argument("linear_fit: degenerate abscissae");
    LinearFit f;
    f.slope = sxy.value() / sxx.value();
    f.intercept = my - f.slope * mx;
    if (syy.value() > 0.0) {
        double ss_res = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - (f.intercept + f.slope * x[i]);
            ss_res += r * r;
        }
        f.r_squared = 1.0 - ss_res / syy.value();
    }
    return f;
}

} // namespace markprod
