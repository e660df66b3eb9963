#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "markprod/linalg.hpp"
#include "markprod/markov.hpp"
#include "markprod/rng.hpp"
#include "markprod/stats.hpp"
#include "markprod/system.hpp"

namespace markprod {

namespace detail {

inline void check_horizons(const std::vector<int>& horizons) {
    if (horizons.empty()) throw std::invalid_argument("horizons: empty list");
    int prev = 0;
    for (int h : horizons) {
        if (h <= prev) throw std::invalid_argument("horizons must be strictly increasing and >= 1");
        prev = h;
    }
}

/// Uniform point on S^{m-1} from counter draws (Box-Muller on slot pairs).
inline Eigen::VectorXd uniform_sphere_point(const CounterRng& rng, int m, std::uint64_t step) {
    Eigen::VectorXd v(m);
    for (int i = 0; i < m; i += 2) {
        const double u1 = std::max(rng.uniform(step, 16 + static_cast<std::uint64_t>(i)), 1e-300);
        const double u2 = rng.uniform(step, 17 + static_cast<std::uint64_t>(i));
        const double r = std::sqrt(-2.0 * std::log(u1));
        v[i] = r * std::cos(2.0 * std::numbers::pi * u2);
        if (i + 1 < m) v[i + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
    }
    const double n = v.norm();
    if (n == 0.0) {
        v.setZero();
        v[0] = 1.0;
        return v;
    }
    return v / n;
}

template <typename Fn>
inline void parallel_for_chunks(long count, int threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        fn(0L, count);
        return;
    }
    const int used = static_cast<int>(std::min<long>(threads, count));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(used));
    const long chunk = (count + used - 1) / used;
    for (int t = 0; t < used; ++t) {
        const long lo = t * chunk;
        const long hi = std::min(count, lo + chunk);
        pool.emplace_back([&, t, lo, hi] {
            try {
                fn(lo, hi);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

} // namespace detail

/// One trajectory of the cocycle S_n = g_n ... g_1 with per-step norm
/// renormalization: log ||S_n|| accumulates exactly while the running frame
/// stays O(1), so horizons of 10^6 steps never overflow.
struct SimulatedProduct {
    std::vector<double> log_norms; // log ||S_n|| for n = 1..horizon
    Eigen::MatrixXd final_frame;   // S_horizon / ||S_horizon||
    std::vector<int> path;         // the driving trajectory
};

inline SimulatedProduct simulate_product(const MatrixSystem& system, int horizon,
                                         std::uint64_t seed, std::uint64_t stream = 0) {
    if (horizon < 1) throw std::invalid_argument("simulate_product: horizon must be >= 1");
    SimulatedProduct out;
    out.path = sample_path(system.chain(), horizon, seed, stream);
    out.log_norms.resize(static_cast<std::size_t>(horizon));

    Eigen::MatrixXd frame = Eigen::MatrixXd::Identity(system.matrix_dim(), system.matrix_dim());
    double log_total = 0.0;
    for (int n = 1; n <= horizon; ++n) {
        frame = system.matrix_at(n, out.path[static_cast<std::size_t>(n - 1)]).entries() * frame;
        const double s = UnimodularMatrix::spectral_norm_of(frame);
        log_total += std::log(s);
        frame /= s;
        out.log_norms[static_cast<std::size_t>(n - 1)] = log_total;
    }
    out.final_frame = std::move(frame);
    return out;
}

struct HorizonStat {
    int horizon = 0;
    double mean = 0.0;    // mean over trajectories of n^{-1} log ||S_n||
    double stderr_ = 0.0; // standard error of that mean
    double min = 0.0;     // min over trajectories (empirical liminf proxy)
};

struct GrowthReport {
    std::vector<HorizonStat> rows;
    double fitted_slope = 0.0; // least-squares slope of mean log ||S_n|| vs n
    double fitted_r2 = 1.0;
    int trajectories = 0;
    std::uint64_t seed = 0;
    // Diagnostic only: the per-step rate kept growing across the horizon
    // window, which is what unbounded (lambda = +infinity) growth looks like
    // at finite n. Never asserted, only reported.
    bool superlinear_hint = false;
};

inline GrowthReport lyapunov_estimate(const MatrixSystem& system, const std::vector<int>& horizons,
                                      int trajectories, std::uint64_t seed, int threads = 1) {
    detail::check_horizons(horizons);
    if (trajectories < 1) throw std::invalid_argument("lyapunov_estimate: trajectories must be >= 1");
    const int hmax = horizons.back();
    const std::size_t nh = horizons.size();

    // per-trajectory Cesaro values at each horizon, reduced in fixed order
    std::vector<std::vector<double>> cesaro(nh, std::vector<double>(static_cast<std::size_t>(trajectories)));
    detail::parallel_for_chunks(trajectories, threads, [&](long lo, long hi) {
        for (long t = lo; t < hi; ++t) {
            SimulatedProduct sim = simulate_product(system, hmax, seed, static_cast<std::uint64_t>(t));
            for (std::size_t h = 0; h < nh; ++h) {
                const int n = horizons[h];
                cesaro[h][static_cast<std::size_t>(t)] =
                    sim.log_norms[static_cast<std::size_t>(n - 1)] / static_cast<double>(n);
            }
        }
    });

    GrowthReport rep;
    rep.trajectories = trajectories;
    rep.seed = seed;
    std::vector<double> xs, ys;
    for (std::size_t h = 0; h < nh; ++h) {
        SampleStats st = sample_stats(cesaro[h]);
        rep.rows.push_back(HorizonStat{horizons[h], st.mean, st.stderr_of_mean, st.min});
        xs.push_back(static_cast<double>(horizons[h]));
        ys.push_back(st.mean * static_cast<double>(horizons[h]));
    }
    if (nh >= 2) {
        LinearFit fit = linear_fit(xs, ys);
        rep.fitted_slope = fit.slope;
        rep.fitted_r2 = fit.r_squared;
        const HorizonStat& first = rep.rows.front();
        const HorizonStat& last = rep.rows.back();
        rep.superlinear_hint =
            last.mean > 0.0 && (last.mean - first.mean) > 3.0 * (first.stderr_ + last.stderr_);
    } else {
        rep.fitted_slope = rep.rows.front().mean;
    }
    return rep;
}

struct DecayPoint {
    int horizon = 0;
    double mean = 0.0;
    double stderr_ = 0.0;
    double min = 0.0;
    long samples = 0;
};

struct DecayCurve {
    std::vector<DecayPoint> rows;
    std::uint64_t seed = 0;
};

/// Monte Carlo estimate of the moment integral over S of E ||S_n u||^{-m/2},
/// with u uniform on the sphere and paths from the chain. The vector norm
/// accumulates in log scale, so deep horizons stay well-conditioned.
inline DecayCurve moment_decay_mc(const MatrixSystem& system, const std::vector<int>& horizons,
                                  long samples, std::uint64_t seed, int threads = 1) {
    detail::check_horizons(horizons);
    if (samples < 1) throw std::invalid_argument("moment_decay_mc: samples must be >= 1");
    const int hmax = horizons.back();
    const std::size_t nh = horizons.size();
    const int m = system.matrix_dim();
    const double expo = static_cast<double>(m) / 2.0;

    std::vector<std::vector<double>> vals(nh, std::vector<double>(static_cast<std::size_t>(samples)));
    detail::parallel_for_chunks(samples, threads, [&](long lo, long hi) {
        for (long s = lo; s < hi; ++s) {
            CounterRng rng(seed, static_cast<std::uint64_t>(s));
            std::vector<int> path = sample_path(system.chain(), hmax, seed, static_cast<std::uint64_t>(s));
            Eigen::VectorXd v = detail::uniform_sphere_point(rng, m, 0);
            double log_norm = 0.0;
            std::size_t next = 0;
            for (int n = 1; n <= hmax; ++n) {
                v = system.matrix_at(n, path[static_cast<std::size_t>(n - 1)]).entries() * v;
                const double nv = v.norm();
                log_norm += std::log(nv);
                v /= nv;
                if (next < nh && n == horizons[next]) {
                    vals[next][static_cast<std::size_t>(s)] = std::exp(-expo * log_norm);
                    ++next;
                }
            }
        }
    });

    DecayCurve curve;
    curve.seed = seed;
    for (std::size_t h = 0; h < nh; ++h) {
        SampleStats st = sample_stats(vals[h]);
        curve.rows.push_back(DecayPoint{horizons[h], st.mean, st.stderr_of_mean, st.min,
                                        static_cast<long>(st.count)});
    }
    return curve;
}

// ---- CSV emission ---------------------------------------------------------

namespace detail {

inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return std::string(buf);
}

} // namespace detail

inline void write_growth_csv(const GrowthReport& rep, std::ostream& os,
                             const std::vector<std::string>& meta = {}) {
    for (const auto& line : meta) os << "# " << line << "\n";
    os << "n,mean,stderr,min,samples\n";
    for (const auto& r : rep.rows) {
        os << r.horizon << ',' << detail::fmt_double(r.mean) << ',' << detail::fmt_double(r.stderr_)
           << ',' << detail::fmt_double(r.min) << ',' << rep.trajectories << "\n";
    }
}

inline void write_decay_csv(const DecayCurve& curve, std::ostream& os,
                            const std::vector<std::string>& meta = {},
                            const std::vector<double>* exact = nullptr) {
    for (const auto& line : meta) os << "# " << line << "\n";
    os << "n,mean,stderr,min,samples" << (exact ? ",exact" : "") << "\n";
    for (std::size_t i = 0; i < curve.rows.size(); ++i) {
        const auto& r = curve.rows[i];
        os << r.horizon << ',' << detail::fmt_double(r.mean) << ',' << detail::fmt_double(r.stderr_)
           << ',' << detail::fmt_double(r.min) << ',' << r.samples;
        if (exact) os << ',' << detail::fmt_double((*exact)[i]);
        os << "\n";
    }
}

} // namespace markprod
