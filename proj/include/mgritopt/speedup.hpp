#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "propagators.hpp"

namespace mgritopt {

/// Cost-model inputs of the theoretical speedup estimates. Counts may be
/// fractional (the model treats N_c = N_f/m exactly).
struct SpeedupInputs {
    double n_f = 0.0;  ///< fine steps
    double n_c = 0.0;  ///< first coarse level steps
    double n_cc = 0.0; ///< second coarse level steps (3-level)
    double t_f = 1.0;  ///< fine step time
    double t_c = 1.0;  ///< coarse step time
    double t_cc = 1.0; ///< coarsest step time (3-level)
    double n_it = 1.0; ///< MGRIT iterations
    double n_p = 1.0;  ///< processors
    double m = 2.0;    ///< coarsening factor
};

/// Two-level speedup over the sequential solve:
/// N_f t_f / (N_it (N_c t_c + 2 N_f t_f / N_p)).
inline double s2(const SpeedupInputs& in) {
    return in.n_f * in.t_f / (in.n_it * (in.n_c * in.t_c + 2.0 * in.n_f * in.t_f / in.n_p));
}

/// Three-level speedup:
/// N_f t_f / (N_it (N_cc t_cc + 3 N_c t_c / min(N_p, N_c/m) + 2 N_f t_f / N_p)).
inline double s3(const SpeedupInputs& in) {
    const double coarse_procs = std::min(in.n_p, in.n_c / in.m);
    return in.n_f * in.t_f /
           (in.n_it * (in.n_cc * in.t_cc + 3.0 * in.n_c * in.t_c / coarse_procs +
                       2.0 * in.n_f * in.t_f / in.n_p));
}

/// Two-level speedup at full parallelism N_p = N_f/m:
/// 1 / (N_it (alpha/m + 2m/N_f)).
inline double s2_full_parallel(double m, double n_it, double alpha, double n_f) {
    return 1.0 / (n_it * (alpha / m + 2.0 * m / n_f));
}

/// Three-level speedup at full parallelism with t_cc = t_c:
/// 1 / (N_it (alpha/m^2 + (2m/N_f)(1 + 3 alpha / 2))).
inline double s3_full_parallel(double m, double n_it, double alpha, double n_f) {
    return 1.0 / (n_it * (alpha / (m * m) + (2.0 * m / n_f) * (1.0 + 1.5 * alpha)));
}

/// Maximizer of the two-level full-parallel speedup, m* = sqrt(N_f alpha / 2),
/// rounded to the nearest integer.
inline long optimal_m_2level(double n_f, double alpha) {
    return std::lround(std::sqrt(n_f * alpha / 2.0));
}

/// Two-level speedup at the (unrounded) optimal m:
/// sqrt(N_f) / (2 N_it sqrt(2 alpha)).
inline double s2_optimal(double n_f, double n_it, double alpha) {
    return std::sqrt(n_f) / (n_it * 2.0 * std::sqrt(2.0 * alpha));
}

/// Maximizer of the three-level full-parallel speedup,
/// m* = cbrt((N_f/2) / (t_f/t_c + 3/2)) with t_f/t_c = 1/alpha.
inline long optimal_m_3level(double n_f, double alpha) {
    return std::lround(std::cbrt(0.5 * n_f / (1.0 / alpha + 1.5)));
}

/// One row of the paper's speedup tables.
struct SpeedupEstimate {
    int levels = 2;
    long m_star = 0;
    int n_it = 0;
    double s_star = 0.0;
    long n_p = 0; ///< ceil(N_f / m*)
};

inline SpeedupEstimate estimate_speedup(int levels, double n_f, double alpha, long m_star,
                                        int n_it) {
    if (m_star < 2) throw std::invalid_argument("estimate_speedup: m* must be at least 2");
    SpeedupEstimate e;
    e.levels = levels;
    e.m_star = m_star;
    e.n_it = n_it;
    const double m = static_cast<double>(m_star);
    e.s_star = levels == 2 ? s2_full_parallel(m, n_it, alpha, n_f)
                           : s3_full_parallel(m, n_it, alpha, n_f);
    e.n_p = static_cast<long>(std::ceil(n_f / m));
    return e;
}

/// Measures alpha = t_c/t_f by timing batched propagator applications,
/// median of `groups` group medians, factorization excluded (built up front).
/// The batch size doubles until a batch costs at least ~100 timer ticks.
inline double measure_alpha(const ProblemInstance& prob, int m, int repetitions = 100,
                            int groups = 5) {
    if (m < 2) throw std::invalid_argument("measure_alpha: m must be at least 2");
    auto prob_ptr = std::make_shared<const ProblemInstance>(prob);
    const double s = 1.0 / prob.L;
    Propagator fine(fine_kind(prob), prob_ptr, s);
    Propagator coarse(coarse_kind(prob), prob_ptr, static_cast<double>(m) * s);

    using clock = std::chrono::steady_clock;
    const double tick = static_cast<double>(clock::period::num) / clock::period::den;
    const double min_batch_seconds = std::max(100.0 * tick, 1e-5);

    auto time_batches = [&](const Propagator& phi) {
        Vec u = initial_point(prob);
        u = phi.apply(u); // warm up
        long batch = 1;
        for (;;) {
            const auto t0 = clock::now();
            for (long r = 0; r < batch; ++r) u = phi.apply(u);
            const double dt = std::chrono::duration<double>(clock::now() - t0).count();
            if (dt >= min_batch_seconds || batch > (1L << 24)) break;
            batch *= 2;
        }
        std::vector<double> medians;
        for (int g = 0; g < groups; ++g) {
            std::vector<double> samples;
            const int per_group = std::max(1, repetitions / groups);
            for (int i = 0; i < per_group; ++i) {
                const auto t0 = clock::now();
                for (long r = 0; r < batch; ++r) u = phi.apply(u);
                const double dt = std::chrono::duration<double>(clock::now() - t0).count();
                samples.push_back(dt / static_cast<double>(batch));
            }
            std::nth_element(samples.begin(), samples.begin() + samples.size() / 2, samples.end());
            medians.push_back(samples[samples.size() / 2]);
        }
        std::nth_element(medians.begin(), medians.begin() + medians.size() / 2, medians.end());
        return medians[medians.size() / 2];
    };

    const double tf = time_batches(fine);
    const double tc = time_batches(coarse);
    if (!(tf > 0.0)) throw std::runtime_error("measure_alpha: timer resolution insufficient");
    return tc / tf;
}

} // namespace mgritopt
