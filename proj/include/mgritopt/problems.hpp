#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "laplacian.hpp"
#include "rng.hpp"

namespace mgritopt {

enum class ProblemKind { Mp1, Mp2_1d, Mp2_2d };

inline std::string to_string(ProblemKind k) {
    switch (k) {
        case ProblemKind::Mp1: return "mp1";
        case ProblemKind::Mp2_1d: return "mp2-1d";
        case ProblemKind::Mp2_2d: return "mp2-2d";
    }
    throw std::invalid_argument("unknown problem kind");
}

inline ProblemKind problem_kind_from_string(const std::string& s) {
    if (s == "mp1") return ProblemKind::Mp1;
    if (s == "mp2-1d") return ProblemKind::Mp2_1d;
    if (s == "mp2-2d") return ProblemKind::Mp2_2d;
    throw std::invalid_argument("unknown problem kind: " + s);
}

/// Data of min_u 1/2 <A u, u> - <c, u> + lambda ||max(-u, 0)||_1.
///
/// MP1 is the smooth quadratic (lambda = 0, c = b random in [0,1]^n, unit
/// domain). MP2 is the obstacle problem in shifted penalty form on [0, 3pi]^d
/// with c = p = -A phi and phi the obstacle samples.
struct ProblemInstance {
    ProblemKind kind = ProblemKind::Mp1;
    LaplacianOperator A;
    Vec c;
    double lambda = 0.0;
    Vec phi;
    double L = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t rng_offset = 0; ///< draws consumed while building the instance

    Eigen::Index size() const { return A.size(); }
};

inline ProblemInstance build_mp1(Eigen::Index n, std::uint64_t seed) {
    ProblemInstance p;
    p.kind = ProblemKind::Mp1;
    p.A = build_laplacian(1, n, 1.0 / static_cast<double>(n + 1));
    Rng rng(seed);
    p.c = rng.vector(n);
    p.lambda = 0.0;
    p.L = spectral_norm(p.A);
    p.seed = seed;
    p.rng_offset = static_cast<std::uint64_t>(n);
    return p;
}

/// Obstacle value at a grid coordinate: max(0, sin x), product form for d=2.
inline double obstacle(int d, double x, double y = 0.0) {
    const double ox = std::max(0.0, std::sin(x));
    if (d == 1) return ox;
    return ox * std::max(0.0, std::sin(y));
}

inline ProblemInstance build_mp2(int d, Eigen::Index n, double lambda = 900.0,
                                 std::uint64_t seed = 0) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("build_mp2: lambda must be nonnegative");
    ProblemInstance p;
    p.kind = d == 2 ? ProblemKind::Mp2_2d : ProblemKind::Mp2_1d;
    const double h = 3.0 * std::numbers::pi / static_cast<double>(n + 1);
    p.A = build_laplacian(d, n, h);
    p.phi.resize(p.A.size());
    if (d == 1) {
        for (Eigen::Index i = 0; i < n; ++i) p.phi[i] = obstacle(1, static_cast<double>(i + 1) * h);
    } else {
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i)
                p.phi[j * n + i] = obstacle(2, static_cast<double>(i + 1) * h,
                                            static_cast<double>(j + 1) * h);
    }
    p.c = -apply(p.A, p.phi);
    p.lambda = lambda;
    p.L = spectral_norm(p.A);
    p.seed = seed;
    p.rng_offset = 0;
    return p;
}

/// Closed-form solution of the continuous MP2 obstacle problem in 1d,
/// sampled on the grid: sin x on [0, pi/2] and [5pi/2, 3pi], 1 in between.
inline Vec exact_solution_mp2_1d(Eigen::Index n) {
    const double h = 3.0 * std::numbers::pi / static_cast<double>(n + 1);
    Vec u(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = static_cast<double>(i + 1) * h;
        if (x <= 0.5 * std::numbers::pi || x >= 2.5 * std::numbers::pi)
            u[i] = std::sin(x);
        else
            u[i] = 1.0;
    }
    return u;
}

/// Undo the obstacle shift: the membrane height is u + phi.
inline Vec unshift(const ProblemInstance& p, const Vec& u) {
    if (p.phi.size() == 0) return u;
    return u + p.phi;
}

/// Gradient of the smooth part, A u - c.
inline Vec gradient(const ProblemInstance& p, const Vec& u) { return apply(p.A, u) - p.c; }

/// Full objective 1/2 <A u, u> - <c, u> + lambda ||max(-u, 0)||_1.
inline double objective(const ProblemInstance& p, const Vec& u) {
    double val = 0.5 * u.dot(apply(p.A, u)) - p.c.dot(u);
    if (p.lambda > 0.0)
        val += p.lambda * (-u.array()).max(0.0).sum();
    return val;
}

/// Shared start vector of the sequential recurrence (the w_0 block), drawn
/// from the problem seed after the instance-building draws.
inline Vec initial_point(const ProblemInstance& p) {
    Rng rng(p.seed);
    rng.discard(p.rng_offset);
    return rng.vector(p.size());
}

/// Generator positioned after the problem data and w_0 draws; used to fill
/// the random interior guess of the all-at-once system.
inline Rng guess_rng(const ProblemInstance& p) {
    Rng rng(p.seed);
    rng.discard(p.rng_offset + static_cast<std::uint64_t>(p.size()));
    return rng;
}

inline nlohmann::ordered_json to_descriptor_json(const ProblemInstance& p) {
    return nlohmann::ordered_json{{"kind", to_string(p.kind)},
                                  {"n", p.A.n},
                                  {"d", p.A.d},
                                  {"lambda", p.lambda},
                                  {"seed", p.seed}};
}

inline ProblemInstance problem_from_descriptor(const nlohmann::json& j) {
    const ProblemKind kind = problem_kind_from_string(j.at("kind").get<std::string>());
    const auto n = j.at("n").get<Eigen::Index>();
    const auto seed = j.at("seed").get<std::uint64_t>();
    if (kind == ProblemKind::Mp1) return build_mp1(n, seed);
    return build_mp2(j.at("d").get<int>(), n, j.at("lambda").get<double>(), seed);
}

} // namespace mgritopt
