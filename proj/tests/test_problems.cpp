#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "mgritopt/problems.hpp"
#include "mgritopt/propagators.hpp"

using namespace mgritopt;

TEST_CASE("mp1 instance has unit domain, random b, closed-form L") {
    const auto p = build_mp1(40, 1234);
    REQUIRE(p.kind == ProblemKind::Mp1);
    REQUIRE(p.A.d == 1);
    REQUIRE(p.A.h == Catch::Approx(1.0 / 41.0).epsilon(1e-15));
    REQUIRE(p.lambda == 0.0);
    REQUIRE(p.c.size() == 40);
    REQUIRE((p.c.array() >= 0.0).all());
    REQUIRE((p.c.array() < 1.0).all());
    REQUIRE(p.L == Catch::Approx(spectral_norm(p.A)).epsilon(1e-15));

    const auto q = build_mp1(40, 1234);
    REQUIRE((p.c.array() == q.c.array()).all());
    const auto r = build_mp1(40, 99);
    REQUIRE((p.c - r.c).norm() > 0.0);
}

TEST_CASE("problem descriptor round trips") {
    const auto p = build_mp1(17, 42);
    const auto j = to_descriptor_json(p);
    REQUIRE(j.dump() == R"({"kind":"mp1","n":17,"d":1,"lambda":0.0,"seed":42})");
    const auto q = problem_from_descriptor(j);
    REQUIRE(q.kind == p.kind);
    REQUIRE((q.c.array() == p.c.array()).all());

    const auto m2 = build_mp2(2, 6, 900.0, 7);
    const auto q2 = problem_from_descriptor(to_descriptor_json(m2));
    REQUIRE(q2.kind == ProblemKind::Mp2_2d);
    REQUIRE((q2.c.array() == m2.c.array()).all());
    REQUIRE((q2.phi.array() == m2.phi.array()).all());
    REQUIRE(q2.lambda == m2.lambda);
}

TEST_CASE("mp2 1d obstacle, domain, and linear term") {
    const auto p = build_mp2(1, 32, 900.0, 0);
    REQUIRE(p.A.h == Catch::Approx(3.0 * std::numbers::pi / 33.0).epsilon(1e-15));
    REQUIRE(p.lambda == 900.0);
    for (Eigen::Index i = 0; i < 32; ++i) {
        const double x = static_cast<double>(i + 1) * p.A.h;
        REQUIRE(p.phi[i] == Catch::Approx(std::max(0.0, std::sin(x))).margin(1e-15));
    }
    // p = -A phi
    REQUIRE((p.c + apply(p.A, p.phi)).norm() <= 1e-12 * p.c.norm());
}

TEST_CASE("obstacle function cases") {
    REQUIRE(obstacle(1, 0.5 * std::numbers::pi) == Catch::Approx(1.0));
    REQUIRE(obstacle(1, 1.5 * std::numbers::pi) == 0.0);
    REQUIRE(obstacle(2, 0.5 * std::numbers::pi, 0.5 * std::numbers::pi) == Catch::Approx(1.0));
    REQUIRE(obstacle(2, 0.5 * std::numbers::pi, 1.5 * std::numbers::pi) == 0.0);
}

TEST_CASE("mp2 2d obstacle has product structure") {
    const auto p = build_mp2(2, 12, 900.0, 0);
    const double h = p.A.h;
    for (Eigen::Index j = 0; j < 12; ++j) {
        for (Eigen::Index i = 0; i < 12; ++i) {
            const double x = static_cast<double>(i + 1) * h;
            const double y = static_cast<double>(j + 1) * h;
            REQUIRE(p.phi[j * 12 + i] ==
                    Catch::Approx(std::max(0.0, std::sin(x)) * std::max(0.0, std::sin(y)))
                        .margin(1e-15));
        }
    }
    REQUIRE((p.c + apply(p.A, p.phi)).norm() <= 1e-12 * std::max(1.0, p.c.norm()));
}

TEST_CASE("closed-form mp2 solution values") {
    // n = 11 puts x = 11 pi / 4 on the grid
    const Vec u = exact_solution_mp2_1d(11);
    const double h = 3.0 * std::numbers::pi / 12.0;
    for (Eigen::Index i = 0; i < 11; ++i) {
        const double x = static_cast<double>(i + 1) * h;
        if (x <= 0.5 * std::numbers::pi || x >= 2.5 * std::numbers::pi)
            REQUIRE(u[i] == Catch::Approx(std::sin(x)).margin(1e-15));
        else
            REQUIRE(u[i] == 1.0);
    }
    REQUIRE(u[10] == Catch::Approx(std::numbers::sqrt2 / 2.0).epsilon(1e-14));
    REQUIRE(u[10] > 0.0);
}

TEST_CASE("unshift adds the obstacle back") {
    const auto p = build_mp2(1, 16, 900.0, 0);
    Vec u = Vec::Constant(16, 0.25);
    const Vec lifted = unshift(p, u);
    REQUIRE((lifted - (u + p.phi)).norm() == 0.0);
    const auto q = build_mp1(16, 1);
    REQUIRE((unshift(q, u).array() == u.array()).all());
}

TEST_CASE("objective decreases along proximal gradient steps") {
    const auto p = build_mp2(1, 64, 900.0, 5);
    auto pp = std::make_shared<const ProblemInstance>(p);
    Propagator pg(PropagatorKind::ProximalGradient, pp, 1.0 / p.L);
    Vec u = initial_point(p);
    double prev = objective(p, u);
    for (int k = 0; k < 200; ++k) {
        u = pg.apply(u);
        const double cur = objective(p, u);
        REQUIRE(cur <= prev + 1e-12 * std::abs(prev));
        prev = cur;
    }
}

TEST_CASE("initial point is deterministic and decoupled from b draws") {
    const auto p = build_mp1(24, 77);
    const Vec u1 = initial_point(p);
    const Vec u2 = initial_point(p);
    REQUIRE((u1.array() == u2.array()).all());
    REQUIRE((u1.array() >= 0.0).all());
    REQUIRE((u1.array() < 1.0).all());
    // the same seed stream drives b first, then w_0
    Rng rng(77);
    rng.discard(24);
    const Vec expected = rng.vector(24);
    REQUIRE((u1.array() == expected.array()).all());
}

TEST_CASE("invalid problem arguments throw") {
    REQUIRE_THROWS_AS(build_mp2(1, 8, -1.0, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(problem_kind_from_string("mp3"), std::invalid_argument);
}
