#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mgritopt/mgrit.hpp"

using namespace mgritopt;

namespace {

double max_point_norm(const std::vector<Vec>& traj) {
    double m = 0.0;
    for (const auto& v : traj) m = std::max(m, v.norm());
    return m;
}

} // namespace

TEST_CASE("hierarchy padding and level sizes") {
    const auto p = build_mp1(8, 1);
    MgritConfig cfg;
    cfg.m = 4;
    cfg.levels = 3;
    cfg.nt = 100;
    MgritState st(std::make_shared<const ProblemInstance>(p), cfg);
    REQUIRE(st.nt_padded() == 112);
    REQUIRE(st.level(0).points == 113);
    REQUIRE(st.level(1).points == 29);
    REQUIRE(st.level(2).points == 8);
    REQUIRE(st.level(0).w.size() == 1);
    REQUIRE(st.level(1).w.size() == 29);
}

TEST_CASE("coarse penalty weight scales with the level step") {
    const auto p = build_mp2(1, 16, 900.0, 3);
    MgritConfig cfg;
    cfg.m = 4;
    cfg.levels = 3;
    cfg.nt = 64;
    MgritState st(std::make_shared<const ProblemInstance>(p), cfg);
    const double s = 1.0 / p.L;
    REQUIRE(st.level(0).phi.prox_weight() == Catch::Approx(s * 900.0).epsilon(1e-15));
    REQUIRE(st.level(1).phi.prox_weight() == Catch::Approx(4.0 * s * 900.0).epsilon(1e-15));
    REQUIRE(st.level(2).phi.prox_weight() == Catch::Approx(16.0 * s * 900.0).epsilon(1e-15));
    REQUIRE(st.level(1).phi.kind() == PropagatorKind::AlternatingProximal);
}

TEST_CASE("config validation") {
    const auto p = build_mp1(8, 1);
    auto pp = std::make_shared<const ProblemInstance>(p);
    MgritConfig cfg;
    cfg.m = 4;
    cfg.levels = 4;
    cfg.nt = 63; // below m^(levels-1) = 64
    REQUIRE_THROWS_AS(MgritState(pp, cfg), std::invalid_argument);
    cfg.nt = 64;
    REQUIRE_NOTHROW(MgritState(pp, cfg));
    cfg.m = 1;
    REQUIRE_THROWS_AS(MgritState(pp, cfg), std::invalid_argument);
    cfg.m = 4;
    cfg.levels = 1;
    REQUIRE_THROWS_AS(MgritState(pp, cfg), std::invalid_argument);

    const auto q = build_mp2(1, 16, 900.0, 3);
    MgritConfig lcfg;
    lcfg.m = 4;
    lcfg.levels = 2;
    lcfg.nt = 64;
    lcfg.variant = MgritVariant::Linear;
    REQUIRE_THROWS_AS(MgritState(std::make_shared<const ProblemInstance>(q), lcfg),
                      std::invalid_argument);
}

TEST_CASE("exactness: k iterations solve the first 2mk fine points") {
    const auto p = build_mp1(16, 2025);
    MgritConfig cfg;
    cfg.m = 4;
    cfg.levels = 2;
    cfg.nt = 64;
    cfg.tol = 1e-300; // force all iterations
    cfg.max_iter = 8;

    const Vec w0 = initial_point(p);
    const auto seq = run_sequential(p, PropagatorKind::GradientDescent, 0.0, 64, &w0, 1);
    const double scale = max_point_norm([&] {
        std::vector<Vec> t;
        for (Eigen::Index i = 0; i <= 64; ++i) t.push_back(seq.trajectory.point(i));
        return t;
    }());

    for (MgritVariant variant : {MgritVariant::Linear, MgritVariant::Fas}) {
        MgritConfig c = cfg;
        c.variant = variant;
        std::vector<double> prefix_err_by_iter;
        c.observer = [&](int k, const MgritState& st) {
            if (k == 0) return;
            const Eigen::Index upto = std::min<Eigen::Index>(2 * 4 * k, 64);
            double err = 0.0;
            for (Eigen::Index i = 0; i <= upto; ++i)
                err = std::max(err,
                               (st.fine_u()[static_cast<std::size_t>(i)] -
                                seq.trajectory.point(i))
                                   .norm());
            prefix_err_by_iter.push_back(err);
        };
        mgrit_solve(p, c);
        REQUIRE(prefix_err_by_iter.size() >= 4);
        for (double err : prefix_err_by_iter) REQUIRE(err <= 1e-10 * scale);
    }
}

TEST_CASE("two and three level solves converge and match the sequential solution") {
    const auto p = build_mp1(16, 77);
    const auto seq = run_sequential(p, PropagatorKind::GradientDescent, 0.0, 256, nullptr, 1);
    for (int levels : {2, 3}) {
        MgritConfig cfg;
        cfg.m = 4;
        cfg.levels = levels;
        cfg.nt = 256;
        const auto rep = mgrit_solve(p, cfg);
        REQUIRE(rep.halted == HaltReason::Converged);
        REQUIRE(rep.iterations <= 25);
        REQUIRE(rep.residual_norms.back() <= 1e-8 * rep.residual_norms.front());
        for (std::size_t k = 1; k < rep.residual_norms.size(); ++k)
            REQUIRE(rep.residual_norms[k] < rep.residual_norms[k - 1]);
        REQUIRE((rep.final_point - seq.final_point).norm() <=
                1e-5 * std::max(1.0, seq.final_point.norm()));
    }
}

TEST_CASE("linear and fas corrections produce identical iterates on mp1") {
    const auto p = build_mp1(12, 4242);
    for (int levels : {2, 3}) {
        MgritConfig base;
        base.m = 4;
        base.levels = levels;
        base.nt = 128;
        base.max_iter = 12;
        base.tol = 1e-300;

        std::vector<std::vector<Vec>> lin_snaps, fas_snaps;
        MgritConfig lin = base;
        lin.variant = MgritVariant::Linear;
        lin.observer = [&](int, const MgritState& st) { lin_snaps.push_back(st.fine_u()); };
        mgrit_solve(p, lin);
        MgritConfig fas = base;
        fas.variant = MgritVariant::Fas;
        fas.observer = [&](int, const MgritState& st) { fas_snaps.push_back(st.fine_u()); };
        mgrit_solve(p, fas);

        REQUIRE(lin_snaps.size() == fas_snaps.size());
        const double scale = std::max(1.0, max_point_norm(fas_snaps.back()));
        for (std::size_t k = 0; k < lin_snaps.size(); ++k)
            for (std::size_t i = 0; i < lin_snaps[k].size(); ++i)
                REQUIRE((lin_snaps[k][i] - fas_snaps[k][i]).norm() <= 1e-12 * scale);
    }
}

TEST_CASE("ideal coarse operator converges in one iteration") {
    const auto p = build_mp1(10, 31);
    auto pp = std::make_shared<const ProblemInstance>(p);
    for (MgritVariant variant : {MgritVariant::Linear, MgritVariant::Fas}) {
        MgritConfig cfg;
        cfg.m = 4;
        cfg.levels = 2;
        cfg.nt = 128;
        cfg.variant = variant;
        cfg.max_iter = 1;
        MgritState st(pp, cfg);
        st.level(1).phi = Propagator(PropagatorKind::GradientDescent, pp, st.fine_step(), 4);
        st.initialize(nullptr);
        const auto rep = mgrit_run(st, cfg);
        REQUIRE(rep.residual_norms.back() <= 1e-10 * rep.residual_norms.front());
    }
}

TEST_CASE("residual blocks start at the enforced initial condition") {
    const auto p = build_mp1(8, 12);
    MgritConfig cfg;
    cfg.m = 2;
    cfg.levels = 2;
    cfg.nt = 16;
    auto pp = std::make_shared<const ProblemInstance>(p);
    MgritState st(pp, cfg);
    st.initialize(nullptr);
    compute_residual(st, 0);
    REQUIRE(st.level(0).r[0].norm() == 0.0);
    REQUIRE(st.level(0).r.size() == 9);
}

TEST_CASE("injection of a coarse vector placed at C-points is the identity") {
    Rng rng(8);
    std::vector<Vec> coarse;
    for (int j = 0; j <= 5; ++j) coarse.push_back(rng.vector(3));
    std::vector<Vec> fine(5 * 4 + 1, Vec::Zero(3));
    for (int j = 0; j <= 5; ++j) fine[static_cast<std::size_t>(4 * j)] = coarse[static_cast<std::size_t>(j)];
    const auto back = restrict_inject(fine, 4);
    REQUIRE(back.size() == coarse.size());
    for (std::size_t j = 0; j < coarse.size(); ++j)
        REQUIRE((back[j].array() == coarse[j].array()).all());
}

TEST_CASE("runs are bit-identical for any thread count") {
    const auto p = build_mp2(1, 32, 900.0, 9);
    MgritConfig base;
    base.m = 4;
    base.levels = 3;
    base.nt = 256;
    base.max_iter = 30;

    MgritConfig c1 = base;
    c1.threads = 1;
    const auto r1 = mgrit_solve(p, c1);
    for (int threads : {2, 5, 8}) {
        MgritConfig ct = base;
        ct.threads = threads;
        const auto rt = mgrit_solve(p, ct);
        REQUIRE(rt.iterations == r1.iterations);
        REQUIRE(rt.residual_norms.size() == r1.residual_norms.size());
        for (std::size_t k = 0; k < r1.residual_norms.size(); ++k)
            REQUIRE(rt.residual_norms[k] == r1.residual_norms[k]);
        REQUIRE((rt.final_point.array() == r1.final_point.array()).all());
    }
}

TEST_CASE("reruns with the same seed are bit-identical") {
    const auto p = build_mp1(16, 5150);
    MgritConfig cfg;
    cfg.m = 4;
    cfg.levels = 2;
    cfg.nt = 128;
    const auto a = mgrit_solve(p, cfg);
    const auto b = mgrit_solve(p, cfg);
    REQUIRE(a.iterations == b.iterations);
    for (std::size_t k = 0; k < a.residual_norms.size(); ++k)
        REQUIRE(a.residual_norms[k] == b.residual_norms[k]);
    REQUIRE((a.final_point.array() == b.final_point.array()).all());
}

TEST_CASE("mp2 solve converges with fas and matches sequential") {
    const auto p = build_mp2(1, 32, 900.0, 21);
    const auto seq = run_sequential(p, PropagatorKind::ProximalGradient, 1e-8, 2000000);
    MgritConfig cfg;
    cfg.m = 4;
    cfg.levels = 2;
    cfg.nt = seq.n_t;
    const auto rep = mgrit_solve(p, cfg);
    REQUIRE(rep.halted == HaltReason::Converged);
    REQUIRE(rep.variant == "fas");
    REQUIRE((rep.final_point - seq.final_point).norm() <=
            1e-5 * std::max(1.0, seq.final_point.norm()));
    REQUIRE(rep.gradient_norms.back() <= 1e-6 * rep.gradient_norms.front());
}

TEST_CASE("empirical contraction drops the warmup and tail ratios") {
    REQUIRE(empirical_contraction({1.0, 0.5, 0.05, 0.005, 0.004}) == Catch::Approx(0.1).epsilon(1e-12));
    REQUIRE(std::isnan(empirical_contraction({1.0})));
    REQUIRE(empirical_contraction({1.0, 0.25}) == Catch::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("iteration counts are nearly independent of the spatial resolution") {
    std::vector<int> iters;
    for (Eigen::Index n : {64, 128}) {
        const auto p = build_mp2(1, n, 900.0, 55);
        const auto seq = run_sequential(p, PropagatorKind::ProximalGradient, 1e-8, 5000000);
        MgritConfig cfg;
        cfg.m = 4;
        cfg.levels = 2;
        cfg.nt = seq.n_t;
        iters.push_back(mgrit_solve(p, cfg).iterations);
    }
    REQUIRE(std::abs(iters[0] - iters[1]) <= 3);
}

TEST_CASE("adaptive horizon driver reaches the gradient target across windows") {
    const auto p = build_mp1(16, 808);
    const auto seq = run_sequential(p, PropagatorKind::GradientDescent, 1e-8, 1000000);
    MgritConfig cfg;
    cfg.m = 4;
    cfg.levels = 2;

    const auto rep = adaptive_horizon_solve(p, cfg, seq.n_t / 4);
    REQUIRE(rep.halted == HaltReason::Converged);
    REQUIRE(rep.windows.size() >= 2);
    REQUIRE(rep.total_steps >= seq.n_t);
    REQUIRE(rep.achieved_gradient <= rep.target_gradient);

    // a window longer than the sequential horizon never stalls
    const auto oneshot = adaptive_horizon_solve(p, cfg, 2 * seq.n_t);
    REQUIRE(oneshot.halted == HaltReason::Converged);
    REQUIRE(oneshot.windows.size() == 1);
}

TEST_CASE("window cap trips the stall reason") {
    const auto p = build_mp1(16, 909);
    MgritConfig cfg;
    cfg.m = 4;
    cfg.levels = 2;
    GrowthPolicy growth;
    growth.max_windows = 1;
    growth.use_rate_estimate = false;
    const auto rep = adaptive_horizon_solve(p, cfg, 16, growth);
    REQUIRE(rep.halted == HaltReason::Stalled);
    REQUIRE(rep.windows.size() == 1);
    REQUIRE(rep.windows[0].halted == HaltReason::Stalled);
}
