#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "parallel.hpp"
#include "propagators.hpp"
#include "sequential.hpp"

namespace mgritopt {

enum class MgritVariant { Auto, Linear, Fas };
enum class HaltReason { Converged, Stalled, MaxIter };

inline std::string to_string(MgritVariant v) {
    switch (v) {
        case MgritVariant::Auto: return "auto";
        case MgritVariant::Linear: return "linear";
        case MgritVariant::Fas: return "fas";
    }
    throw std::invalid_argument("unknown variant");
}

inline std::string to_string(HaltReason r) {
    switch (r) {
        case HaltReason::Converged: return "converged";
        case HaltReason::Stalled: return "stalled";
        case HaltReason::MaxIter: return "max-iter";
    }
    throw std::invalid_argument("unknown halt reason");
}

class MgritState;

struct MgritConfig {
    int m = 4;                ///< coarsening factor
    int levels = 2;           ///< total grid levels
    Eigen::Index nt = 0;      ///< requested fine steps; padded to a multiple of m^(levels-1)
    double tol = 1e-8;        ///< relative C-point residual reduction
    int max_iter = 100;
    MgritVariant variant = MgritVariant::Auto;
    int threads = 1;
    double step = 0.0;        ///< fine step size, 0 selects 1/L
    std::uint64_t seed = 0;   ///< 0 selects the problem seed
    bool collect_figure_data = false;

    /// Gradient-based halting used by the adaptive-horizon driver: succeed
    /// when the final-point generalized gradient norm falls below the
    /// absolute target, flag a stall when the residual tolerance is met
    /// while the gradient target is not.
    bool halt_on_gradient = false;
    double gradient_target_abs = 0.0;

    const Vec* w0 = nullptr;  ///< initial-condition override (adaptive windows)
    const SequentialResult* reference = nullptr; ///< exact trajectory, enables error norms
    std::function<void(int, const MgritState&)> observer; ///< called after every V-cycle
};

/// Per-C-point diagnostics backing the paper figures.
struct FigureData {
    std::vector<Eigen::Index> cpoint_time_indices;
    std::vector<std::vector<double>> residual_cpoint_norms; ///< [iteration][cpoint]
    std::vector<std::vector<double>> gradient_cpoint_norms; ///< [iteration][cpoint]
    std::vector<Vec> final_residual_blocks;
};

struct ConvergenceReport {
    std::string problem_kind;
    Eigen::Index n = 0;
    int d = 1;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    int m = 0;
    int levels = 0;
    Eigen::Index nt = 0;
    Eigen::Index nt_padded = 0;
    double tol = 0.0;
    int max_iter = 0;
    std::string variant;
    int threads = 1;
    double fine_step = 0.0;
    HaltReason halted = HaltReason::MaxIter;
    int iterations = 0;
    std::vector<double> residual_norms;    ///< k = 0..iterations
    std::vector<double> gradient_norms;    ///< final-point generalized gradient per k
    std::vector<double> error_norms;       ///< vs reference trajectory, when attached
    std::vector<double> iteration_seconds;
    double total_seconds = 0.0;
    double rho_r = std::numeric_limits<double>::quiet_NaN();
    double rho_e = std::numeric_limits<double>::quiet_NaN();
    Vec final_point;
    FigureData figure;
};

/// Geometric mean of consecutive ratios of a positive history, dropping the
/// first and last ratio when enough iterations are available.
inline double empirical_contraction(const std::vector<double>& history) {
    if (history.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> ratios;
    ratios.reserve(history.size() - 1);
    for (std::size_t k = 1; k < history.size(); ++k) ratios.push_back(history[k] / history[k - 1]);
    std::size_t lo = 0, hi = ratios.size();
    if (ratios.size() >= 3) {
        lo = 1;
        hi = ratios.size() - 1;
    }
    double acc = 0.0;
    int cnt = 0;
    for (std::size_t i = lo; i < hi; ++i) {
        if (std::isfinite(ratios[i]) && ratios[i] > 0.0) {
            acc += std::log(ratios[i]);
            ++cnt;
        }
    }
    return cnt > 0 ? std::exp(acc / static_cast<double>(cnt))
                   : std::numeric_limits<double>::quiet_NaN();
}

/// All-at-once hierarchy: one trajectory, forcing vector, and residual buffer
/// per level. Points with index i = j*m are C-points; the finest level keeps
/// only the w_0 block because the remaining forcing is folded into Phi.
class MgritState {
public:
    struct Level {
        Propagator phi;
        bool linear_mode = false; ///< propagate with the homogeneous part of phi
        Eigen::Index points = 0;
        std::vector<Vec> u;
        std::vector<Vec> w;
        std::vector<Vec> r; ///< C-point residual blocks, filled by compute_residual
        std::vector<double> r_sq;
    };

    MgritState(std::shared_ptr<const ProblemInstance> prob, const MgritConfig& cfg)
        : prob_(std::move(prob)), m_(cfg.m), variant_(cfg.variant), threads_(cfg.threads) {
        if (m_ < 2) throw std::invalid_argument("mgrit: m must be at least 2");
        if (cfg.levels < 2) throw std::invalid_argument("mgrit: levels must be at least 2");
        if (cfg.nt < 1) throw std::invalid_argument("mgrit: nt must be positive");
        if (threads_ < 1) threads_ = 1;
        if (variant_ == MgritVariant::Auto)
            variant_ = prob_->lambda > 0.0 ? MgritVariant::Fas : MgritVariant::Linear;
        if (variant_ == MgritVariant::Linear && prob_->lambda != 0.0)
            throw std::invalid_argument("mgrit: linear variant requires lambda == 0");

        Eigen::Index coarsest_span = 1;
        for (int l = 1; l < cfg.levels; ++l) {
            if (coarsest_span > cfg.nt / m_)
                throw std::invalid_argument("mgrit: nt must be at least m^(levels-1)");
            coarsest_span *= m_;
        }
        nt_requested_ = cfg.nt;
        nt_padded_ = ((cfg.nt + coarsest_span - 1) / coarsest_span) * coarsest_span;

        const double s = cfg.step > 0.0 ? cfg.step : 1.0 / prob_->L;
        fine_step_ = s;
        levels_.resize(static_cast<std::size_t>(cfg.levels));
        Eigen::Index steps = nt_padded_;
        double sigma = s;
        for (int l = 0; l < cfg.levels; ++l) {
            Level& lvl = levels_[static_cast<std::size_t>(l)];
            lvl.points = steps + 1;
            lvl.phi = l == 0 ? Propagator(fine_kind(*prob_), prob_, s)
                             : Propagator(coarse_kind(*prob_), prob_, sigma);
            lvl.linear_mode = l > 0 && variant_ == MgritVariant::Linear;
            lvl.u.assign(static_cast<std::size_t>(lvl.points), Vec());
            lvl.w.assign(l == 0 ? 1u : static_cast<std::size_t>(lvl.points), Vec());
            const Eigen::Index ncp = l + 1 < cfg.levels ? steps / m_ : 0;
            lvl.r.assign(static_cast<std::size_t>(ncp + 1), Vec());
            lvl.r_sq.assign(static_cast<std::size_t>(ncp + 1), 0.0);
            steps /= m_;
            sigma *= m_;
        }
    }

    /// Fills the fine initial condition and the random interior guess.
    void initialize(const Vec* w0_override) {
        Level& fine = levels_.front();
        fine.w[0] = w0_override ? *w0_override : initial_point(*prob_);
        if (fine.w[0].size() != prob_->size())
            throw std::invalid_argument("mgrit: w0 has wrong size");
        fine.u[0] = fine.w[0];
        Rng rng = guess_rng(*prob_);
        for (Eigen::Index i = 1; i < fine.points; ++i) rng_fill(rng, fine.u[static_cast<std::size_t>(i)]);
        for (std::size_t l = 1; l < levels_.size(); ++l) {
            Level& lvl = levels_[l];
            const Eigen::Index N = prob_->size();
            for (auto& v : lvl.u) v = Vec::Zero(N);
            for (auto& v : lvl.w) v = Vec::Zero(N);
            for (auto& v : lvl.r) v = Vec::Zero(N);
        }
        for (auto& v : fine.r) v = Vec::Zero(prob_->size());
    }

    const ProblemInstance& problem() const { return *prob_; }
    std::shared_ptr<const ProblemInstance> problem_ptr() const { return prob_; }
    int m() const { return m_; }
    int num_levels() const { return static_cast<int>(levels_.size()); }
    MgritVariant variant() const { return variant_; }
    int threads() const { return threads_; }
    double fine_step() const { return fine_step_; }
    Eigen::Index nt_requested() const { return nt_requested_; }
    Eigen::Index nt_padded() const { return nt_padded_; }
    Level& level(int l) { return levels_[static_cast<std::size_t>(l)]; }
    const Level& level(int l) const { return levels_[static_cast<std::size_t>(l)]; }
    const std::vector<Vec>& fine_u() const { return levels_.front().u; }

private:
    void rng_fill(Rng& rng, Vec& v) {
        const Eigen::Index N = prob_->size();
        v.resize(N);
        for (Eigen::Index i = 0; i < N; ++i) v[i] = rng.uniform();
    }

    std::shared_ptr<const ProblemInstance> prob_;
    int m_ = 2;
    MgritVariant variant_ = MgritVariant::Auto;
    int threads_ = 1;
    double fine_step_ = 0.0;
    Eigen::Index nt_requested_ = 0;
    Eigen::Index nt_padded_ = 0;
    std::vector<Level> levels_;
};

namespace detail {

inline Vec step_point(const MgritState::Level& lvl, const Vec& prev) {
    return lvl.linear_mode ? lvl.phi.apply_linear(prev) : lvl.phi.apply(prev);
}

} // namespace detail

/// Recomputes all F-points from their left C-point, one coarse interval per
/// parallel task.
inline void f_relax(MgritState& st, int l) {
    auto& lvl = st.level(l);
    const Eigen::Index m = st.m();
    const Eigen::Index nc = (lvl.points - 1) / m;
    parallel_for(Eigen::Index(0), nc, st.threads(), [&](Eigen::Index j) {
        for (Eigen::Index i = j * m + 1; i < (j + 1) * m; ++i) {
            auto& ui = lvl.u[static_cast<std::size_t>(i)];
            ui = detail::step_point(lvl, lvl.u[static_cast<std::size_t>(i - 1)]);
            if (i < static_cast<Eigen::Index>(lvl.w.size())) ui += lvl.w[static_cast<std::size_t>(i)];
        }
    });
}

/// Recomputes all C-points except the initial condition from the preceding
/// F-point.
inline void c_relax(MgritState& st, int l) {
    auto& lvl = st.level(l);
    const Eigen::Index m = st.m();
    const Eigen::Index nc = (lvl.points - 1) / m;
    parallel_for(Eigen::Index(1), nc + 1, st.threads(), [&](Eigen::Index j) {
        const Eigen::Index i = j * m;
        auto& ui = lvl.u[static_cast<std::size_t>(i)];
        ui = detail::step_point(lvl, lvl.u[static_cast<std::size_t>(i - 1)]);
        if (i < static_cast<Eigen::Index>(lvl.w.size())) ui += lvl.w[static_cast<std::size_t>(i)];
    });
}

inline void fcf_relax(MgritState& st, int l) {
    f_relax(st, l);
    c_relax(st, l);
    f_relax(st, l);
}

/// Fills the level's C-point residual blocks r_j = w_j - u_j + Phi(u_{j*m-1})
/// and returns their 2-norm. The block at j = 0 is kept (it is zero while the
/// initial condition is enforced) and the norm is reduced in fixed C-point
/// order, independent of the thread count.
inline double compute_residual(MgritState& st, int l) {
    auto& lvl = st.level(l);
    const Eigen::Index m = st.m();
    const Eigen::Index nc = (lvl.points - 1) / m;
    lvl.r[0] = lvl.w[0] - lvl.u[0];
    lvl.r_sq[0] = lvl.r[0].squaredNorm();
    parallel_for(Eigen::Index(1), nc + 1, st.threads(), [&](Eigen::Index j) {
        const Eigen::Index i = j * m;
        Vec rj = detail::step_point(lvl, lvl.u[static_cast<std::size_t>(i - 1)]) -
                 lvl.u[static_cast<std::size_t>(i)];
        if (i < static_cast<Eigen::Index>(lvl.w.size())) rj += lvl.w[static_cast<std::size_t>(i)];
        lvl.r_sq[static_cast<std::size_t>(j)] = rj.squaredNorm();
        lvl.r[static_cast<std::size_t>(j)] = std::move(rj);
    });
    double acc = 0.0;
    for (Eigen::Index j = 0; j <= nc; ++j) acc += lvl.r_sq[static_cast<std::size_t>(j)];
    return std::sqrt(acc);
}

/// Injection: every m-th block of a fine-level sequence.
inline std::vector<Vec> restrict_inject(const std::vector<Vec>& fine, int m) {
    std::vector<Vec> coarse;
    coarse.reserve(fine.size() / static_cast<std::size_t>(m) + 1);
    for (std::size_t i = 0; i < fine.size(); i += static_cast<std::size_t>(m))
        coarse.push_back(fine[i]);
    return coarse;
}

/// FAS coarse-grid setup (expects fresh residual blocks on level l): injects
/// the C-point iterate and assembles w_{l+1} = B(v_inj) + r so the coarse
/// system solves for the full solution.
inline void coarse_correction_fas(MgritState& st, int l) {
    auto& lvl = st.level(l);
    auto& crs = st.level(l + 1);
    const Eigen::Index m = st.m();
    const Eigen::Index nc = crs.points - 1;
    crs.u[0] = lvl.u[0];
    crs.w[0] = lvl.u[0] + lvl.r[0];
    parallel_for(Eigen::Index(1), nc + 1, st.threads(), [&](Eigen::Index j) {
        const auto cj = static_cast<std::size_t>(j);
        const Vec& vj = lvl.u[static_cast<std::size_t>(j * m)];
        const Vec& vprev = lvl.u[static_cast<std::size_t>((j - 1) * m)];
        crs.u[cj] = vj;
        crs.w[cj] = vj - crs.phi.apply(vprev) + lvl.r[cj];
    });
}

/// Linear coarse-grid setup: the coarse system propagates the error with the
/// homogeneous part of Phi_Delta and w_{l+1} is the injected residual.
inline void coarse_correction_linear(MgritState& st, int l) {
    auto& lvl = st.level(l);
    auto& crs = st.level(l + 1);
    const Eigen::Index nc = crs.points - 1;
    parallel_for(Eigen::Index(0), nc + 1, st.threads(), [&](Eigen::Index j) {
        const auto cj = static_cast<std::size_t>(j);
        crs.u[cj].setZero();
        crs.w[cj] = lvl.r[cj];
    });
}

/// Writes the coarse result back into the fine C-points (replacement for FAS,
/// additive for the linear variant).
inline void correct_cpoints(MgritState& st, int l) {
    auto& lvl = st.level(l);
    auto& crs = st.level(l + 1);
    const Eigen::Index m = st.m();
    const Eigen::Index nc = crs.points - 1;
    const bool fas = st.variant() == MgritVariant::Fas;
    parallel_for(Eigen::Index(1), nc + 1, st.threads(), [&](Eigen::Index j) {
        auto& target = lvl.u[static_cast<std::size_t>(j * m)];
        if (fas)
            target = crs.u[static_cast<std::size_t>(j)];
        else
            target += crs.u[static_cast<std::size_t>(j)];
    });
}

/// Exact sequential solve of the coarsest all-at-once system.
inline void forward_solve(MgritState& st, int l) {
    auto& lvl = st.level(l);
    lvl.u[0] = lvl.w[0];
    for (Eigen::Index i = 1; i < lvl.points; ++i) {
        auto& ui = lvl.u[static_cast<std::size_t>(i)];
        ui = detail::step_point(lvl, lvl.u[static_cast<std::size_t>(i - 1)]);
        if (i < static_cast<Eigen::Index>(lvl.w.size())) ui += lvl.w[static_cast<std::size_t>(i)];
    }
}

inline void vcycle(MgritState& st, int l) {
    if (l == st.num_levels() - 1) {
        forward_solve(st, l);
        return;
    }
    fcf_relax(st, l);
    compute_residual(st, l);
    if (st.variant() == MgritVariant::Fas)
        coarse_correction_fas(st, l);
    else
        coarse_correction_linear(st, l);
    vcycle(st, l + 1);
    correct_cpoints(st, l);
    f_relax(st, l);
}

namespace detail {

inline double reference_error_norm(const MgritState& st, const SequentialResult& ref) {
    const auto& u = st.fine_u();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(u.size()); ++i) {
        const Eigen::Index ri = std::min<Eigen::Index>(i, ref.n_t);
        acc += (u[static_cast<std::size_t>(i)] - ref.trajectory.point(ri)).squaredNorm();
    }
    return std::sqrt(acc);
}

inline void collect_figure_row(const MgritState& st, FigureData& fig) {
    const auto& lvl = st.level(0);
    const std::size_t nc = lvl.r.size();
    std::vector<double> rrow(nc), grow(nc);
    const double s = st.fine_step();
    const auto& prob = st.problem();
    const Eigen::Index m = st.m();
    parallel_for(Eigen::Index(0), static_cast<Eigen::Index>(nc), st.threads(), [&](Eigen::Index j) {
        const auto cj = static_cast<std::size_t>(j);
        rrow[cj] = std::sqrt(lvl.r_sq[cj]);
        grow[cj] = generalized_gradient(prob, s, lvl.u[static_cast<std::size_t>(j * m)]).norm();
    });
    fig.residual_cpoint_norms.push_back(std::move(rrow));
    fig.gradient_cpoint_norms.push_back(std::move(grow));
}

} // namespace detail

inline ConvergenceReport mgrit_run(MgritState& st, const MgritConfig& cfg);

/// Runs MGRIT V-cycles on the all-at-once system until the C-point residual
/// norm drops by the configured tolerance (or, in gradient-halting mode, until
/// the final-point generalized gradient reaches its absolute target).
inline ConvergenceReport mgrit_solve(const ProblemInstance& prob, const MgritConfig& cfg) {
    auto prob_ptr = std::make_shared<const ProblemInstance>(prob);
    MgritState st(prob_ptr, cfg);
    st.initialize(cfg.w0);
    return mgrit_run(st, cfg);
}

/// Iteration loop on a prepared state; exposed so tests can adjust the
/// hierarchy (for example an ideal coarse operator) before solving.
inline ConvergenceReport mgrit_run(MgritState& st, const MgritConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const ProblemInstance& prob = st.problem();

    ConvergenceReport rep;
    rep.problem_kind = to_string(prob.kind);
    rep.n = prob.A.n;
    rep.d = prob.A.d;
    rep.lambda = prob.lambda;
    rep.seed = prob.seed;
    rep.m = st.m();
    rep.levels = st.num_levels();
    rep.nt = st.nt_requested();
    rep.nt_padded = st.nt_padded();
    rep.tol = cfg.tol;
    rep.max_iter = cfg.max_iter;
    rep.variant = to_string(st.variant());
    rep.threads = st.threads();
    rep.fine_step = st.fine_step();

    if (cfg.collect_figure_data) {
        const Eigen::Index m = st.m();
        for (Eigen::Index i = 0; i < st.level(0).points; i += m)
            rep.figure.cpoint_time_indices.push_back(i);
    }

    const double r0 = compute_residual(st, 0);
    rep.residual_norms.push_back(r0);
    rep.gradient_norms.push_back(
        generalized_gradient(prob, st.fine_step(), st.fine_u().back()).norm());
    if (cfg.reference) rep.error_norms.push_back(detail::reference_error_norm(st, *cfg.reference));
    if (cfg.collect_figure_data) detail::collect_figure_row(st, rep.figure);
    if (cfg.observer) cfg.observer(0, st);

    const double r_target = cfg.tol * r0;
    rep.halted = HaltReason::MaxIter;
    if (!cfg.halt_on_gradient && r0 <= 0.0) {
        rep.halted = HaltReason::Converged;
        rep.iterations = 0;
    } else {
        for (int k = 1; k <= cfg.max_iter; ++k) {
            const auto it0 = std::chrono::steady_clock::now();
            vcycle(st, 0);
            const double rk = compute_residual(st, 0);
            const double gk =
                generalized_gradient(prob, st.fine_step(), st.fine_u().back()).norm();
            rep.residual_norms.push_back(rk);
            rep.gradient_norms.push_back(gk);
            if (cfg.reference)
                rep.error_norms.push_back(detail::reference_error_norm(st, *cfg.reference));
            if (cfg.collect_figure_data) detail::collect_figure_row(st, rep.figure);
            rep.iteration_seconds.push_back(
                std::chrono::duration<double>(std::chrono::steady_clock::now() - it0).count());
            rep.iterations = k;
            if (cfg.observer) cfg.observer(k, st);

            if (cfg.halt_on_gradient) {
                if (gk <= cfg.gradient_target_abs) {
                    rep.halted = HaltReason::Converged;
                    break;
                }
                if (rk <= r_target) {
                    rep.halted = HaltReason::Stalled;
                    break;
                }
            } else if (rk <= r_target) {
                rep.halted = HaltReason::Converged;
                break;
            }
        }
    }

    if (cfg.collect_figure_data) rep.figure.final_residual_blocks = st.level(0).r;
    rep.rho_r = empirical_contraction(rep.residual_norms);
    if (!rep.error_norms.empty()) rep.rho_e = empirical_contraction(rep.error_norms);
    rep.final_point = st.fine_u().back();
    rep.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

struct GrowthPolicy {
    bool use_rate_estimate = true; ///< size the next window from the observed contraction
    double factor = 2.0;           ///< fallback growth when no estimate is available
    double slack = 1.1;            ///< safety margin on the estimated remaining steps
    int max_windows = 32;
    Eigen::Index max_horizon = Eigen::Index(1) << 30;
};

struct AdaptiveReport {
    std::vector<ConvergenceReport> windows;
    std::vector<Eigen::Index> window_steps; ///< padded steps actually solved per window
    Eigen::Index total_steps = 0;
    double target_gradient = 0.0;
    double achieved_gradient = 0.0;
    HaltReason halted = HaltReason::Stalled;
    Vec final_point;
};

/// Adaptive-horizon driver: solves a window of the all-at-once system with
/// gradient-based halting, and while the endpoint gradient stalls short of
/// the target, opens a new window seeded with the final state. The next
/// window length comes from the contraction rate observed in the last window
/// (or a fixed growth factor).
inline AdaptiveReport adaptive_horizon_solve(const ProblemInstance& prob, MgritConfig cfg,
                                             Eigen::Index initial_horizon_guess,
                                             GrowthPolicy growth = {}) {
    if (initial_horizon_guess < 1)
        throw std::invalid_argument("adaptive_horizon_solve: horizon guess must be positive");
    AdaptiveReport rep;
    const double s = cfg.step > 0.0 ? cfg.step : 1.0 / prob.L;
    Vec w0 = cfg.w0 ? *cfg.w0 : initial_point(prob);
    const double g0 = generalized_gradient(prob, s, w0).norm();
    rep.target_gradient = cfg.tol * g0;

    Eigen::Index span = 1;
    for (int l = 1; l < cfg.levels; ++l) span *= cfg.m;
    Eigen::Index horizon = std::max(initial_horizon_guess, span);

    for (int win = 0; win < growth.max_windows; ++win) {
        MgritConfig wcfg = cfg;
        wcfg.nt = horizon;
        wcfg.halt_on_gradient = true;
        wcfg.gradient_target_abs = rep.target_gradient;
        wcfg.w0 = &w0;
        const double g_start = generalized_gradient(prob, s, w0).norm();
        ConvergenceReport wrep = mgrit_solve(prob, wcfg);
        rep.window_steps.push_back(wrep.nt_padded);
        rep.total_steps += wrep.nt_padded;
        rep.achieved_gradient = wrep.gradient_norms.back();
        rep.final_point = wrep.final_point;
        w0 = wrep.final_point;
        const HaltReason halted = wrep.halted;
        rep.windows.push_back(std::move(wrep));
        if (halted == HaltReason::Converged) {
            rep.halted = HaltReason::Converged;
            return rep;
        }
        if (halted == HaltReason::MaxIter) {
            rep.halted = HaltReason::MaxIter;
            return rep;
        }

        const double g_end = rep.achieved_gradient;
        Eigen::Index next = static_cast<Eigen::Index>(
            std::ceil(growth.factor * static_cast<double>(horizon)));
        if (growth.use_rate_estimate && g_end > rep.target_gradient && g_end < g_start) {
            const double rho_step =
                std::pow(g_end / g_start, 1.0 / static_cast<double>(rep.window_steps.back()));
            if (rho_step > 0.0 && rho_step < 1.0) {
                const double needed =
                    std::log(rep.target_gradient / g_end) / std::log(rho_step);
                if (std::isfinite(needed) && needed > 0.0)
                    next = static_cast<Eigen::Index>(std::ceil(growth.slack * needed));
            }
        }
        horizon = std::clamp<Eigen::Index>(next, span, growth.max_horizon);
        if (next > growth.max_horizon) {
            rep.halted = HaltReason::Stalled;
            return rep;
        }
    }
    rep.halted = HaltReason::Stalled;
    return rep;
}

} // namespace mgritopt
