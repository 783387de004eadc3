#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mgrit.hpp"

namespace mgritopt {

struct BoundCheck {
    int iteration = 0;
    Eigen::Index index = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0; ///< rhs - lhs, nonnegative up to roundoff when the bound holds
};

/// Perturbation bound on the generalized gradient:
/// ||G_s(v_i)|| <= L sqrt(2) ||v_i - u_i|| + ||G_s(u_i)||
/// checked at the sampled trajectory indices of one MGRIT iterate.
inline std::vector<BoundCheck> check_lemma_bound(const ProblemInstance& prob, double s,
                                                 const std::vector<Vec>& exact,
                                                 const std::vector<Vec>& approx,
                                                 const std::vector<Eigen::Index>& indices,
                                                 int iteration = 0) {
    if (exact.size() != approx.size() || exact.size() != indices.size())
        throw std::invalid_argument("check_lemma_bound: mismatched sample arrays");
    const double lip = prob.L * std::numbers::sqrt2;
    std::vector<BoundCheck> out;
    out.reserve(exact.size());
    for (std::size_t q = 0; q < exact.size(); ++q) {
        BoundCheck c;
        c.iteration = iteration;
        c.index = indices[q];
        c.lhs = generalized_gradient(prob, s, approx[q]).norm();
        c.rhs = lip * (approx[q] - exact[q]).norm() +
                generalized_gradient(prob, s, exact[q]).norm();
        c.slack = c.rhs - c.lhs;
        out.push_back(c);
    }
    return out;
}

/// Dense assembly of the Laplacian, for small-instance oracles only.
inline Eigen::MatrixXd dense_operator(const LaplacianOperator& A) {
    const Eigen::Index N = A.size();
    Eigen::MatrixXd M(N, N);
    Vec e = Vec::Zero(N);
    for (Eigen::Index j = 0; j < N; ++j) {
        e[j] = 1.0;
        M.col(j) = apply(A, e);
        e[j] = 0.0;
    }
    return M;
}

struct ResidualBoundResult {
    double inv_norm = 0.0; ///< ||A^{-1}||_2 of the dense all-at-once matrix
    std::vector<BoundCheck> checks;
    ConvergenceReport report;
};

/// Residual form of the bound (smooth problems):
/// ||G_s(v_i)|| <= L sqrt(2) ||A^{-1}|| ||r|| + ||G_s(u_i)||
/// verified at every point i and every iteration k of a small MGRIT run,
/// with ||A^{-1}|| from a dense SVD of the all-at-once matrix.
inline ResidualBoundResult check_residual_bound_dense(const ProblemInstance& prob,
                                                      MgritConfig cfg) {
    if (prob.lambda != 0.0)
        throw std::invalid_argument("check_residual_bound_dense: requires lambda == 0");
    const double s = cfg.step > 0.0 ? cfg.step : 1.0 / prob.L;
    const Eigen::Index N = prob.size();

    std::vector<std::vector<Vec>> snapshots;
    cfg.observer = [&](int, const MgritState& st) { snapshots.push_back(st.fine_u()); };
    ResidualBoundResult res;
    res.report = mgrit_solve(prob, cfg);

    const Eigen::Index pts = res.report.nt_padded + 1;
    if (pts * N > 4096)
        throw std::invalid_argument("check_residual_bound_dense: instance too large for dense SVD");

    // Exact trajectory over the padded horizon from the same initial condition.
    Vec w0 = initial_point(prob);
    SequentialResult seq = run_sequential(prob, fine_kind(prob), 0.0, res.report.nt_padded, &w0, 1, s);

    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(N, N) - s * dense_operator(prob.A);
    Eigen::MatrixXd Aall = Eigen::MatrixXd::Identity(pts * N, pts * N);
    for (Eigen::Index i = 1; i < pts; ++i)
        Aall.block(i * N, (i - 1) * N, N, N) = -M;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Aall);
    res.inv_norm = 1.0 / svd.singularValues().tail(1)(0);

    const double lip = prob.L * std::numbers::sqrt2;
    for (std::size_t k = 0; k < snapshots.size(); ++k) {
        const double rnorm = res.report.residual_norms[k];
        for (Eigen::Index i = 0; i < pts; ++i) {
            BoundCheck c;
            c.iteration = static_cast<int>(k);
            c.index = i;
            c.lhs = generalized_gradient(prob, s, snapshots[k][static_cast<std::size_t>(i)]).norm();
            c.rhs = lip * res.inv_norm * rnorm +
                    generalized_gradient(prob, s, seq.trajectory.point(i)).norm();
            c.slack = c.rhs - c.lhs;
            res.checks.push_back(c);
        }
    }
    return res;
}

struct EnvelopeCheck {
    double rho_r = 0.0;
    double coefficient = 0.0; ///< C fitted at k = 0
    double floor_value = 0.0;
    bool holds = false;
    double max_violation = 0.0; ///< max over k of ||G||_k - envelope(k)
};

/// Geometric envelope of the final-point gradient history (Remark 4.3 shape):
/// ||G||_k <= C rho_r^k + floor with rho_r fitted from the residual history
/// and C fixed by the k = 0 value.
inline EnvelopeCheck convergence_envelope(const std::vector<double>& residual_history,
                                          const std::vector<double>& gradient_history,
                                          double floor_value) {
    if (gradient_history.empty())
        throw std::invalid_argument("convergence_envelope: empty gradient history");
    EnvelopeCheck e;
    e.rho_r = empirical_contraction(residual_history);
    e.floor_value = floor_value;
    e.coefficient = std::max(gradient_history[0] - floor_value, 0.0);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < gradient_history.size(); ++k) {
        const double env =
            e.coefficient * std::pow(e.rho_r, static_cast<double>(k)) + floor_value;
        worst = std::max(worst, gradient_history[k] - env);
    }
    e.max_violation = worst;
    e.holds = worst <= 1e-10 * std::max(1.0, gradient_history[0]);
    return e;
}

enum class FigurePanel { ConvergenceHistory, ResidualPerCpoint, GradientPerCpoint, SpatialResidual };

struct FigureTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

/// Flattens the collected run diagnostics into one CSV-ready table per paper
/// figure panel. SpatialResidual reduces the final residual blocks over the
/// C-point axis to a per-coordinate profile.
inline FigureTable extract_figure_data(const ConvergenceReport& rep, FigurePanel panel,
                                       const ProblemInstance* prob = nullptr) {
    FigureTable t;
    switch (panel) {
        case FigurePanel::ConvergenceHistory: {
            t.header = {"iteration", "residual_norm", "gradient_norm"};
            for (std::size_t k = 0; k < rep.residual_norms.size(); ++k)
                t.rows.push_back({static_cast<double>(k), rep.residual_norms[k],
                                  rep.gradient_norms[k]});
            return t;
        }
        case FigurePanel::ResidualPerCpoint:
        case FigurePanel::GradientPerCpoint: {
            const auto& rows = panel == FigurePanel::ResidualPerCpoint
                                   ? rep.figure.residual_cpoint_norms
                                   : rep.figure.gradient_cpoint_norms;
            if (rows.empty())
                throw std::invalid_argument("extract_figure_data: run collected no figure data");
            t.header = {"iteration", "cpoint", "time_index", "norm"};
            for (std::size_t k = 0; k < rows.size(); ++k)
                for (std::size_t j = 0; j < rows[k].size(); ++j)
                    t.rows.push_back(
                        {static_cast<double>(k), static_cast<double>(j),
                         static_cast<double>(rep.figure.cpoint_time_indices[j]), rows[k][j]});
            return t;
        }
        case FigurePanel::SpatialResidual: {
            const auto& blocks = rep.figure.final_residual_blocks;
            if (blocks.empty())
                throw std::invalid_argument("extract_figure_data: run collected no figure data");
            if (!prob)
                throw std::invalid_argument("extract_figure_data: spatial panel needs the problem");
            const Eigen::Index N = prob->size();
            Vec prof = Vec::Zero(N);
            for (const Vec& b : blocks) prof.array() += b.array().square();
            prof = prof.array().sqrt();
            const double h = prob->A.h;
            if (prob->A.d == 1) {
                t.header = {"index", "x", "residual_norm"};
                for (Eigen::Index i = 0; i < N; ++i)
                    t.rows.push_back(
                        {static_cast<double>(i), static_cast<double>(i + 1) * h, prof[i]});
            } else {
                t.header = {"index", "x", "y", "residual_norm"};
                for (Eigen::Index j = 0; j < prob->A.n; ++j)
                    for (Eigen::Index i = 0; i < prob->A.n; ++i)
                        t.rows.push_back({static_cast<double>(j * prob->A.n + i),
                                          static_cast<double>(i + 1) * h,
                                          static_cast<double>(j + 1) * h,
                                          prof[j * prob->A.n + i]});
            }
            return t;
        }
    }
    throw std::invalid_argument("unknown figure panel");
}

} // namespace mgritopt
