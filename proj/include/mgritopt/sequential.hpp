#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "propagators.hpp"

namespace mgritopt {

/// Iterate storage for long sequential runs. Keeps every stride-th point and
/// recomputes the rest on demand by stepping forward from the nearest stored
/// checkpoint. With the default budget the stride doubles automatically so
/// the stored values never exceed about 2^28 doubles.
class TrajectoryStore {
public:
    TrajectoryStore() = default;

    TrajectoryStore(Propagator phi, Eigen::Index stride, std::uint64_t value_budget = (1ull << 28))
        : phi_(std::move(phi)), stride_(stride), budget_(value_budget) {
        if (stride_ < 0) throw std::invalid_argument("trajectory: stride must be nonnegative");
        auto_stride_ = stride_ == 0;
        if (auto_stride_) stride_ = 1;
    }

    void push(Eigen::Index index, const Vec& u) {
        n_t_ = index;
        if (index % stride_ == 0) {
            stored_.emplace_back(index, u);
            if (auto_stride_ && static_cast<std::uint64_t>(stored_.size()) *
                                        static_cast<std::uint64_t>(u.size()) >
                                    budget_)
                restride();
        }
    }

    void finalize(Eigen::Index n_t, const Vec& last) {
        n_t_ = n_t;
        if (stored_.empty() || stored_.back().first != n_t) stored_.emplace_back(n_t, last);
    }

    Eigen::Index stride() const { return stride_; }
    Eigen::Index n_t() const { return n_t_; }
    const std::vector<std::pair<Eigen::Index, Vec>>& stored() const { return stored_; }

    /// Iterate at a given index, recomputed from the preceding checkpoint if
    /// it was not stored.
    Vec point(Eigen::Index index) const {
        if (index < 0 || index > n_t_) throw std::out_of_range("trajectory: index out of range");
        auto it = std::upper_bound(stored_.begin(), stored_.end(), index,
                                   [](Eigen::Index v, const auto& e) { return v < e.first; });
        if (it == stored_.begin()) throw std::out_of_range("trajectory: no checkpoint before index");
        --it;
        Vec u = it->second;
        for (Eigen::Index i = it->first; i < index; ++i) u = phi_.apply(u);
        return u;
    }

private:
    void restride() {
        stride_ *= 2;
        std::vector<std::pair<Eigen::Index, Vec>> kept;
        kept.reserve(stored_.size() / 2 + 1);
        for (auto& e : stored_)
            if (e.first % stride_ == 0) kept.emplace_back(e.first, std::move(e.second));
        stored_ = std::move(kept);
    }

    Propagator phi_;
    Eigen::Index stride_ = 1;
    std::uint64_t budget_ = 1ull << 28;
    bool auto_stride_ = true;
    Eigen::Index n_t_ = 0;
    std::vector<std::pair<Eigen::Index, Vec>> stored_;
};

struct SequentialResult {
    PropagatorKind method = PropagatorKind::GradientDescent;
    double step = 0.0;
    Eigen::Index n_t = 0;
    bool converged = false;
    TrajectoryStore trajectory;
    std::vector<double> gradient_norms; ///< ||G_s(u_k)|| for k = 0..N_t
    Vec final_point;
    double seconds = 0.0;
};

/// Runs the sequential optimizer until the generalized gradient norm drops
/// by the relative tolerance, or for exactly max_iter steps when tol <= 0.
inline SequentialResult run_sequential(const ProblemInstance& prob, PropagatorKind method,
                                       double tol, long long max_iter, const Vec* u0 = nullptr,
                                       Eigen::Index stride = 0, double step = 0.0) {
    if (max_iter < 0) throw std::invalid_argument("run_sequential: max_iter must be nonnegative");
    const auto t0 = std::chrono::steady_clock::now();
    auto prob_ptr = std::make_shared<const ProblemInstance>(prob);
    const double s = step > 0.0 ? step : 1.0 / prob.L;
    Propagator phi(method, prob_ptr, s);

    SequentialResult res;
    res.method = method;
    res.step = s;
    res.trajectory = TrajectoryStore(phi, stride);

    Vec u = u0 ? *u0 : initial_point(prob);
    if (u.size() != prob.size()) throw std::invalid_argument("run_sequential: u0 has wrong size");
    res.trajectory.push(0, u);
    double g = generalized_gradient(prob, s, u).norm();
    res.gradient_norms.push_back(g);
    const double target = tol > 0.0 ? tol * g : -1.0;

    Eigen::Index k = 0;
    bool converged = tol > 0.0 && g <= target;
    while (!converged && k < max_iter) {
        u = phi.apply(u);
        ++k;
        res.trajectory.push(k, u);
        g = generalized_gradient(prob, s, u).norm();
        res.gradient_norms.push_back(g);
        if (tol > 0.0 && g <= target) converged = true;
    }
    res.n_t = k;
    res.converged = tol > 0.0 ? converged : true;
    res.final_point = u;
    res.trajectory.finalize(k, u);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

} // namespace mgritopt
