#pragma once

#include <memory>
#include <stdexcept>
#include <utility>

#include "problems.hpp"

namespace mgritopt {

enum class PropagatorKind { GradientDescent, ProximalPoint, ProximalGradient, AlternatingProximal };

inline std::string to_string(PropagatorKind k) {
    switch (k) {
        case PropagatorKind::GradientDescent: return "gradient-descent";
        case PropagatorKind::ProximalPoint: return "proximal-point";
        case PropagatorKind::ProximalGradient: return "proximal-gradient";
        case PropagatorKind::AlternatingProximal: return "alternating-proximal";
    }
    throw std::invalid_argument("unknown propagator kind");
}

/// Proximal map of tau * ||max(-u, 0)||_1, applied entrywise:
/// u_i + tau where u_i + tau < 0, u_i where u_i > 0, and 0 in between.
inline Vec prox_penalty(const Vec& u, double tau) {
    Vec z(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double v = u[i];
        if (v > 0.0)
            z[i] = v;
        else if (v + tau < 0.0)
            z[i] = v + tau;
        else
            z[i] = 0.0;
    }
    return z;
}

/// One optimizer step Phi for a problem instance, with the linear term folded
/// in so the all-at-once forcing is zero away from the initial condition.
///
/// Explicit kinds step with u - s (A u - c); implicit kinds solve
/// (I + s A) v = u + s c. The penalty prox uses weight tau = s * lambda, and
/// `repeat` applies the map that many times (ideal coarse operator Phi^m).
class Propagator {
public:
    Propagator() = default;

    Propagator(PropagatorKind kind, std::shared_ptr<const ProblemInstance> prob, double step,
               int repeat = 1)
        : kind_(kind), prob_(std::move(prob)), s_(step), repeat_(repeat) {
        if (!prob_) throw std::invalid_argument("propagator: null problem");
        if (repeat_ < 1) throw std::invalid_argument("propagator: repeat must be positive");
        const bool explicit_kind =
            kind_ == PropagatorKind::GradientDescent || kind_ == PropagatorKind::ProximalGradient;
        if (explicit_kind) {
            if (!(s_ > 0.0 && s_ < 2.0 / prob_->L))
                throw std::invalid_argument("propagator: step outside stability range (0, 2/L)");
        } else {
            if (!(s_ > 0.0)) throw std::invalid_argument("propagator: step must be positive");
            fact_ = factor_shifted(prob_->A, s_);
        }
    }

    PropagatorKind kind() const { return kind_; }
    double step() const { return s_; }
    int repeat() const { return repeat_; }
    double prox_weight() const { return s_ * prob_->lambda; }
    const ProblemInstance& problem() const { return *prob_; }

    Vec apply(const Vec& u) const {
        Vec v = step_once(u);
        for (int r = 1; r < repeat_; ++r) v = step_once(v);
        return v;
    }

    /// Homogeneous part of the step, used to propagate errors in the linear
    /// coarse-grid correction. Only defined for smooth problems.
    Vec apply_linear(const Vec& u) const {
        if (prob_->lambda != 0.0)
            throw std::logic_error("propagator: linear application requires lambda == 0");
        Vec v = step_once_linear(u);
        for (int r = 1; r < repeat_; ++r) v = step_once_linear(v);
        return v;
    }

private:
    Vec step_once(const Vec& u) const {
        switch (kind_) {
            case PropagatorKind::GradientDescent: {
                const Vec Au = mgritopt::apply(prob_->A, u);
                return u - s_ * (Au - prob_->c);
            }
            case PropagatorKind::ProximalPoint:
                return fact_->solve(u + s_ * prob_->c);
            case PropagatorKind::ProximalGradient: {
                const Vec Au = mgritopt::apply(prob_->A, u);
                return prox_penalty(u - s_ * (Au - prob_->c), s_ * prob_->lambda);
            }
            case PropagatorKind::AlternatingProximal:
                return prox_penalty(fact_->solve(u + s_ * prob_->c), s_ * prob_->lambda);
        }
        throw std::logic_error("unknown propagator kind");
    }

    Vec step_once_linear(const Vec& u) const {
        switch (kind_) {
            case PropagatorKind::GradientDescent:
            case PropagatorKind::ProximalGradient: {
                const Vec Au = mgritopt::apply(prob_->A, u);
                return u - s_ * Au;
            }
            case PropagatorKind::ProximalPoint:
            case PropagatorKind::AlternatingProximal:
                return fact_->solve(u);
        }
        throw std::logic_error("unknown propagator kind");
    }

    PropagatorKind kind_ = PropagatorKind::GradientDescent;
    std::shared_ptr<const ProblemInstance> prob_;
    double s_ = 0.0;
    int repeat_ = 1;
    std::shared_ptr<const ShiftedFactorization> fact_;
};

inline Propagator make_propagator(PropagatorKind kind, std::shared_ptr<const ProblemInstance> prob,
                                  double step, int repeat = 1) {
    return Propagator(kind, std::move(prob), step, repeat);
}

/// Default fine step: explicit, matching the problem's smooth/nonsmooth split.
inline PropagatorKind fine_kind(const ProblemInstance& p) {
    return p.lambda > 0.0 ? PropagatorKind::ProximalGradient : PropagatorKind::GradientDescent;
}

/// Default coarse step: implicit (stable for any coarsening factor).
inline PropagatorKind coarse_kind(const ProblemInstance& p) {
    return p.lambda > 0.0 ? PropagatorKind::AlternatingProximal : PropagatorKind::ProximalPoint;
}

/// Applies phi m times.
inline Vec power_step(const Propagator& phi, int m, const Vec& u) {
    Vec v = u;
    for (int r = 0; r < m; ++r) v = phi.apply(v);
    return v;
}

/// Generalized gradient G_sF(u) = (u - P_sg(u - s grad f(u))) / s. Reduces to
/// the plain gradient A u - c when the penalty is absent.
inline Vec generalized_gradient(const ProblemInstance& p, double s, const Vec& u) {
    const Vec Au = apply(p.A, u);
    if (p.lambda == 0.0) return Au - p.c;
    const Vec z = prox_penalty(u - s * (Au - p.c), s * p.lambda);
    return (u - z) / s;
}

} // namespace mgritopt
