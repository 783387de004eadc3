#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace mgritopt {

using Vec = Eigen::VectorXd;

/// Discrete negative Laplacian with homogeneous Dirichlet boundaries on a
/// uniform grid with n interior points per dimension.
///
/// d=1: tridiagonal stencil (-1, 2, -1)/h^2.
/// d=2: five-point stencil, diagonal 4/h^2, unknowns ordered row-major with
/// the x index fastest, so the matrix is block tridiagonal with
/// T = tridiag(-1, 4, -1)/h^2 on the diagonal and -I/h^2 couplings.
struct LaplacianOperator {
    int d = 1;
    Eigen::Index n = 0;
    double h = 1.0;

    Eigen::Index size() const { return d == 2 ? n * n : n; }
};

inline LaplacianOperator build_laplacian(int d, Eigen::Index n, double h) {
    if (d != 1 && d != 2) throw std::invalid_argument("laplacian: d must be 1 or 2");
    if (n < 1) throw std::invalid_argument("laplacian: n must be positive");
    if (!(h > 0.0)) throw std::invalid_argument("laplacian: h must be positive");
    return LaplacianOperator{d, n, h};
}

/// Matrix-free stencil application y = A u.
inline Vec apply(const LaplacianOperator& A, const Vec& u) {
    const double w = 1.0 / (A.h * A.h);
    Vec y(A.size());
    if (A.d == 1) {
        const Eigen::Index n = A.n;
        for (Eigen::Index i = 0; i < n; ++i) {
            double v = 2.0 * u[i];
            if (i > 0) v -= u[i - 1];
            if (i + 1 < n) v -= u[i + 1];
            y[i] = w * v;
        }
    } else {
        const Eigen::Index n = A.n;
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const Eigen::Index q = j * n + i;
                double v = 4.0 * u[q];
                if (i > 0) v -= u[q - 1];
                if (i + 1 < n) v -= u[q + 1];
                if (j > 0) v -= u[q - n];
                if (j + 1 < n) v -= u[q + n];
                y[q] = w * v;
            }
        }
    }
    return y;
}

/// Largest eigenvalue of A in closed form:
/// d=1: (4/h^2) sin^2(n pi / (2(n+1))), d=2 doubles it.
inline double spectral_norm(const LaplacianOperator& A) {
    const double s = std::sin(static_cast<double>(A.n) * std::numbers::pi /
                              (2.0 * static_cast<double>(A.n + 1)));
    const double lam1d = 4.0 / (A.h * A.h) * s * s;
    return A.d == 2 ? 2.0 * lam1d : lam1d;
}

/// Factorization of the shifted operator I + sigma*A for implicit steps.
///
/// d=1 stores an LDL^T decomposition of the SPD tridiagonal matrix; d=2 holds
/// a sparse simplicial LDL^T. Both solve paths are deterministic and safe to
/// call concurrently once factored.
class ShiftedFactorization {
public:
    ShiftedFactorization(const LaplacianOperator& A, double sigma) : A_(A), sigma_(sigma) {
        if (!(sigma > 0.0)) throw std::invalid_argument("factor_shifted: sigma must be positive");
        const double w = sigma / (A.h * A.h);
        if (A.d == 1) {
            const Eigen::Index n = A.n;
            diag_.resize(n);
            sub_.resize(n);
            const double c = 1.0 + 2.0 * w;
            const double e = -w;
            diag_[0] = c;
            sub_[0] = 0.0;
            for (Eigen::Index i = 1; i < n; ++i) {
                sub_[i] = e / diag_[i - 1];
                diag_[i] = c - sub_[i] * e;
            }
        } else {
            const Eigen::Index n = A.n;
            const Eigen::Index N = n * n;
            std::vector<Eigen::Triplet<double>> trip;
            trip.reserve(static_cast<std::size_t>(5 * N));
            for (Eigen::Index j = 0; j < n; ++j) {
                for (Eigen::Index i = 0; i < n; ++i) {
                    const Eigen::Index q = j * n + i;
                    trip.emplace_back(q, q, 1.0 + 4.0 * w);
                    if (i > 0) trip.emplace_back(q, q - 1, -w);
                    if (i + 1 < n) trip.emplace_back(q, q + 1, -w);
                    if (j > 0) trip.emplace_back(q, q - n, -w);
                    if (j + 1 < n) trip.emplace_back(q, q + n, -w);
                }
            }
            Eigen::SparseMatrix<double> M(N, N);
            M.setFromTriplets(trip.begin(), trip.end());
            ldlt_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
            ldlt_->compute(M);
            if (ldlt_->info() != Eigen::Success)
                throw std::runtime_error("factor_shifted: sparse factorization failed");
        }
    }

    const LaplacianOperator& op() const { return A_; }
    double sigma() const { return sigma_; }

    Vec solve(const Vec& rhs) const {
        if (A_.d == 1) {
            const Eigen::Index n = A_.n;
            Vec x(n);
            x[0] = rhs[0];
            for (Eigen::Index i = 1; i < n; ++i) x[i] = rhs[i] - sub_[i] * x[i - 1];
            x[n - 1] /= diag_[n - 1];
            for (Eigen::Index i = n - 2; i >= 0; --i) x[i] = x[i] / diag_[i] - sub_[i + 1] * x[i + 1];
            return x;
        }
        return ldlt_->solve(rhs);
    }

private:
    LaplacianOperator A_;
    double sigma_ = 0.0;
    Eigen::ArrayXd diag_;
    Eigen::ArrayXd sub_;
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

inline std::shared_ptr<const ShiftedFactorization> factor_shifted(const LaplacianOperator& A,
                                                                  double sigma) {
    return std::make_shared<const ShiftedFactorization>(A, sigma);
}

inline Vec solve_shifted(const ShiftedFactorization& F, const Vec& rhs) { return F.solve(rhs); }

} // namespace mgritopt
