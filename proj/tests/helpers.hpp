#pragma once

#include "ngmvlvm/kernels.hpp"
#include "ngmvlvm/params.hpp"
#include "ngmvlvm/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace ngmvlvm::testing {

inline SpectralMixtureParams random_mixture(Eigen::Index q, Eigen::Index d, RngStream& rng,
                                            double rho_range = 0.9) {
    SpectralMixtureParams p;
    p.alpha = Eigen::VectorXd::NullaryExpr(q, [&](Eigen::Index) { return 0.3 + rng.uniform(); });
    p.mu1 = rng.normal_matrix(q, d);
    p.mu2 = rng.normal_matrix(q, d);
    p.sigma1_sq = Eigen::MatrixXd::NullaryExpr(
        q, d, [&](Eigen::Index, Eigen::Index) { return 0.2 + rng.uniform(); });
    p.sigma2_sq = Eigen::MatrixXd::NullaryExpr(
        q, d, [&](Eigen::Index, Eigen::Index) { return 0.2 + rng.uniform(); });
    p.rho = Eigen::VectorXd::NullaryExpr(
        q, [&](Eigen::Index) { return rho_range * (2.0 * rng.uniform() - 1.0); });
    return p;
}

/// Dense O(N^3) oracle for log N(y | 0, Phi Phi' + sigma_sq I).
inline double dense_gaussian_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& phi,
                                    double sigma_sq) {
    const Eigen::Index n = y.size();
    Eigen::MatrixXd cov = phi * phi.transpose();
    cov.diagonal().array() += sigma_sq;
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
    const double quad = y.dot(llt.solve(y));
    return -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

inline double min_eigenvalue(const Eigen::MatrixXd& sym) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly)
        .eigenvalues()
        .minCoeff();
}

inline double spectral_norm(const Eigen::MatrixXd& m) { return m.operatorNorm(); }

/// Welford-style running mean / standard error over a stream of values.
struct RunningStat {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double v) {
        ++n;
        const double delta = v - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (v - mean);
    }
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double stderr_mean() const { return std::sqrt(variance() / static_cast<double>(n)); }
};

}  // namespace ngmvlvm::testing
