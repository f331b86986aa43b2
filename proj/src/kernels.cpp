#include "ngmvlvm/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ngmvlvm {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void SpectralMixtureParams::validate() const {
    const Eigen::Index q = components();
    const Eigen::Index d = dim();
    require(q >= 1, "spectral mixture needs at least one component");
    require(d >= 1, "spectral mixture needs dimension >= 1");
    require(mu1.rows() == q && mu2.rows() == q && sigma1_sq.rows() == q &&
                sigma2_sq.rows() == q && rho.size() == q,
            "spectral mixture component counts disagree");
    require(mu2.cols() == d && sigma1_sq.cols() == d && sigma2_sq.cols() == d,
            "spectral mixture dimensions disagree");
    require((alpha.array() > 0.0).all(), "mixture weights must be positive");
    require((sigma1_sq.array() > 0.0).all() && (sigma2_sq.array() > 0.0).all(),
            "frequency variances must be positive");
    require((rho.array().abs() <= 1.0).all(), "correlation must lie in [-1, 1]");
}

double ngsm_kernel(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                   const SpectralMixtureParams& params) {
    const Eigen::Index d = params.dim();
    require(x1.size() == d && x2.size() == d, "ngsm_kernel: input dimension mismatch");

    const Eigen::ArrayXd a1 = x1.array();
    const Eigen::ArrayXd a2 = x2.array();
    const Eigen::ArrayXd tau = a1 - a2;

    double k = 0.0;
    for (Eigen::Index q = 0; q < params.components(); ++q) {
        const Eigen::ArrayXd s1 = params.sigma1_sq.row(q).transpose().array();
        const Eigen::ArrayXd s2 = params.sigma2_sq.row(q).transpose().array();
        const Eigen::ArrayXd m1 = params.mu1.row(q).transpose().array();
        const Eigen::ArrayXd m2 = params.mu2.row(q).transpose().array();
        const double rho = params.rho(q);

        // Sc = rho diag(sigma1) diag(sigma2); only the quadratic forms appear.
        // The product a1*a2 is formed first so the term is bitwise invariant
        // under swapping the inputs.
        const double cross = rho * ((s1 * s2).sqrt() * (a1 * a2)).sum();
        const double q11 = (a1 * s1 * a1).sum();
        const double q22 = (a2 * s2 * a2).sum();
        const double q21 = (a2 * s1 * a2).sum();
        const double q12 = (a1 * s2 * a1).sum();

        const double t1 = std::exp(-0.5 * (q11 - 2.0 * cross + q22)) *
                          std::cos((m1 * a1).sum() - (m2 * a2).sum());
        const double t2 = std::exp(-0.5 * (q21 - 2.0 * cross + q12)) *
                          std::cos((m1 * a2).sum() - (m2 * a1).sum());
        const double t3 = std::exp(-0.5 * (tau * s1 * tau).sum()) * std::cos((m1 * tau).sum());
        const double t4 = std::exp(-0.5 * (tau * s2 * tau).sum()) * std::cos((m2 * tau).sum());

        k += params.alpha(q) * 0.25 * ((t1 + t2) + (t3 + t4));
    }
    return k;
}

Eigen::MatrixXd ngsm_gram(const Eigen::MatrixXd& x, const SpectralMixtureParams& params) {
    const Eigen::Index n = x.rows();
    require(n >= 1, "ngsm_gram: need at least one row");
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = ngsm_kernel(x.row(i).transpose(), x.row(j).transpose(), params);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

namespace {

/// Log-density of a nondegenerate bivariate normal at (a, b).
double bvn_logpdf(double a, double b, double mean_a, double mean_b, double var_a,
                  double var_b, double rho) {
    const double det = var_a * var_b * (1.0 - rho * rho);
    const double da = a - mean_a;
    const double db = b - mean_b;
    const double quad =
        (da * da / var_a - 2.0 * rho * da * db / std::sqrt(var_a * var_b) + db * db / var_b) /
        (1.0 - rho * rho);
    return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * quad;
}

}  // namespace

double ngsm_spectral_density(const Eigen::VectorXd& w1, const Eigen::VectorXd& w2,
                             const SpectralMixtureParams& params) {
    const Eigen::Index d = params.dim();
    require(w1.size() == d && w2.size() == d, "ngsm_spectral_density: dimension mismatch");
    require((params.rho.array().abs() < 1.0).all(),
            "ngsm_spectral_density: |rho| = 1 is degenerate; density undefined");

    double p = 0.0;
    for (Eigen::Index q = 0; q < params.components(); ++q) {
        const double rho = params.rho(q);
        // The 2D x 2D covariance splits into independent (w1_d, w2_d) pairs.
        double logp_pos = 0.0;
        double logp_neg = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double m1 = params.mu1(q, j);
            const double m2 = params.mu2(q, j);
            const double v1 = params.sigma1_sq(q, j);
            const double v2 = params.sigma2_sq(q, j);
            logp_pos += bvn_logpdf(w1(j), w2(j), m1, m2, v1, v2, rho);
            logp_neg += bvn_logpdf(-w1(j), -w2(j), m1, m2, v1, v2, rho);
        }
        p += params.alpha(q) * 0.5 * (std::exp(logp_pos) + std::exp(logp_neg));
    }
    return p;
}

namespace {

double gibbs_lengthscale(const Eigen::VectorXd& x, const GibbsKernel& k) {
    return k.scale * std::exp(-k.rate * x.norm());
}

}  // namespace

double reference_kernel(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                        const KernelSpec& spec) {
    require(x1.size() == x2.size(), "reference_kernel: input dimension mismatch");
    return std::visit(
        [&](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, RbfKernel>) {
                require(k.outputscale > 0.0 && k.lengthscale > 0.0,
                        "rbf: scale parameters must be positive");
                const double sq = (x1 - x2).squaredNorm();
                return k.outputscale * std::exp(-sq / (2.0 * k.lengthscale * k.lengthscale));
            } else if constexpr (std::is_same_v<T, GibbsKernel>) {
                require(k.scale > 0.0, "gibbs: scale must be positive");
                const double l1 = gibbs_lengthscale(x1, k);
                const double l2 = gibbs_lengthscale(x2, k);
                const double denom = l1 * l1 + l2 * l2;
                // Prefactor power D/2: the power-1/2 form is the 1-D special
                // case and loses positive semi-definiteness for D > 1.
                const double d = static_cast<double>(x1.size());
                return std::pow(2.0 * l1 * l2 / denom, 0.5 * d) *
                       std::exp(-(x1 - x2).squaredNorm() / denom);
            } else if constexpr (std::is_same_v<T, SmKernel>) {
                require(k.weights.size() == k.mu.rows() && k.mu.rows() == k.sigma_sq.rows(),
                        "sm: component counts disagree");
                require((k.weights.array() > 0.0).all() && (k.sigma_sq.array() > 0.0).all(),
                        "sm: weights and variances must be positive");
                const Eigen::ArrayXd tau = (x1 - x2).array();
                double v = 0.0;
                for (Eigen::Index q = 0; q < k.weights.size(); ++q) {
                    const Eigen::ArrayXd s = k.sigma_sq.row(q).transpose().array();
                    const Eigen::ArrayXd m = k.mu.row(q).transpose().array();
                    v += k.weights(q) * std::exp(-0.5 * (tau * s * tau).sum()) *
                         std::cos((m * tau).sum());
                }
                return v;
            } else if constexpr (std::is_same_v<T, WhiteKernel>) {
                return x1 == x2 ? 1.0 : 0.0;
            } else {
                throw std::invalid_argument(
                    "reference_kernel: NGSM variant not supported here, use ngsm_kernel");
            }
        },
        spec);
}

Eigen::MatrixXd reference_gram(const Eigen::MatrixXd& x, const KernelSpec& spec) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = reference_kernel(x.row(i).transpose(), x.row(j).transpose(), spec);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

}  // namespace ngmvlvm
