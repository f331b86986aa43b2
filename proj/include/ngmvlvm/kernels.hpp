#pragma once

#include <Eigen/Dense>

#include <variant>

namespace ngmvlvm {

/// Hyperparameters of one non-stationary spectral mixture kernel: a mixture of
/// Q correlated bivariate Gaussians over frequency pairs (w1, w2).
///
/// Per component q: weight alpha(q) > 0, frequency means mu1/mu2 rows of
/// length D, frequency variances sigma1_sq/sigma2_sq > 0, and the scalar
/// correlation rho(q) in [-1, 1] coupling w1 and w2.
struct SpectralMixtureParams {
    Eigen::VectorXd alpha;      // Q
    Eigen::MatrixXd mu1;        // Q x D
    Eigen::MatrixXd mu2;        // Q x D
    Eigen::MatrixXd sigma1_sq;  // Q x D
    Eigen::MatrixXd sigma2_sq;  // Q x D
    Eigen::VectorXd rho;        // Q

    Eigen::Index components() const { return alpha.size(); }
    Eigen::Index dim() const { return mu1.cols(); }

    /// Throws std::invalid_argument if shapes disagree or invariants fail.
    void validate() const;
};

struct RbfKernel {
    double outputscale = 1.0;
    double lengthscale = 1.0;
};

/// Non-stationary Gibbs kernel with input-dependent lengthscale
/// l(x) = scale * exp(-rate * ||x||).
struct GibbsKernel {
    double scale = 1.0;
    double rate = 0.5;
};

/// Stationary spectral mixture kernel
/// k(tau) = sum_q w_q exp(-1/2 tau' diag(sigma_sq_q) tau) cos(mu_q' tau).
struct SmKernel {
    Eigen::VectorXd weights;   // Q
    Eigen::MatrixXd mu;        // Q x D
    Eigen::MatrixXd sigma_sq;  // Q x D
};

/// Identity-covariance kernel: k(x1,x2) = 1 if x1 == x2 else 0. Test hook for
/// white-noise sampling; not part of the modeling surface.
struct WhiteKernel {};

using KernelSpec = std::variant<SpectralMixtureParams, RbfKernel, GibbsKernel, SmKernel, WhiteKernel>;

/// Exact closed-form evaluation of the non-stationary spectral mixture kernel,
/// (1/4) sum_q alpha_q [T1 + T2 + T3 + T4] with
///   T1 = exp(-1/2 (x1'S1x1 - 2 x1'Sc x2 + x2'S2x2)) cos(mu1'x1 - mu2'x2)
///   T2 = exp(-1/2 (x2'S1x2 - 2 x1'Sc x2 + x1'S2x1)) cos(mu1'x2 - mu2'x1)
///   T3 = exp(-1/2 tau'S1tau) cos(mu1'tau),   tau = x1 - x2
///   T4 = exp(-1/2 tau'S2tau) cos(mu2'tau)
/// where S1 = diag(sigma1_sq), S2 = diag(sigma2_sq),
/// Sc = rho diag(sigma1) diag(sigma2). Symmetric in (x1, x2) bit for bit.
double ngsm_kernel(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                   const SpectralMixtureParams& params);

/// Kernel matrix [K]_ij = ngsm_kernel(x_i, x_j) over the rows of X.
Eigen::MatrixXd ngsm_gram(const Eigen::MatrixXd& x, const SpectralMixtureParams& params);

/// Mixture spectral density sum_q alpha_q s_q(w1, w2), where s_q is the
/// symmetrized bivariate Gaussian (half mass at (w1,w2), half at (-w1,-w2)).
/// Weights are amplitudes, not normalized probabilities, so this is a density
/// only when sum alpha_q = 1. Requires |rho| < 1 (nondegenerate covariance).
double ngsm_spectral_density(const Eigen::VectorXd& w1, const Eigen::VectorXd& w2,
                             const SpectralMixtureParams& params);

/// Evaluates an RBF / Gibbs / stationary-SM / white reference kernel.
/// Passing a SpectralMixtureParams variant is an error; use ngsm_kernel.
double reference_kernel(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                        const KernelSpec& spec);

Eigen::MatrixXd reference_gram(const Eigen::MatrixXd& x, const KernelSpec& spec);

}  // namespace ngmvlvm
