#pragma once

#include "ngmvlvm/kernels.hpp"
#include "ngmvlvm/rng.hpp"

#include <Eigen/Dense>

#include <vector>

namespace ngmvlvm {

/// Standard-normal driving noise for one spectral draw: per component q two
/// (L/2) x D matrices, one per step of the reparameterization.
struct SpectralNoise {
    std::vector<Eigen::MatrixXd> eps1;
    std::vector<Eigen::MatrixXd> eps2;
};

/// A draw of L/2 correlated frequency pairs per mixture component, together
/// with the noise that generated it. Regenerating from the stored noise under
/// the same parameters reproduces w1/w2 exactly, which is what makes the draw
/// differentiable w.r.t. the parameters.
struct SpectralSample {
    std::vector<Eigen::MatrixXd> w1;  // per q: (L/2) x D
    std::vector<Eigen::MatrixXd> w2;
    SpectralNoise noise;

    Eigen::Index components() const { return static_cast<Eigen::Index>(w1.size()); }
    Eigen::Index half_l() const { return w1.empty() ? 0 : w1.front().rows(); }
    Eigen::Index dim() const { return w1.empty() ? 0 : w1.front().cols(); }
};

SpectralNoise draw_spectral_noise(Eigen::Index q, Eigen::Index l, Eigen::Index d,
                                  RngStream& rng);

/// Two-step reparameterized draw from the mixture's bivariate Gaussians:
///   w1 = mu1 + sigma1 .* eps1
///   w2 = mu2 + rho (sigma2 ./ sigma1) .* (w1 - mu1) + sqrt(1 - rho^2) sigma2 .* eps2
/// Costs O(D) per pair; no 2D x 2D Cholesky is formed.
SpectralSample sample_spectral_points(const SpectralMixtureParams& params, Eigen::Index l,
                                      const SpectralNoise& noise);
SpectralSample sample_spectral_points(const SpectralMixtureParams& params, Eigen::Index l,
                                      RngStream& rng);

/// Per-component feature map, length L = 2 * rows(w1):
///   phi(x) = sqrt(1/(2L)) [cos(W1 x) + cos(W2 x); sin(W1 x) + sin(W2 x)].
Eigen::VectorXd feature_map(const Eigen::VectorXd& x, const Eigen::MatrixXd& w1,
                            const Eigen::MatrixXd& w2);

/// Stacked map [sqrt(alpha_1) phi_1; ...; sqrt(alpha_Q) phi_Q] of length Q*L.
Eigen::VectorXd stacked_feature_map(const Eigen::VectorXd& x, const SpectralSample& sample,
                                    const SpectralMixtureParams& params);

/// Row n = stacked_feature_map(x_n); the Gram approximation is Phi Phi'.
Eigen::MatrixXd feature_matrix(const Eigen::MatrixXd& x, const SpectralSample& sample,
                               const SpectralMixtureParams& params);

/// Feature matrix plus the per-component cos/sin tables needed to pull
/// gradients back through it.
struct FeatureCache {
    Eigen::MatrixXd phi;                // N x (Q*L)
    std::vector<Eigen::MatrixXd> cos1;  // per q: N x (L/2)
    std::vector<Eigen::MatrixXd> sin1;
    std::vector<Eigen::MatrixXd> cos2;
    std::vector<Eigen::MatrixXd> sin2;
};

FeatureCache feature_matrix_cached(const Eigen::MatrixXd& x, const SpectralSample& sample,
                                   const SpectralMixtureParams& params);

/// Gradient of a scalar w.r.t. one view's kernel hyperparameters.
struct SpectralParamGrad {
    Eigen::VectorXd alpha;
    Eigen::MatrixXd mu1, mu2, sigma1_sq, sigma2_sq;
    Eigen::VectorXd rho;

    static SpectralParamGrad zero(Eigen::Index q, Eigen::Index d);
};

/// Pulls dL/dPhi back through the cached feature map: accumulates into the
/// kernel-parameter gradient and, when x_bar is non-null, into dL/dX.
/// The path through the stored noise treats w1, w2 as the smooth functions of
/// (mu, sigma, rho) given by the two-step reparameterization.
void backprop_features(const Eigen::MatrixXd& x, const SpectralSample& sample,
                       const SpectralMixtureParams& params, const FeatureCache& cache,
                       const Eigen::MatrixXd& phi_bar, SpectralParamGrad& grad,
                       Eigen::MatrixXd* x_bar);

/// Gradient of phi(x1)' phi(x2) w.r.t. the kernel hyperparameters under the
/// fixed noise stored in `sample`.
SpectralParamGrad feature_product_gradient(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                                           const SpectralMixtureParams& params,
                                           const SpectralSample& sample);

/// Concentration bound on the Gram approximation error:
///   P(||K_hat - K||_2 >= eps) <= n exp(-3 eps^2 l / (2 n C (6 k_norm + 3 n C sqrt(q) + 8 eps)))
/// with C = sqrt(sum alpha_q^2). The value may exceed 1; callers clamp when
/// interpreting it as a probability.
double error_bound(Eigen::Index n, Eigen::Index l, Eigen::Index q,
                   const Eigen::VectorXd& alphas, double k_norm, double eps);

/// Inverse of error_bound in eps: the error level at which the bound equals
/// `level` (bisection; bound is strictly decreasing in eps).
double error_eps_at(double level, Eigen::Index n, Eigen::Index l, Eigen::Index q,
                    const Eigen::VectorXd& alphas, double k_norm);

}  // namespace ngmvlvm
