#pragma once

#include "ngmvlvm/data.hpp"
#include "ngmvlvm/optim.hpp"
#include "ngmvlvm/params.hpp"
#include "ngmvlvm/rff.hpp"

#include <Eigen/Dense>

#include <stdexcept>

namespace ngmvlvm {

/// Raised when a numerical step (factorization, non-finite objective) fails.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// All driving noise for one ELBO evaluation: per MC draw one latent noise
/// matrix and one spectral noise set per view. Holding the noise fixed makes
/// the estimate a smooth, finitely-differentiable function of the parameters.
struct ElboNoise {
    std::vector<Eigen::MatrixXd> x_eps;                // per draw: N x D
    std::vector<std::vector<SpectralNoise>> spectral;  // per draw, per view

    Eigen::Index draws() const { return static_cast<Eigen::Index>(x_eps.size()); }
};

/// Deterministic noise for (seed, iter): latent and per-view spectral noise
/// come from independent substreams, so parallel sampling across views
/// reproduces the serial result.
ElboNoise make_elbo_noise(const Dims& dims, Eigen::Index mc_samples, std::uint64_t seed,
                          std::uint64_t iter);

/// log N(y | 0, Phi Phi' + sigma_sq I) in O(N R^2) through the determinant
/// lemma and the Woodbury identity:
///   log|Phi Phi' + s I| = (N - R) log s + log|B|,   B = s I_R + Phi'Phi
///   y' (Phi Phi' + s I)^-1 y = (y'y - c' B^-1 c) / s,  c = Phi'y
/// A jitter of 1e-10 * sigma_sq is added to B's diagonal before factorization.
double lowrank_gaussian_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& phi,
                               double sigma_sq);

/// Closed-form KL(q(X) || N(0, I)) for the diagonal Gaussian posterior:
/// 1/2 sum_n [tr(S_n) + mu_n'mu_n - log|S_n| - D]. Nonnegative; zero iff
/// mu = 0 and s = 1 everywhere.
double kl_to_standard_normal(const VariationalParams& vp);

/// Monte Carlo ELBO: average over the noise draws of the per-view
/// reconstruction log-likelihoods minus the closed-form KL. Columns with a
/// missing mask contribute their likelihood restricted to observed rows.
double elbo_estimate(const ModelParams& params, const MultiViewDataset& data,
                     const ElboNoise& noise);

struct ElboValueGrad {
    double value = 0.0;
    Eigen::VectorXd grad;  // w.r.t. unconstrained coordinates (ParamLayout order)
};

/// ELBO and its exact gradient w.r.t. every unconstrained coordinate, under
/// the same fixed noise as elbo_estimate. Matrix gradients are hand-derived
/// through the Woodbury factorization and the reparameterized samples.
ElboValueGrad elbo_with_gradient(const ModelParams& params, const MultiViewDataset& data,
                                 const ElboNoise& noise);

Eigen::VectorXd elbo_gradient(const ModelParams& params, const MultiViewDataset& data,
                              const ElboNoise& noise);

}  // namespace ngmvlvm
