#pragma once

#include "ngmvlvm/data.hpp"
#include "ngmvlvm/elbo.hpp"
#include "ngmvlvm/optim.hpp"
#include "ngmvlvm/params.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ngmvlvm {

struct TrainConfig {
    Eigen::Index q = 2;              // mixture components
    Eigen::Index l = 100;            // per-component feature dimension (L/2 = 50 pairs)
    Eigen::Index d = 2;              // latent dimension
    Eigen::Index mc_samples = 1;     // MC draws per ELBO evaluation
    long max_iters = 10000;
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double adam_eps = 1e-8;
    double conv_tol = 1e-4;          // relative moving-average tolerance; <= 0 disables
    Eigen::Index conv_window = 100;
    Eigen::Index n_feature_draws = 64;  // feature draws for reconstruct/impute
    std::uint64_t seed = 0;

    void validate() const;
};

/// A (possibly trained) model: constrained parameters, the configuration and
/// standardization statistics needed to reproduce any evaluation, and the
/// ELBO trace.
struct ModelState {
    ModelParams params;
    TrainConfig config;
    StandardizationStats stats;
    std::vector<double> elbo_history;
    bool trained = false;
};

/// Supplies the ELBO noise for one training iteration; the default draws
/// make_elbo_noise(dims, mc_samples, seed, iter). Exposed so tests can apply
/// permutation-consistent noise.
using NoiseProvider = std::function<ElboNoise(std::uint64_t iter)>;

/// Builds the initial state: views standardized per dimension, variational
/// means warm-started from the top-D principal components (unit variance per
/// latent column), s = 0.01, alpha = 1/Q, frequency means ~ N(0, 0.5^2),
/// unit frequency variances, rho = 0, sigma_sq = 0.1 * view variance.
ModelState init_model(const MultiViewDataset& raw, const TrainConfig& config);

/// Full-batch training: per iteration draw fresh noise, evaluate the ELBO and
/// its gradient, and take one Adam ascent step. Stops at max_iters or when
/// the conv_window-iteration moving average of the ELBO improves by less than
/// conv_tol relative between consecutive disjoint windows.
ModelState train(const MultiViewDataset& raw, const TrainConfig& config,
                 const NoiseProvider& noise_provider = {});

/// The unified latent representation: the stack of variational means (N x D).
Eigen::MatrixXd latent_mean(const ModelState& model);

/// Posterior-mean reconstruction of every view at the latent means, averaged
/// over feature draws: Yhat_col = Phi (sigma_sq I + Phi'Phi)^-1 Phi' y_col in
/// standardized coordinates, then mapped back to data scale.
/// n_feature_draws = 0 uses the model's configured default.
std::vector<Eigen::MatrixXd> reconstruct(const ModelState& model, const MultiViewDataset& raw,
                                         Eigen::Index n_feature_draws = 0);

/// Fills missing entries: per column, yhat_miss = Phi_miss (sigma_sq I +
/// Phi_obs'Phi_obs)^-1 Phi_obs' y_obs averaged over feature draws. Observed
/// entries pass through unchanged. Errors on a fully-missing column.
std::vector<Eigen::MatrixXd> impute(const ModelState& model, const MultiViewDataset& raw,
                                    Eigen::Index n_feature_draws = 0);

nlohmann::json model_to_json(const ModelState& model);
ModelState model_from_json(const nlohmann::json& j);
void save_model(const std::string& path, const ModelState& model);
ModelState load_model(const std::string& path);

}  // namespace ngmvlvm
