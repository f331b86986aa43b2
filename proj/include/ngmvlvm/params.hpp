#pragma once

#include "ngmvlvm/kernels.hpp"

#include <Eigen/Dense>

#include <vector>

namespace ngmvlvm {

/// Diagonal Gaussian posterior over the latent coordinates: row n holds the
/// mean mu_n and the variance diagonal s_n (> 0) of point n.
struct VariationalParams {
    Eigen::MatrixXd mu;  // N x D
    Eigen::MatrixXd s;   // N x D, positive

    Eigen::Index n() const { return mu.rows(); }
    Eigen::Index dim() const { return mu.cols(); }
    void validate() const;
};

/// All trainable parameters in constrained coordinates: one spectral mixture
/// per view, one observation noise variance per view, and the shared
/// variational posterior.
struct ModelParams {
    std::vector<SpectralMixtureParams> kernel;  // per view
    Eigen::VectorXd sigma_sq;                   // per view, positive
    VariationalParams latent;

    Eigen::Index views() const { return static_cast<Eigen::Index>(kernel.size()); }
    void validate() const;
};

/// Problem dimensions shared across modules. `l` is the per-component feature
/// dimension (even); stacked feature maps have q*l entries.
struct Dims {
    Eigen::Index n = 0;
    Eigen::Index d = 0;
    Eigen::Index v = 0;
    Eigen::Index q = 0;
    Eigen::Index l = 0;

    Eigen::Index features() const { return q * l; }
    void validate() const;
};

Dims dims_of(const ModelParams& params, Eigen::Index l);

}  // namespace ngmvlvm
