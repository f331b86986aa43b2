#pragma once

#include "ngmvlvm/params.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ngmvlvm {

/// Positivity bijection value = log(1 + exp(u)) with stable branches.
double softplus(double u);
double softplus_inv(double value);
double sigmoid(double u);

/// Correlation bijection onto (-1, 1): rho = 2 sigmoid(u) - 1.
double corr_from_unconstrained(double u);
double corr_to_unconstrained(double rho);

enum class Transform { identity, softplus, correlation };

/// Flat unconstrained coordinate vector over all trainable parameters, with a
/// segment registry naming each block and its bijection.
///
/// Layout, in order: per view [alpha(Q) | mu1(QxD) | mu2(QxD) | sigma1_sq(QxD)
/// | sigma2_sq(QxD) | rho(Q) | sigma_sq(1)], then latent mu (NxD) and latent
/// s (NxD). Matrices are flattened row-major.
class ParamLayout {
public:
    struct Segment {
        std::string name;
        Eigen::Index offset = 0;
        Eigen::Index size = 0;
        Transform transform = Transform::identity;
    };

    explicit ParamLayout(const Dims& dims);

    Eigen::Index size() const { return size_; }
    const Dims& dims() const { return dims_; }
    const std::vector<Segment>& segments() const { return segments_; }

    /// Name of one flat coordinate, e.g. "view1.rho[0]" (for diagnostics).
    std::string coord_name(Eigen::Index i) const;

    /// Constrained model -> unconstrained vector (inverse bijections).
    Eigen::VectorXd pack(const ModelParams& params) const;

    /// Unconstrained vector -> constrained model (forward bijections).
    ModelParams unpack(const Eigen::VectorXd& u) const;

    /// Chain rule: converts a gradient w.r.t. constrained parameters (flat,
    /// same layout) into the gradient w.r.t. unconstrained coordinates. The
    /// Jacobian factors are evaluated from the constrained values.
    Eigen::VectorXd to_unconstrained_grad(const ModelParams& constrained,
                                          const Eigen::VectorXd& grad_constrained) const;

    /// Flattens constrained parameters without any bijection (used to build
    /// gradient accumulators sharing the layout's offsets).
    Eigen::VectorXd flatten(const ModelParams& params) const;

    // Offsets of the blocks for one view / the shared latent (flat indices).
    struct ViewBlock {
        Eigen::Index alpha, mu1, mu2, sigma1_sq, sigma2_sq, rho, sigma_sq;
    };
    ViewBlock view_block(Eigen::Index view) const;
    Eigen::Index latent_mu_offset() const { return latent_mu_; }
    Eigen::Index latent_s_offset() const { return latent_s_; }

private:
    Dims dims_;
    Eigen::Index size_ = 0;
    std::vector<Segment> segments_;
    Eigen::Index latent_mu_ = 0;
    Eigen::Index latent_s_ = 0;
};

struct AdamConfig {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
};

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long t = 0;
    AdamConfig config;

    static AdamState init(Eigen::Index size, const AdamConfig& config);
};

/// One bias-corrected Adam descent step in place. `grad` is the gradient of
/// the loss being minimized; ascent callers negate their gradient first.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state);

}  // namespace ngmvlvm
