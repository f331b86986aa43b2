#include "ngmvlvm/params.hpp"

#include <stdexcept>

namespace ngmvlvm {

void VariationalParams::validate() const {
    if (mu.rows() != s.rows() || mu.cols() != s.cols())
        throw std::invalid_argument("variational params: mu and s shapes disagree");
    if (!(s.array() > 0.0).all())
        throw std::invalid_argument("variational params: variances must be positive");
}

void ModelParams::validate() const {
    if (kernel.empty()) throw std::invalid_argument("model params: no views");
    if (sigma_sq.size() != views())
        throw std::invalid_argument("model params: sigma_sq count != view count");
    if (!(sigma_sq.array() > 0.0).all())
        throw std::invalid_argument("model params: noise variances must be positive");
    const Eigen::Index d = kernel.front().dim();
    for (const auto& k : kernel) {
        k.validate();
        if (k.dim() != d)
            throw std::invalid_argument("model params: views disagree on latent dimension");
    }
    latent.validate();
    if (latent.dim() != d)
        throw std::invalid_argument("model params: latent dimension != kernel dimension");
}

void Dims::validate() const {
    if (n < 1 || d < 1 || v < 1 || q < 1)
        throw std::invalid_argument("dims: n, d, v, q must be >= 1");
    if (l < 2 || l % 2 != 0)
        throw std::invalid_argument("dims: feature dimension l must be even and >= 2");
}

Dims dims_of(const ModelParams& params, Eigen::Index l) {
    Dims dims;
    dims.n = params.latent.n();
    dims.d = params.latent.dim();
    dims.v = params.views();
    dims.q = params.kernel.front().components();
    dims.l = l;
    dims.validate();
    return dims;
}

}  // namespace ngmvlvm
