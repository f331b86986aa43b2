#include "ngmvlvm/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ngmvlvm {

double softplus(double u) {
    if (!std::isfinite(u)) throw std::invalid_argument("softplus: non-finite input");
    if (u > 30.0) return u;
    if (u < -30.0) return std::exp(u);
    return std::log1p(std::exp(u));
}

double softplus_inv(double value) {
    if (!std::isfinite(value) || value <= 0.0)
        throw std::invalid_argument("softplus_inv: input must be finite and positive");
    if (value > 30.0) return value;
    return std::log(std::expm1(value));
}

double sigmoid(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

double corr_from_unconstrained(double u) {
    if (!std::isfinite(u)) throw std::invalid_argument("correlation transform: non-finite input");
    // 2 sigmoid(u) - 1, evaluated as tanh for full precision near +-1.
    return std::tanh(0.5 * u);
}

double corr_to_unconstrained(double rho) {
    if (!(rho > -1.0 && rho < 1.0))
        throw std::invalid_argument("correlation transform: rho must lie strictly in (-1, 1)");
    return 2.0 * std::atanh(rho);
}

namespace {

double apply_transform(Transform t, double u) {
    switch (t) {
        case Transform::identity: return u;
        case Transform::softplus: return softplus(u);
        case Transform::correlation: return corr_from_unconstrained(u);
    }
    throw std::logic_error("unknown transform");
}

double invert_transform(Transform t, double value) {
    switch (t) {
        case Transform::identity: return value;
        case Transform::softplus: return softplus_inv(value);
        case Transform::correlation: return corr_to_unconstrained(value);
    }
    throw std::logic_error("unknown transform");
}

/// d(constrained)/d(unconstrained) expressed through the constrained value.
/// softplus: sigmoid(u) = 1 - exp(-value); correlation: (1 - rho^2) / 2.
double transform_jacobian(Transform t, double value) {
    switch (t) {
        case Transform::identity: return 1.0;
        case Transform::softplus: return -std::expm1(-value);
        case Transform::correlation: return 0.5 * (1.0 - value * value);
    }
    throw std::logic_error("unknown transform");
}

void copy_rowmajor(const Eigen::MatrixXd& m, Eigen::VectorXd& out, Eigen::Index offset) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out(offset++) = m(i, j);
}

Eigen::MatrixXd read_rowmajor(const Eigen::VectorXd& u, Eigen::Index offset, Eigen::Index rows,
                              Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(offset++);
    return m;
}

}  // namespace

ParamLayout::ParamLayout(const Dims& dims) : dims_(dims) {
    dims_.validate();
    const Eigen::Index q = dims.q;
    const Eigen::Index d = dims.d;
    Eigen::Index off = 0;
    auto add = [&](std::string name, Eigen::Index size, Transform t) {
        segments_.push_back({std::move(name), off, size, t});
        off += size;
    };
    for (Eigen::Index v = 0; v < dims.v; ++v) {
        const std::string p = "view" + std::to_string(v) + ".";
        add(p + "alpha", q, Transform::softplus);
        add(p + "mu1", q * d, Transform::identity);
        add(p + "mu2", q * d, Transform::identity);
        add(p + "sigma1_sq", q * d, Transform::softplus);
        add(p + "sigma2_sq", q * d, Transform::softplus);
        add(p + "rho", q, Transform::correlation);
        add(p + "sigma_sq", 1, Transform::softplus);
    }
    latent_mu_ = off;
    add("latent.mu", dims.n * d, Transform::identity);
    latent_s_ = off;
    add("latent.s", dims.n * d, Transform::softplus);
    size_ = off;
}

std::string ParamLayout::coord_name(Eigen::Index i) const {
    for (const auto& seg : segments_) {
        if (i >= seg.offset && i < seg.offset + seg.size)
            return seg.name + "[" + std::to_string(i - seg.offset) + "]";
    }
    return "coord[" + std::to_string(i) + "]";
}

ParamLayout::ViewBlock ParamLayout::view_block(Eigen::Index view) const {
    const Eigen::Index per_view = 7;
    const auto& s = segments_;
    const Eigen::Index base = view * per_view;
    return ViewBlock{s[base + 0].offset, s[base + 1].offset, s[base + 2].offset,
                     s[base + 3].offset, s[base + 4].offset, s[base + 5].offset,
                     s[base + 6].offset};
}

Eigen::VectorXd ParamLayout::flatten(const ModelParams& params) const {
    Eigen::VectorXd out(size_);
    for (Eigen::Index v = 0; v < dims_.v; ++v) {
        const auto b = view_block(v);
        const auto& k = params.kernel[static_cast<std::size_t>(v)];
        out.segment(b.alpha, dims_.q) = k.alpha;
        copy_rowmajor(k.mu1, out, b.mu1);
        copy_rowmajor(k.mu2, out, b.mu2);
        copy_rowmajor(k.sigma1_sq, out, b.sigma1_sq);
        copy_rowmajor(k.sigma2_sq, out, b.sigma2_sq);
        out.segment(b.rho, dims_.q) = k.rho;
        out(b.sigma_sq) = params.sigma_sq(v);
    }
    copy_rowmajor(params.latent.mu, out, latent_mu_);
    copy_rowmajor(params.latent.s, out, latent_s_);
    return out;
}

Eigen::VectorXd ParamLayout::pack(const ModelParams& params) const {
    Eigen::VectorXd flat = flatten(params);
    for (const auto& seg : segments_)
        for (Eigen::Index i = 0; i < seg.size; ++i)
            flat(seg.offset + i) = invert_transform(seg.transform, flat(seg.offset + i));
    return flat;
}

ModelParams ParamLayout::unpack(const Eigen::VectorXd& u) const {
    if (u.size() != size_) throw std::invalid_argument("unpack: vector size mismatch");
    Eigen::VectorXd flat(u);
    for (const auto& seg : segments_)
        for (Eigen::Index i = 0; i < seg.size; ++i)
            flat(seg.offset + i) = apply_transform(seg.transform, flat(seg.offset + i));

    ModelParams params;
    params.kernel.resize(static_cast<std::size_t>(dims_.v));
    params.sigma_sq.resize(dims_.v);
    for (Eigen::Index v = 0; v < dims_.v; ++v) {
        const auto b = view_block(v);
        auto& k = params.kernel[static_cast<std::size_t>(v)];
        k.alpha = flat.segment(b.alpha, dims_.q);
        k.mu1 = read_rowmajor(flat, b.mu1, dims_.q, dims_.d);
        k.mu2 = read_rowmajor(flat, b.mu2, dims_.q, dims_.d);
        k.sigma1_sq = read_rowmajor(flat, b.sigma1_sq, dims_.q, dims_.d);
        k.sigma2_sq = read_rowmajor(flat, b.sigma2_sq, dims_.q, dims_.d);
        k.rho = flat.segment(b.rho, dims_.q);
        params.sigma_sq(v) = flat(b.sigma_sq);
    }
    params.latent.mu = read_rowmajor(flat, latent_mu_, dims_.n, dims_.d);
    params.latent.s = read_rowmajor(flat, latent_s_, dims_.n, dims_.d);
    return params;
}

Eigen::VectorXd ParamLayout::to_unconstrained_grad(const ModelParams& constrained,
                                                   const Eigen::VectorXd& grad_constrained) const {
    if (grad_constrained.size() != size_)
        throw std::invalid_argument("to_unconstrained_grad: gradient size mismatch");
    const Eigen::VectorXd values = flatten(constrained);
    Eigen::VectorXd g(grad_constrained);
    for (const auto& seg : segments_)
        for (Eigen::Index i = 0; i < seg.size; ++i)
            g(seg.offset + i) *= transform_jacobian(seg.transform, values(seg.offset + i));
    return g;
}

AdamState AdamState::init(Eigen::Index size, const AdamConfig& config) {
    AdamState s;
    s.m = Eigen::VectorXd::Zero(size);
    s.v = Eigen::VectorXd::Zero(size);
    s.t = 0;
    s.config = config;
    return s;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state) {
    if (params.size() != grad.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    const AdamConfig& c = state.config;
    state.t += 1;
    state.m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
    state.v = c.beta2 * state.v.array().matrix() + (1.0 - c.beta2) * grad.array().square().matrix();
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
    const Eigen::ArrayXd m_hat = state.m.array() / bc1;
    const Eigen::ArrayXd v_hat = state.v.array() / bc2;
    params.array() -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
}

}  // namespace ngmvlvm
