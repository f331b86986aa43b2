#include "ngmvlvm/rff.hpp"

#include <cmath>
#include <stdexcept>

namespace ngmvlvm {

namespace {

void check_l(Eigen::Index l) {
    if (l < 2 || l % 2 != 0)
        throw std::invalid_argument("feature dimension l must be even and >= 2");
}

using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;

}  // namespace

SpectralNoise draw_spectral_noise(Eigen::Index q, Eigen::Index l, Eigen::Index d,
                                  RngStream& rng) {
    check_l(l);
    SpectralNoise noise;
    noise.eps1.reserve(static_cast<std::size_t>(q));
    noise.eps2.reserve(static_cast<std::size_t>(q));
    for (Eigen::Index i = 0; i < q; ++i) {
        noise.eps1.push_back(rng.normal_matrix(l / 2, d));
        noise.eps2.push_back(rng.normal_matrix(l / 2, d));
    }
    return noise;
}

SpectralSample sample_spectral_points(const SpectralMixtureParams& params, Eigen::Index l,
                                      const SpectralNoise& noise) {
    check_l(l);
    params.validate();
    const Eigen::Index q = params.components();
    const Eigen::Index d = params.dim();
    const Eigen::Index h = l / 2;
    if (static_cast<Eigen::Index>(noise.eps1.size()) != q ||
        static_cast<Eigen::Index>(noise.eps2.size()) != q)
        throw std::invalid_argument("spectral noise component count mismatch");

    SpectralSample s;
    s.noise = noise;
    s.w1.resize(static_cast<std::size_t>(q));
    s.w2.resize(static_cast<std::size_t>(q));
    for (Eigen::Index i = 0; i < q; ++i) {
        const auto& e1 = noise.eps1[static_cast<std::size_t>(i)];
        const auto& e2 = noise.eps2[static_cast<std::size_t>(i)];
        if (e1.rows() != h || e1.cols() != d || e2.rows() != h || e2.cols() != d)
            throw std::invalid_argument("spectral noise shape mismatch");

        const RowArray mu1 = params.mu1.row(i).array();
        const RowArray mu2 = params.mu2.row(i).array();
        const RowArray sig1 = params.sigma1_sq.row(i).array().sqrt();
        const RowArray sig2 = params.sigma2_sq.row(i).array().sqrt();
        const double rho = params.rho(i);
        const double root = std::sqrt(std::max(0.0, 1.0 - rho * rho));

        Eigen::ArrayXXd w1 = (e1.array().rowwise() * sig1).rowwise() + mu1;
        const Eigen::ArrayXXd centered = w1.rowwise() - mu1;
        Eigen::ArrayXXd w2 = (centered.rowwise() * (rho * (sig2 / sig1))).rowwise() + mu2;
        w2 += (e2.array().rowwise() * (root * sig2));

        s.w1[static_cast<std::size_t>(i)] = w1.matrix();
        s.w2[static_cast<std::size_t>(i)] = w2.matrix();
    }
    return s;
}

SpectralSample sample_spectral_points(const SpectralMixtureParams& params, Eigen::Index l,
                                      RngStream& rng) {
    check_l(l);
    return sample_spectral_points(params, l,
                                  draw_spectral_noise(params.components(), l, params.dim(), rng));
}

Eigen::VectorXd feature_map(const Eigen::VectorXd& x, const Eigen::MatrixXd& w1,
                            const Eigen::MatrixXd& w2) {
    if (w1.rows() != w2.rows() || w1.cols() != w2.cols() || w1.cols() != x.size())
        throw std::invalid_argument("feature_map: shape mismatch");
    const Eigen::Index h = w1.rows();
    const Eigen::Index l = 2 * h;
    const double scale = std::sqrt(1.0 / (2.0 * static_cast<double>(l)));
    const Eigen::ArrayXd p1 = (w1 * x).array();
    const Eigen::ArrayXd p2 = (w2 * x).array();
    Eigen::VectorXd phi(l);
    phi.head(h) = scale * (p1.cos() + p2.cos());
    phi.tail(h) = scale * (p1.sin() + p2.sin());
    return phi;
}

Eigen::VectorXd stacked_feature_map(const Eigen::VectorXd& x, const SpectralSample& sample,
                                    const SpectralMixtureParams& params) {
    if (sample.components() != params.components())
        throw std::invalid_argument("stacked_feature_map: component count mismatch");
    const Eigen::Index l = 2 * sample.half_l();
    Eigen::VectorXd phi(params.components() * l);
    for (Eigen::Index q = 0; q < params.components(); ++q) {
        phi.segment(q * l, l) = std::sqrt(params.alpha(q)) *
                                feature_map(x, sample.w1[static_cast<std::size_t>(q)],
                                            sample.w2[static_cast<std::size_t>(q)]);
    }
    return phi;
}

FeatureCache feature_matrix_cached(const Eigen::MatrixXd& x, const SpectralSample& sample,
                                   const SpectralMixtureParams& params) {
    if (sample.components() != params.components())
        throw std::invalid_argument("feature_matrix: component count mismatch");
    if (x.cols() != sample.dim())
        throw std::invalid_argument("feature_matrix: input dimension mismatch");
    const Eigen::Index n = x.rows();
    const Eigen::Index h = sample.half_l();
    const Eigen::Index l = 2 * h;
    const Eigen::Index qn = params.components();
    const double scale = std::sqrt(1.0 / (2.0 * static_cast<double>(l)));

    FeatureCache cache;
    cache.phi.resize(n, qn * l);
    cache.cos1.resize(static_cast<std::size_t>(qn));
    cache.sin1.resize(static_cast<std::size_t>(qn));
    cache.cos2.resize(static_cast<std::size_t>(qn));
    cache.sin2.resize(static_cast<std::size_t>(qn));
    for (Eigen::Index q = 0; q < qn; ++q) {
        const auto i = static_cast<std::size_t>(q);
        const Eigen::MatrixXd p1 = x * sample.w1[i].transpose();  // N x (L/2)
        const Eigen::MatrixXd p2 = x * sample.w2[i].transpose();
        cache.cos1[i] = p1.array().cos();
        cache.sin1[i] = p1.array().sin();
        cache.cos2[i] = p2.array().cos();
        cache.sin2[i] = p2.array().sin();
        const double c = std::sqrt(params.alpha(q)) * scale;
        cache.phi.block(0, q * l, n, h) = c * (cache.cos1[i] + cache.cos2[i]);
        cache.phi.block(0, q * l + h, n, h) = c * (cache.sin1[i] + cache.sin2[i]);
    }
    return cache;
}

Eigen::MatrixXd feature_matrix(const Eigen::MatrixXd& x, const SpectralSample& sample,
                               const SpectralMixtureParams& params) {
    return feature_matrix_cached(x, sample, params).phi;
}

SpectralParamGrad SpectralParamGrad::zero(Eigen::Index q, Eigen::Index d) {
    SpectralParamGrad g;
    g.alpha = Eigen::VectorXd::Zero(q);
    g.mu1 = Eigen::MatrixXd::Zero(q, d);
    g.mu2 = Eigen::MatrixXd::Zero(q, d);
    g.sigma1_sq = Eigen::MatrixXd::Zero(q, d);
    g.sigma2_sq = Eigen::MatrixXd::Zero(q, d);
    g.rho = Eigen::VectorXd::Zero(q);
    return g;
}

void backprop_features(const Eigen::MatrixXd& x, const SpectralSample& sample,
                       const SpectralMixtureParams& params, const FeatureCache& cache,
                       const Eigen::MatrixXd& phi_bar, SpectralParamGrad& grad,
                       Eigen::MatrixXd* x_bar) {
    const Eigen::Index n = x.rows();
    const Eigen::Index h = sample.half_l();
    const Eigen::Index l = 2 * h;
    const double scale = std::sqrt(1.0 / (2.0 * static_cast<double>(l)));
    if (phi_bar.rows() != n || phi_bar.cols() != params.components() * l)
        throw std::invalid_argument("backprop_features: phi_bar shape mismatch");

    for (Eigen::Index q = 0; q < params.components(); ++q) {
        const auto i = static_cast<std::size_t>(q);
        const double alpha = params.alpha(q);
        const double c = std::sqrt(alpha) * scale;
        const Eigen::ArrayXXd gc = phi_bar.block(0, q * l, n, h).array();
        const Eigen::ArrayXXd gs = phi_bar.block(0, q * l + h, n, h).array();

        // d phi / d alpha = phi / (2 alpha).
        const double block_dot =
            (gc * (c * (cache.cos1[i].array() + cache.cos2[i].array()))).sum() +
            (gs * (c * (cache.sin1[i].array() + cache.sin2[i].array()))).sum();
        grad.alpha(q) += block_dot / (2.0 * alpha);

        const Eigen::MatrixXd p1_bar =
            (c * (gs * cache.cos1[i].array() - gc * cache.sin1[i].array())).matrix();
        const Eigen::MatrixXd p2_bar =
            (c * (gs * cache.cos2[i].array() - gc * cache.sin2[i].array())).matrix();

        const Eigen::MatrixXd w1_bar = p1_bar.transpose() * x;  // (L/2) x D
        const Eigen::MatrixXd w2_bar = p2_bar.transpose() * x;
        if (x_bar != nullptr)
            *x_bar += p1_bar * sample.w1[i] + p2_bar * sample.w2[i];

        // Through the two-step draw. In composed form w1 = mu1 + sigma1.*eps1
        // and w2 = mu2 + rho sigma2.*eps1 + sqrt(1-rho^2) sigma2.*eps2, so w2
        // carries no sigma1 or mu1 dependence.
        const RowArray sig1 = params.sigma1_sq.row(q).array().sqrt();
        const RowArray sig2 = params.sigma2_sq.row(q).array().sqrt();
        const double rho = params.rho(q);
        const double root = std::sqrt(1.0 - rho * rho);
        const Eigen::ArrayXXd e1 = sample.noise.eps1[i].array();
        const Eigen::ArrayXXd e2 = sample.noise.eps2[i].array();

        grad.mu1.row(q) += w1_bar.colwise().sum();
        grad.mu2.row(q) += w2_bar.colwise().sum();

        const RowArray sig1_bar = (w1_bar.array() * e1).colwise().sum();
        const RowArray sig2_bar = (w2_bar.array() * (rho * e1 + root * e2)).colwise().sum();
        grad.sigma1_sq.row(q) += (sig1_bar / (2.0 * sig1)).matrix();
        grad.sigma2_sq.row(q) += (sig2_bar / (2.0 * sig2)).matrix();

        // d w2 / d rho = sigma2.*eps1 - (rho / sqrt(1-rho^2)) sigma2.*eps2.
        grad.rho(q) +=
            (w2_bar.array() * ((e1 - (rho / root) * e2).rowwise() * sig2)).sum();
    }
}

SpectralParamGrad feature_product_gradient(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                                           const SpectralMixtureParams& params,
                                           const SpectralSample& sample) {
    Eigen::MatrixXd x(2, x1.size());
    x.row(0) = x1.transpose();
    x.row(1) = x2.transpose();
    const FeatureCache cache = feature_matrix_cached(x, sample, params);
    Eigen::MatrixXd phi_bar(2, cache.phi.cols());
    phi_bar.row(0) = cache.phi.row(1);
    phi_bar.row(1) = cache.phi.row(0);
    SpectralParamGrad grad = SpectralParamGrad::zero(params.components(), params.dim());
    backprop_features(x, sample, params, cache, phi_bar, grad, nullptr);
    return grad;
}

double error_bound(Eigen::Index n, Eigen::Index l, Eigen::Index q,
                   const Eigen::VectorXd& alphas, double k_norm, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("error_bound: eps must be positive");
    if (n < 1 || l < 1 || q < 1) throw std::invalid_argument("error_bound: sizes must be >= 1");
    const double c = alphas.norm();
    const double nn = static_cast<double>(n);
    const double denom =
        2.0 * nn * c * (6.0 * k_norm + 3.0 * nn * c * std::sqrt(static_cast<double>(q)) + 8.0 * eps);
    return nn * std::exp(-3.0 * eps * eps * static_cast<double>(l) / denom);
}

double error_eps_at(double level, Eigen::Index n, Eigen::Index l, Eigen::Index q,
                    const Eigen::VectorXd& alphas, double k_norm) {
    if (level <= 0.0 || level >= static_cast<double>(n))
        throw std::invalid_argument("error_eps_at: level must lie in (0, n)");
    double lo = 0.0;
    double hi = 1.0;
    while (error_bound(n, l, q, alphas, k_norm, hi) > level) {
        hi *= 2.0;
        if (hi > 1e300) throw std::runtime_error("error_eps_at: bisection bracket overflow");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (error_bound(n, l, q, alphas, k_norm, mid) > level ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace ngmvlvm
