#include "ngmvlvm/elbo.hpp"

#include "ngmvlvm/rng.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <vector>

namespace ngmvlvm {

namespace {

constexpr double kJitterFactor = 1e-10;
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

/// Columns of one view sharing an identical observed-row pattern; the R x R
/// inner matrix is factorized once per group.
struct ColumnGroup {
    std::vector<Eigen::Index> rows;  // observed row indices
    std::vector<Eigen::Index> cols;
    bool full = false;  // rows == all rows
};

std::vector<ColumnGroup> group_columns(const MultiViewDataset& data, Eigen::Index v) {
    const Eigen::MatrixXd& y = data.views[static_cast<std::size_t>(v)];
    std::vector<ColumnGroup> groups;
    if (!data.has_mask(v) || !data.masks[static_cast<std::size_t>(v)].any()) {
        if (y.cols() == 0) return groups;
        ColumnGroup g;
        g.full = true;
        g.rows.resize(static_cast<std::size_t>(y.rows()));
        for (Eigen::Index r = 0; r < y.rows(); ++r) g.rows[static_cast<std::size_t>(r)] = r;
        g.cols.resize(static_cast<std::size_t>(y.cols()));
        for (Eigen::Index c = 0; c < y.cols(); ++c) g.cols[static_cast<std::size_t>(c)] = c;
        groups.push_back(std::move(g));
        return groups;
    }
    const BoolMask& mask = data.masks[static_cast<std::size_t>(v)];
    std::map<std::vector<bool>, std::size_t> index;
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
        std::vector<bool> key(static_cast<std::size_t>(y.rows()));
        for (Eigen::Index r = 0; r < y.rows(); ++r) key[static_cast<std::size_t>(r)] = mask(r, c);
        auto [it, inserted] = index.try_emplace(key, groups.size());
        if (inserted) {
            ColumnGroup g;
            for (Eigen::Index r = 0; r < y.rows(); ++r)
                if (!mask(r, c)) g.rows.push_back(r);
            g.full = static_cast<Eigen::Index>(g.rows.size()) == y.rows();
            groups.push_back(std::move(g));
        }
        groups[it->second].cols.push_back(c);
    }
    return groups;
}

struct GroupResult {
    double loglik = 0.0;
    double dsigma_sq = 0.0;
    Eigen::MatrixXd dphi_rows;  // n_g x R, aligned with group.rows
};

/// Log-likelihood (and optionally gradients) of the group's columns under
/// N(0, Phi_o Phi_o' + sigma_sq I) via the low-rank identities.
GroupResult solve_group(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& y,
                        const ColumnGroup& group, double sigma_sq, bool want_grad) {
    const Eigen::Index r_dim = phi.cols();
    const Eigen::Index n_obs = static_cast<Eigen::Index>(group.rows.size());
    const Eigen::Index m_cols = static_cast<Eigen::Index>(group.cols.size());
    const double sigma_jittered = sigma_sq * (1.0 + kJitterFactor);

    Eigen::MatrixXd phi_rows;
    const Eigen::MatrixXd* phi_o = &phi;
    if (!group.full) {
        phi_rows.resize(n_obs, r_dim);
        for (Eigen::Index i = 0; i < n_obs; ++i)
            phi_rows.row(i) = phi.row(group.rows[static_cast<std::size_t>(i)]);
        phi_o = &phi_rows;
    }
    Eigen::MatrixXd y_o(n_obs, m_cols);
    for (Eigen::Index j = 0; j < m_cols; ++j) {
        const Eigen::Index c = group.cols[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < n_obs; ++i)
            y_o(i, j) = y(group.rows[static_cast<std::size_t>(i)], c);
    }

    Eigen::MatrixXd b = phi_o->transpose() * (*phi_o);
    b.diagonal().array() += sigma_jittered;
    const Eigen::LLT<Eigen::MatrixXd> llt(b);
    if (llt.info() != Eigen::Success)
        throw NumericalError("low-rank Gaussian likelihood: inner Cholesky failed (R=" +
                             std::to_string(r_dim) + ", sigma_sq=" + std::to_string(sigma_sq) + ")");

    double logdet_b = 0.0;
    for (Eigen::Index i = 0; i < r_dim; ++i)
        logdet_b += 2.0 * std::log(llt.matrixLLT()(i, i));
    const double logdet_cov =
        static_cast<double>(n_obs - r_dim) * std::log(sigma_sq) + logdet_b;

    const Eigen::MatrixXd c = phi_o->transpose() * y_o;  // R x m
    const Eigen::MatrixXd g = llt.solve(c);
    const Eigen::VectorXd y_norms = y_o.colwise().squaredNorm();
    const Eigen::VectorXd quad_red = (c.array() * g.array()).colwise().sum();

    GroupResult result;
    for (Eigen::Index j = 0; j < m_cols; ++j) {
        result.loglik += -0.5 * (static_cast<double>(n_obs) * kLog2Pi + logdet_cov +
                                 (y_norms(j) - quad_red(j)) / sigma_sq);
    }
    if (!want_grad) return result;

    const Eigen::MatrixXd b_inv = llt.solve(Eigen::MatrixXd::Identity(r_dim, r_dim));
    result.dphi_rows = -static_cast<double>(m_cols) * ((*phi_o) * b_inv);
    result.dphi_rows.noalias() += (1.0 / sigma_sq) * (y_o * g.transpose());
    result.dphi_rows.noalias() -= (1.0 / sigma_sq) * ((*phi_o) * (g * g.transpose()));

    const double jf = 1.0 + kJitterFactor;
    result.dsigma_sq = -0.5 * static_cast<double>(m_cols) *
                       (static_cast<double>(n_obs - r_dim) / sigma_sq + jf * b_inv.trace());
    for (Eigen::Index j = 0; j < m_cols; ++j) {
        result.dsigma_sq += 0.5 * (y_norms(j) - quad_red(j)) / (sigma_sq * sigma_sq);
        result.dsigma_sq -= 0.5 * jf * g.col(j).squaredNorm() / sigma_sq;
    }
    return result;
}

void add_rowmajor(Eigen::VectorXd& flat, Eigen::Index offset, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) flat(offset++) += m(i, j);
}

void check_consistency(const ModelParams& params, const MultiViewDataset& data,
                       const ElboNoise& noise) {
    params.validate();
    data.validate();
    if (noise.draws() < 1) throw std::invalid_argument("elbo: need at least one MC draw");
    if (data.view_count() != params.views())
        throw std::invalid_argument("elbo: dataset and model disagree on view count");
    if (data.n() != params.latent.n())
        throw std::invalid_argument("elbo: dataset and model disagree on row count");
    for (const auto& draw : noise.spectral)
        if (static_cast<Eigen::Index>(draw.size()) != params.views())
            throw std::invalid_argument("elbo: noise view count mismatch");
}

/// Shared forward/backward pass. The reduction order (draws outer, views
/// inner, groups in discovery order) is fixed so results do not depend on the
/// worker count.
ElboValueGrad elbo_core(const ModelParams& params, const MultiViewDataset& data,
                        const ElboNoise& noise, bool want_grad) {
    check_consistency(params, data, noise);
    const Eigen::Index n = data.n();
    const Eigen::Index d = params.latent.dim();
    const Eigen::Index n_views = params.views();
    const Eigen::Index n_draws = noise.draws();
    const Eigen::Index l = 2 * noise.spectral.front().front().eps1.front().rows();
    const Dims dims = dims_of(params, l);
    const ParamLayout layout(dims);

    std::vector<std::vector<ColumnGroup>> groups(static_cast<std::size_t>(n_views));
    for (Eigen::Index v = 0; v < n_views; ++v)
        groups[static_cast<std::size_t>(v)] = group_columns(data, v);

    const Eigen::ArrayXXd sqrt_s = params.latent.s.array().sqrt();

    double recon = 0.0;
    Eigen::VectorXd grad_c;
    if (want_grad) grad_c = Eigen::VectorXd::Zero(layout.size());

    for (Eigen::Index i = 0; i < n_draws; ++i) {
        const auto di = static_cast<std::size_t>(i);
        const Eigen::MatrixXd x =
            params.latent.mu.array() + sqrt_s * noise.x_eps[di].array();
        Eigen::MatrixXd x_bar;
        if (want_grad) x_bar = Eigen::MatrixXd::Zero(n, d);

        for (Eigen::Index v = 0; v < n_views; ++v) {
            const auto vi = static_cast<std::size_t>(v);
            const auto& kernel = params.kernel[vi];
            const SpectralSample sample =
                sample_spectral_points(kernel, l, noise.spectral[di][vi]);
            const FeatureCache cache = feature_matrix_cached(x, sample, kernel);
            const double sigma_sq = params.sigma_sq(v);
            const auto& view_groups = groups[vi];
            if (view_groups.empty()) continue;

            std::vector<GroupResult> results(view_groups.size());
            parallel_for(static_cast<Eigen::Index>(view_groups.size()), [&](Eigen::Index g) {
                results[static_cast<std::size_t>(g)] =
                    solve_group(cache.phi, data.views[vi], view_groups[static_cast<std::size_t>(g)],
                                sigma_sq, want_grad);
            });

            for (const auto& res : results) recon += res.loglik;
            if (!want_grad) continue;

            Eigen::MatrixXd phi_bar = Eigen::MatrixXd::Zero(n, dims.features());
            double dsigma_sq = 0.0;
            for (std::size_t g = 0; g < view_groups.size(); ++g) {
                const auto& rows = view_groups[g].rows;
                for (std::size_t ri = 0; ri < rows.size(); ++ri)
                    phi_bar.row(rows[ri]) += results[g].dphi_rows.row(static_cast<Eigen::Index>(ri));
                dsigma_sq += results[g].dsigma_sq;
            }

            SpectralParamGrad kgrad = SpectralParamGrad::zero(dims.q, d);
            backprop_features(x, sample, kernel, cache, phi_bar, kgrad, &x_bar);

            const auto block = layout.view_block(v);
            grad_c.segment(block.alpha, dims.q) += kgrad.alpha;
            add_rowmajor(grad_c, block.mu1, kgrad.mu1);
            add_rowmajor(grad_c, block.mu2, kgrad.mu2);
            add_rowmajor(grad_c, block.sigma1_sq, kgrad.sigma1_sq);
            add_rowmajor(grad_c, block.sigma2_sq, kgrad.sigma2_sq);
            grad_c.segment(block.rho, dims.q) += kgrad.rho;
            grad_c(block.sigma_sq) += dsigma_sq;
        }

        if (want_grad) {
            // x = mu + sqrt(s) .* eps, so dx/dmu = 1 and dx/ds = eps / (2 sqrt(s)).
            add_rowmajor(grad_c, layout.latent_mu_offset(), x_bar);
            const Eigen::MatrixXd s_bar =
                (x_bar.array() * noise.x_eps[di].array() / (2.0 * sqrt_s)).matrix();
            add_rowmajor(grad_c, layout.latent_s_offset(), s_bar);
        }
    }

    const double inv_draws = 1.0 / static_cast<double>(n_draws);
    recon *= inv_draws;

    ElboValueGrad out;
    out.value = recon - kl_to_standard_normal(params.latent);
    if (want_grad) {
        grad_c *= inv_draws;
        // KL gradients: d/dmu = mu, d/ds = (1 - 1/s) / 2; ELBO subtracts them.
        Eigen::Index off = layout.latent_mu_offset();
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < d; ++c) grad_c(off++) -= params.latent.mu(r, c);
        off = layout.latent_s_offset();
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < d; ++c)
                grad_c(off++) -= 0.5 * (1.0 - 1.0 / params.latent.s(r, c));
        out.grad = layout.to_unconstrained_grad(params, grad_c);
    }
    return out;
}

}  // namespace

ElboNoise make_elbo_noise(const Dims& dims, Eigen::Index mc_samples, std::uint64_t seed,
                          std::uint64_t iter) {
    dims.validate();
    if (mc_samples < 1) throw std::invalid_argument("make_elbo_noise: need mc_samples >= 1");
    ElboNoise noise;
    noise.x_eps.reserve(static_cast<std::size_t>(mc_samples));
    noise.spectral.reserve(static_cast<std::size_t>(mc_samples));
    for (Eigen::Index i = 0; i < mc_samples; ++i) {
        RngStream x_rng(
            derive_seed(seed, {stream::kLatentNoise, iter, static_cast<std::uint64_t>(i)}));
        noise.x_eps.push_back(x_rng.normal_matrix(dims.n, dims.d));
        std::vector<SpectralNoise> per_view;
        per_view.reserve(static_cast<std::size_t>(dims.v));
        for (Eigen::Index v = 0; v < dims.v; ++v) {
            RngStream w_rng(derive_seed(seed, {stream::kSpectralNoise, iter,
                                               static_cast<std::uint64_t>(v),
                                               static_cast<std::uint64_t>(i)}));
            per_view.push_back(draw_spectral_noise(dims.q, dims.l, dims.d, w_rng));
        }
        noise.spectral.push_back(std::move(per_view));
    }
    return noise;
}

double lowrank_gaussian_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& phi,
                               double sigma_sq) {
    if (phi.rows() != y.size()) throw std::invalid_argument("loglik: Phi rows != y length");
    if (phi.cols() < 1) throw std::invalid_argument("loglik: Phi needs at least one column");
    if (!(sigma_sq > 0.0)) throw std::invalid_argument("loglik: sigma_sq must be positive");
    if (!y.allFinite() || !phi.allFinite())
        throw std::invalid_argument("loglik: non-finite inputs");

    ColumnGroup group;
    group.full = true;
    group.rows.resize(static_cast<std::size_t>(y.size()));
    for (Eigen::Index r = 0; r < y.size(); ++r) group.rows[static_cast<std::size_t>(r)] = r;
    group.cols = {0};
    return solve_group(phi, y, group, sigma_sq, false).loglik;
}

double kl_to_standard_normal(const VariationalParams& vp) {
    vp.validate();
    const double d = static_cast<double>(vp.dim());
    double kl = 0.0;
    for (Eigen::Index i = 0; i < vp.n(); ++i) {
        const double trace = vp.s.row(i).sum();
        const double sqnorm = vp.mu.row(i).squaredNorm();
        const double logdet = vp.s.row(i).array().log().sum();
        kl += 0.5 * (trace + sqnorm - logdet - d);
    }
    return kl;
}

double elbo_estimate(const ModelParams& params, const MultiViewDataset& data,
                     const ElboNoise& noise) {
    return elbo_core(params, data, noise, false).value;
}

ElboValueGrad elbo_with_gradient(const ModelParams& params, const MultiViewDataset& data,
                                 const ElboNoise& noise) {
    return elbo_core(params, data, noise, true);
}

Eigen::VectorXd elbo_gradient(const ModelParams& params, const MultiViewDataset& data,
                              const ElboNoise& noise) {
    return elbo_core(params, data, noise, true).grad;
}

}  // namespace ngmvlvm
