#include "ngmvlvm/model.hpp"

#include "ngmvlvm/rng.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace ngmvlvm {

using nlohmann::json;

void TrainConfig::validate() const {
    if (q < 1) throw std::invalid_argument("config: q must be >= 1");
    if (l < 2 || l % 2 != 0) throw std::invalid_argument("config: l must be even and >= 2");
    if (d < 1) throw std::invalid_argument("config: d must be >= 1");
    if (mc_samples < 1) throw std::invalid_argument("config: mc_samples must be >= 1");
    if (max_iters < 1) throw std::invalid_argument("config: max_iters must be >= 1");
    if (lr <= 0.0) throw std::invalid_argument("config: learning rate must be positive");
    if (conv_window < 1) throw std::invalid_argument("config: conv_window must be >= 1");
    if (n_feature_draws < 1) throw std::invalid_argument("config: n_feature_draws must be >= 1");
}

namespace {

/// Latent warm start: per-dimension-standardized views are concatenated and
/// projected onto their top-D principal directions; each score column is then
/// scaled to unit variance to sit in the prior's range. Degenerate directions
/// fall back to small seeded noise.
Eigen::MatrixXd pca_scores(const MultiViewDataset& std_data, Eigen::Index d, RngStream& rng) {
    const Eigen::Index n = std_data.n();
    Eigen::Index total_cols = 0;
    for (const auto& v : std_data.views) total_cols += v.cols();
    Eigen::MatrixXd all(n, total_cols);
    Eigen::Index off = 0;
    for (const auto& v : std_data.views) {
        all.middleCols(off, v.cols()) = v;
        off += v.cols();
    }
    const Eigen::RowVectorXd mean = all.colwise().mean();
    all.rowwise() -= mean;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(all, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::Index avail = std::min(d, svd.singularValues().size());

    Eigen::MatrixXd scores(n, d);
    for (Eigen::Index c = 0; c < d; ++c) {
        if (c < avail && svd.singularValues()(c) > 0.0) {
            scores.col(c) = svd.matrixU().col(c) * svd.singularValues()(c);
            // Pin the sign through the right singular vector, which does not
            // depend on the row order, so the warm start is equivariant under
            // row permutations of the data.
            const Eigen::VectorXd direction = svd.matrixV().col(c);
            Eigen::Index pivot = 0;
            direction.cwiseAbs().maxCoeff(&pivot);
            if (direction(pivot) < 0.0) scores.col(c) = -scores.col(c);
            const double m = scores.col(c).mean();
            const double sd = std::sqrt((scores.col(c).array() - m).square().mean());
            if (sd > 0.0) {
                scores.col(c) = (scores.col(c).array() - m) / sd;
                continue;
            }
        }
        scores.col(c) = 0.01 * rng.normal_vector(n);
    }
    return scores;
}

double observed_variance(const MultiViewDataset& data, Eigen::Index v) {
    const Eigen::MatrixXd& y = data.views[static_cast<std::size_t>(v)];
    double sum = 0.0, sum_sq = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index r = 0; r < y.rows(); ++r)
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
            if (data.has_mask(v) && data.masks[static_cast<std::size_t>(v)](r, c)) continue;
            sum += y(r, c);
            sum_sq += y(r, c) * y(r, c);
            ++count;
        }
    if (count == 0) return 1.0;
    const double mean = sum / static_cast<double>(count);
    return std::max(1e-12, sum_sq / static_cast<double>(count) - mean * mean);
}

void check_trainable(const MultiViewDataset& data) {
    data.validate();
    if (data.n() < 2) throw std::invalid_argument("train: need at least two data points");
    bool any = false;
    for (const auto& v : data.views) any = any || v.cols() >= 1;
    if (!any) throw std::invalid_argument("train: need at least one view with a column");
}

}  // namespace

ModelState init_model(const MultiViewDataset& raw, const TrainConfig& config) {
    config.validate();
    check_trainable(raw);

    ModelState state;
    state.config = config;

    MultiViewDataset std_data = raw;
    std::vector<std::string> warnings;
    state.stats = standardize_views(std_data, &warnings);
    for (const auto& w : warnings) std::cerr << "[ngmvlvm] warning: " << w << "\n";

    const Eigen::Index n = std_data.n();
    const Eigen::Index n_views = std_data.view_count();
    RngStream init_rng(derive_seed(config.seed, {stream::kInit}));

    // One shared frequency-mean draw keeps initialization symmetric under
    // view reordering; the per-view kernels specialize through training.
    const Eigen::MatrixXd mu1_init = 0.5 * init_rng.normal_matrix(config.q, config.d);
    const Eigen::MatrixXd mu2_init = 0.5 * init_rng.normal_matrix(config.q, config.d);
    state.params.kernel.resize(static_cast<std::size_t>(n_views));
    state.params.sigma_sq.resize(n_views);
    for (Eigen::Index v = 0; v < n_views; ++v) {
        auto& k = state.params.kernel[static_cast<std::size_t>(v)];
        k.alpha = Eigen::VectorXd::Constant(config.q, 1.0 / static_cast<double>(config.q));
        k.mu1 = mu1_init;
        k.mu2 = mu2_init;
        k.sigma1_sq = Eigen::MatrixXd::Constant(config.q, config.d, 1.0);
        k.sigma2_sq = Eigen::MatrixXd::Constant(config.q, config.d, 1.0);
        k.rho = Eigen::VectorXd::Zero(config.q);
        state.params.sigma_sq(v) = 0.1 * observed_variance(std_data, v);
    }
    state.params.latent.mu = pca_scores(std_data, config.d, init_rng);
    state.params.latent.s = Eigen::MatrixXd::Constant(n, config.d, 0.01);
    state.params.validate();
    return state;
}

ModelState train(const MultiViewDataset& raw, const TrainConfig& config,
                 const NoiseProvider& noise_provider) {
    ModelState state = init_model(raw, config);

    MultiViewDataset std_data = raw;
    apply_standardization(std_data, state.stats);

    const Dims dims{std_data.n(), config.d, std_data.view_count(), config.q, config.l};
    const ParamLayout layout(dims);
    Eigen::VectorXd u = layout.pack(state.params);
    AdamState adam = AdamState::init(layout.size(),
                                     {config.lr, config.beta1, config.beta2, config.adam_eps});

    const NoiseProvider provider =
        noise_provider ? noise_provider : NoiseProvider([&dims, &config](std::uint64_t iter) {
            return make_elbo_noise(dims, config.mc_samples, config.seed, iter);
        });

    state.elbo_history.clear();
    state.elbo_history.reserve(static_cast<std::size_t>(config.max_iters));
    const auto window = static_cast<std::size_t>(config.conv_window);

    for (long t = 0; t < config.max_iters; ++t) {
        const ElboNoise noise = provider(static_cast<std::uint64_t>(t));
        const ModelParams params = layout.unpack(u);
        const ElboValueGrad eg = elbo_with_gradient(params, std_data, noise);
        if (!std::isfinite(eg.value))
            throw NumericalError("train: ELBO became non-finite at iteration " +
                                 std::to_string(t));
        state.elbo_history.push_back(eg.value);

        const Eigen::VectorXd loss_grad = -eg.grad;  // ascent on the ELBO
        adam_step(u, loss_grad, adam);

        // Converged when the window mean stops improving relative to the
        // previous disjoint window.
        const std::size_t steps = state.elbo_history.size();
        if (config.conv_tol > 0.0 && steps >= 2 * window && steps % window == 0) {
            double recent = 0.0, previous = 0.0;
            for (std::size_t i = steps - window; i < steps; ++i) recent += state.elbo_history[i];
            for (std::size_t i = steps - 2 * window; i < steps - window; ++i)
                previous += state.elbo_history[i];
            recent /= static_cast<double>(window);
            previous /= static_cast<double>(window);
            const double rel = (recent - previous) / std::max(1.0, std::abs(previous));
            if (rel < config.conv_tol) break;
        }
    }

    state.params = layout.unpack(u);
    state.trained = true;
    return state;
}

Eigen::MatrixXd latent_mean(const ModelState& model) { return model.params.latent.mu; }

namespace {

void check_predictable(const ModelState& model, const MultiViewDataset& raw) {
    if (!model.trained) throw std::invalid_argument("model is not trained");
    raw.validate();
    if (raw.view_count() != model.params.views())
        throw std::invalid_argument("dataset and model disagree on view count");
    if (raw.n() != model.params.latent.n())
        throw std::invalid_argument("dataset and model disagree on row count");
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

constexpr double kJitterFactor = 1e-10;

}  // namespace

std::vector<Eigen::MatrixXd> reconstruct(const ModelState& model, const MultiViewDataset& raw,
                                         Eigen::Index n_feature_draws) {
    check_predictable(model, raw);
    if (n_feature_draws <= 0) n_feature_draws = model.config.n_feature_draws;

    MultiViewDataset std_data = raw;
    apply_standardization(std_data, model.stats);
    const Eigen::MatrixXd& x = model.params.latent.mu;

    std::vector<Eigen::MatrixXd> out(std_data.views.size());
    for (Eigen::Index v = 0; v < std_data.view_count(); ++v) {
        const auto vi = static_cast<std::size_t>(v);
        const Eigen::MatrixXd& y = std_data.views[vi];
        const auto& kernel = model.params.kernel[vi];
        const double sigma_sq = model.params.sigma_sq(v) * (1.0 + kJitterFactor);
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(y.rows(), y.cols());
        for (Eigen::Index rep = 0; rep < n_feature_draws; ++rep) {
            RngStream rng(derive_seed(model.config.seed,
                                      {stream::kPredict, static_cast<std::uint64_t>(v),
                                       static_cast<std::uint64_t>(rep)}));
            const SpectralSample sample = sample_spectral_points(kernel, model.config.l, rng);
            const Eigen::MatrixXd phi = feature_matrix(x, sample, kernel);
            Eigen::MatrixXd b = phi.transpose() * phi;
            b.diagonal().array() += sigma_sq;
            const Eigen::LLT<Eigen::MatrixXd> llt(b);
            if (llt.info() != Eigen::Success)
                throw NumericalError("reconstruct: inner Cholesky failed");
            acc.noalias() += phi * llt.solve(phi.transpose() * y);
        }
        acc /= static_cast<double>(n_feature_draws);
        // Back to data scale.
        for (Eigen::Index c = 0; c < acc.cols(); ++c)
            acc.col(c) = acc.col(c).array() * model.stats.stddev[vi](c) + model.stats.mean[vi](c);
        out[vi] = std::move(acc);
    }
    return out;
}

std::vector<Eigen::MatrixXd> impute(const ModelState& model, const MultiViewDataset& raw,
                                    Eigen::Index n_feature_draws) {
    check_predictable(model, raw);
    if (n_feature_draws <= 0) n_feature_draws = model.config.n_feature_draws;

    // Fully-missing columns cannot be imputed; report the first offender.
    for (Eigen::Index v = 0; v < raw.view_count(); ++v) {
        if (!raw.has_mask(v)) continue;
        const BoolMask& mask = raw.masks[static_cast<std::size_t>(v)];
        for (Eigen::Index c = 0; c < mask.cols(); ++c)
            if (mask.col(c).all())
                throw std::invalid_argument("impute: view " + std::to_string(v) + " column " +
                                            std::to_string(c) + " has no observed entries");
    }

    MultiViewDataset std_data = raw;
    apply_standardization(std_data, model.stats);
    const Eigen::MatrixXd& x = model.params.latent.mu;

    std::vector<Eigen::MatrixXd> out;
    out.reserve(raw.views.size());
    for (const auto& view : raw.views) out.push_back(view);  // observed values pass through

    for (Eigen::Index v = 0; v < std_data.view_count(); ++v) {
        const auto vi = static_cast<std::size_t>(v);
        if (!raw.has_mask(v) || !raw.masks[vi].any()) continue;
        const BoolMask& mask = raw.masks[vi];
        const Eigen::MatrixXd& y = std_data.views[vi];
        const auto& kernel = model.params.kernel[vi];
        const double sigma_sq = model.params.sigma_sq(v) * (1.0 + kJitterFactor);

        Eigen::MatrixXd filled_acc = Eigen::MatrixXd::Zero(y.rows(), y.cols());
        for (Eigen::Index rep = 0; rep < n_feature_draws; ++rep) {
            RngStream rng(derive_seed(model.config.seed,
                                      {stream::kPredict, static_cast<std::uint64_t>(v),
                                       static_cast<std::uint64_t>(rep)}));
            const SpectralSample sample = sample_spectral_points(kernel, model.config.l, rng);
            const Eigen::MatrixXd phi = feature_matrix(x, sample, kernel);
            for (Eigen::Index c = 0; c < y.cols(); ++c) {
                if (!mask.col(c).any()) continue;
                std::vector<Eigen::Index> obs, miss;
                for (Eigen::Index r = 0; r < y.rows(); ++r)
                    (mask(r, c) ? miss : obs).push_back(r);
                const Eigen::MatrixXd phi_obs = gather_rows(phi, obs);
                const Eigen::MatrixXd phi_miss = gather_rows(phi, miss);
                Eigen::VectorXd y_obs(static_cast<Eigen::Index>(obs.size()));
                for (std::size_t i = 0; i < obs.size(); ++i)
                    y_obs(static_cast<Eigen::Index>(i)) = y(obs[i], c);

                Eigen::MatrixXd b = phi_obs.transpose() * phi_obs;
                b.diagonal().array() += sigma_sq;
                const Eigen::LLT<Eigen::MatrixXd> llt(b);
                if (llt.info() != Eigen::Success)
                    throw NumericalError("impute: inner Cholesky failed");
                const Eigen::VectorXd y_miss = phi_miss * llt.solve(phi_obs.transpose() * y_obs);
                for (std::size_t i = 0; i < miss.size(); ++i)
                    filled_acc(miss[i], c) += y_miss(static_cast<Eigen::Index>(i));
            }
        }
        filled_acc /= static_cast<double>(n_feature_draws);
        for (Eigen::Index c = 0; c < y.cols(); ++c)
            for (Eigen::Index r = 0; r < y.rows(); ++r)
                if (mask(r, c))
                    out[vi](r, c) = filled_acc(r, c) * model.stats.stddev[vi](c) +
                                    model.stats.mean[vi](c);
    }
    return out;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Eigen::MatrixXd(0, 0);
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = j.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

}  // namespace

json model_to_json(const ModelState& model) {
    json j;
    j["version"] = "ngmvlvm-model-v1";
    j["trained"] = model.trained;
    const TrainConfig& c = model.config;
    j["config"] = {{"q", c.q},
                   {"l", c.l},
                   {"d", c.d},
                   {"mc_samples", c.mc_samples},
                   {"max_iters", c.max_iters},
                   {"lr", c.lr},
                   {"beta1", c.beta1},
                   {"beta2", c.beta2},
                   {"adam_eps", c.adam_eps},
                   {"conv_tol", c.conv_tol},
                   {"conv_window", c.conv_window},
                   {"n_feature_draws", c.n_feature_draws},
                   {"seed", c.seed}};
    j["views"] = json::array();
    for (Eigen::Index v = 0; v < model.params.views(); ++v) {
        const auto& k = model.params.kernel[static_cast<std::size_t>(v)];
        json entry;
        entry["alpha"] = vector_to_json(k.alpha);
        entry["mu1"] = matrix_to_json(k.mu1);
        entry["mu2"] = matrix_to_json(k.mu2);
        entry["sigma1_sq"] = matrix_to_json(k.sigma1_sq);
        entry["sigma2_sq"] = matrix_to_json(k.sigma2_sq);
        entry["rho"] = vector_to_json(k.rho);
        entry["sigma_sq"] = model.params.sigma_sq(v);
        entry["standardize_mean"] = vector_to_json(model.stats.mean[static_cast<std::size_t>(v)]);
        entry["standardize_std"] = vector_to_json(model.stats.stddev[static_cast<std::size_t>(v)]);
        j["views"].push_back(std::move(entry));
    }
    j["latent"] = {{"mu", matrix_to_json(model.params.latent.mu)},
                   {"s", matrix_to_json(model.params.latent.s)}};
    j["elbo_history"] = model.elbo_history;
    return j;
}

ModelState model_from_json(const json& j) {
    if (j.value("version", "") != std::string("ngmvlvm-model-v1"))
        throw std::runtime_error("model version mismatch (expected ngmvlvm-model-v1)");
    ModelState model;
    model.trained = j.value("trained", false);
    const json& c = j.at("config");
    model.config.q = c.at("q").get<Eigen::Index>();
    model.config.l = c.at("l").get<Eigen::Index>();
    model.config.d = c.at("d").get<Eigen::Index>();
    model.config.mc_samples = c.at("mc_samples").get<Eigen::Index>();
    model.config.max_iters = c.at("max_iters").get<long>();
    model.config.lr = c.at("lr").get<double>();
    model.config.beta1 = c.at("beta1").get<double>();
    model.config.beta2 = c.at("beta2").get<double>();
    model.config.adam_eps = c.at("adam_eps").get<double>();
    model.config.conv_tol = c.at("conv_tol").get<double>();
    model.config.conv_window = c.at("conv_window").get<Eigen::Index>();
    model.config.n_feature_draws = c.at("n_feature_draws").get<Eigen::Index>();
    model.config.seed = c.at("seed").get<std::uint64_t>();

    const json& views = j.at("views");
    model.params.kernel.resize(views.size());
    model.params.sigma_sq.resize(static_cast<Eigen::Index>(views.size()));
    for (std::size_t v = 0; v < views.size(); ++v) {
        const json& entry = views[v];
        auto& k = model.params.kernel[v];
        k.alpha = vector_from_json(entry.at("alpha"));
        k.mu1 = matrix_from_json(entry.at("mu1"));
        k.mu2 = matrix_from_json(entry.at("mu2"));
        k.sigma1_sq = matrix_from_json(entry.at("sigma1_sq"));
        k.sigma2_sq = matrix_from_json(entry.at("sigma2_sq"));
        k.rho = vector_from_json(entry.at("rho"));
        model.params.sigma_sq(static_cast<Eigen::Index>(v)) = entry.at("sigma_sq").get<double>();
        model.stats.mean.push_back(vector_from_json(entry.at("standardize_mean")));
        model.stats.stddev.push_back(vector_from_json(entry.at("standardize_std")));
    }
    model.params.latent.mu = matrix_from_json(j.at("latent").at("mu"));
    model.params.latent.s = matrix_from_json(j.at("latent").at("s"));
    model.elbo_history = j.value("elbo_history", std::vector<double>{});
    model.params.validate();
    return model;
}

void save_model(const std::string& path, const ModelState& model) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << model_to_json(model).dump(2) << "\n";
}

ModelState load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    json j;
    in >> j;
    return model_from_json(j);
}

}  // namespace ngmvlvm
