// Batch CLI for the multi-view spectral mixture latent variable model:
// data synthesis, training, evaluation, imputation, and kernel diagnostics.
// Commands are pure functions of (input files, flags, seed) to output files.
// Exit codes: 0 success, 2 usage/config error, 3 numerical failure.

#include "ngmvlvm/data.hpp"
#include "ngmvlvm/elbo.hpp"
#include "ngmvlvm/eval.hpp"
#include "ngmvlvm/kernels.hpp"
#include "ngmvlvm/model.hpp"
#include "ngmvlvm/rff.hpp"
#include "ngmvlvm/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Dense>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ngmvlvm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

constexpr std::uint64_t kKernelCheckStream = 0x6b63;  // "kc"

struct GlobalOptions {
    std::uint64_t seed = 0;
    std::string config_path;
    std::string out_dir = ".";
    int threads = 1;
};

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("--config", "cannot open config file: " + path);
    json j;
    in >> j;
    return j;
}

/// Precedence: explicit flag > config-file value > built-in default.
template <typename T>
void maybe_from_config(const json& cfg, const char* key, const CLI::Option* opt, T& value) {
    if (opt->count() == 0 && cfg.contains(key)) value = cfg.at(key).get<T>();
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_elbo_trace(const std::string& path, const std::vector<double>& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace: " + path);
    out << "iter,elbo\n";
    for (std::size_t i = 0; i < history.size(); ++i)
        out << i << "," << format_g17(history[i]) << "\n";
}

// ---------------------------------------------------------------- synth ----

struct SynthOptions {
    std::string variant = "A";  // A = rbf/rbf, B = rbf/gibbs
    Eigen::Index n = 150;
    Eigen::Index m = 10;
    double noise_std = 0.1;
    double missing_frac = 0.0;
};

int run_synth(const GlobalOptions& g, const SynthOptions& opt) {
    if (opt.variant != "A" && opt.variant != "B")
        throw CLI::ValidationError("--config", "must be A (rbf/rbf) or B (rbf/gibbs)");
    fs::create_directories(g.out_dir);

    const Eigen::MatrixXd latents = make_s_curve_latents(opt.n, g.seed);
    SyntheticSpec spec;
    spec.n = opt.n;
    spec.seed = g.seed;
    spec.kernels = {KernelSpec{RbfKernel{}},
                    opt.variant == "A" ? KernelSpec{RbfKernel{}} : KernelSpec{GibbsKernel{}}};
    spec.view_dims = {opt.m, opt.m};
    spec.noise_std = {opt.noise_std, opt.noise_std};
    MultiViewDataset data = sample_gp_views(latents, spec);

    DataManifest manifest;
    manifest.n = opt.n;
    manifest.noise_std = opt.noise_std;
    manifest.missing_frac = opt.missing_frac;
    manifest.seed = g.seed;
    manifest.kernels = {"rbf", opt.variant == "A" ? "rbf" : "gibbs"};
    manifest.latents_file = "latents.csv";
    save_matrix_csv(join_path(g.out_dir, "latents.csv"), latents);

    if (opt.missing_frac > 0.0) {
        for (std::size_t v = 0; v < data.views.size(); ++v) {
            const std::string name = "view" + std::to_string(v) + "_full.csv";
            save_matrix_csv(join_path(g.out_dir, name), data.views[v]);
            manifest.truth_view_files.push_back(name);
        }
        apply_random_mask(data, opt.missing_frac, g.seed);
    }
    for (std::size_t v = 0; v < data.views.size(); ++v) {
        const std::string name = "view" + std::to_string(v) + ".csv";
        const BoolMask* mask =
            data.has_mask(static_cast<Eigen::Index>(v)) ? &data.masks[v] : nullptr;
        save_matrix_csv(join_path(g.out_dir, name), data.views[v], mask);
        manifest.view_files.push_back(name);
        manifest.view_dims.push_back(data.views[v].cols());
    }
    save_manifest(join_path(g.out_dir, "manifest.json"), manifest);
    std::cout << "wrote " << data.views.size() << " views (config " << opt.variant
              << ", n=" << opt.n << ") to " << g.out_dir << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- train ----

struct TrainOptions {
    std::string data_path;
    TrainConfig config;
    bool label_view = false;
};

int run_train(const GlobalOptions& g, const TrainOptions& opt) {
    fs::create_directories(g.out_dir);
    MultiViewDataset data = load_dataset(opt.data_path);
    if (opt.label_view) {
        if (data.labels.empty())
            throw CLI::ValidationError("--label-view", "dataset has no labels");
        data = append_label_view(data, data.labels);
    }
    TrainConfig config = opt.config;
    config.seed = g.seed;
    const ModelState model = train(data, config);

    save_model(join_path(g.out_dir, "model.json"), model);
    write_elbo_trace(join_path(g.out_dir, "elbo_trace.csv"), model.elbo_history);
    std::cout << "trained " << model.elbo_history.size() << " iterations, final ELBO "
              << format_g17(model.elbo_history.back()) << "\n";
    return kExitOk;
}

// ----------------------------------------------------------------- eval ----

struct EvalOptions {
    std::string model_path;
    std::string data_path;
    std::vector<std::string> metrics{"knn"};
    int k = 1;
    int folds = 5;
    std::vector<std::string> prediction_files;  // mse against these instead of reconstructing
};

int run_eval(const GlobalOptions& g, const EvalOptions& opt) {
    fs::create_directories(g.out_dir);
    const ModelState model = load_model(opt.model_path);
    const MultiViewDataset data = load_dataset(opt.data_path);
    const Eigen::MatrixXd latents = latent_mean(model);

    for (const std::string& metric : opt.metrics) {
        if (metric == "knn") {
            if (data.labels.empty())
                throw CLI::ValidationError("--metrics", "knn requires labels in the dataset");
            EvalReport report = knn_cv_accuracy(latents, data.labels, opt.k, opt.folds, g.seed);
            save_report_json(join_path(g.out_dir, "report_knn.json"), report);
            save_report_csv(join_path(g.out_dir, "report_knn.csv"), report);
            std::cout << "knn accuracy mean " << report.mean << " (std " << report.stddev << ")\n";
        } else if (metric == "r2") {
            const auto truth = load_manifest_latents(opt.data_path);
            if (!truth)
                throw CLI::ValidationError("--metrics",
                                           "r2 requires ground-truth latents in the manifest");
            // Alignment direction: predict the ground truth from the learned code.
            EvalReport report =
                EvalReport::from_values("r2_alignment", {r2_alignment(latents, *truth)},
                                        json{{"direction", "learned_to_true"}});
            save_report_json(join_path(g.out_dir, "report_r2.json"), report);
            save_report_csv(join_path(g.out_dir, "report_r2.csv"), report);
            std::cout << "r2 alignment " << report.mean << "\n";
        } else if (metric == "mse") {
            std::vector<Eigen::MatrixXd> y_hat;
            if (opt.prediction_files.empty()) {
                y_hat = reconstruct(model, data);
            } else {
                if (opt.prediction_files.size() != data.views.size())
                    throw CLI::ValidationError("--predictions", "need one file per view");
                for (const auto& path : opt.prediction_files)
                    y_hat.push_back(load_matrix_csv(path));
            }
            std::vector<double> values;
            for (std::size_t v = 0; v < y_hat.size(); ++v)
                values.push_back(mse(data.views[v], y_hat[v]));
            EvalReport report = EvalReport::from_values("reconstruction_mse", std::move(values),
                                                        json{{"per", "view"}});
            save_report_json(join_path(g.out_dir, "report_mse.json"), report);
            save_report_csv(join_path(g.out_dir, "report_mse.csv"), report);
            std::cout << "reconstruction mse mean " << report.mean << "\n";
        } else {
            throw CLI::ValidationError("--metrics", "unknown metric: " + metric);
        }
    }
    return kExitOk;
}

// --------------------------------------------------------------- impute ----

struct ImputeOptions {
    std::string model_path;
    std::string data_path;
    Eigen::Index draws = 0;  // 0 = model default
};

int run_impute(const GlobalOptions& g, const ImputeOptions& opt) {
    fs::create_directories(g.out_dir);
    const ModelState model = load_model(opt.model_path);
    const MultiViewDataset data = load_dataset(opt.data_path);
    const auto filled = impute(model, data, opt.draws);
    for (std::size_t v = 0; v < filled.size(); ++v)
        save_matrix_csv(join_path(g.out_dir, "view" + std::to_string(v) + "_filled.csv"),
                        filled[v]);

    // Masked-entry MSE against ground truth when the manifest carries it,
    // with the column-mean baseline for reference.
    const auto truth = load_manifest_truth_views(opt.data_path);
    if (!truth.empty() && data.any_missing()) {
        std::vector<double> model_mse, baseline_mse;
        for (std::size_t v = 0; v < filled.size() && v < truth.size(); ++v) {
            if (!data.has_mask(static_cast<Eigen::Index>(v))) continue;
            const BoolMask& mask = data.masks[v];
            if (!mask.any()) continue;
            model_mse.push_back(mse(truth[v], filled[v], &mask));
            Eigen::MatrixXd base = data.views[v];
            for (Eigen::Index c = 0; c < base.cols(); ++c) {
                double sum = 0.0;
                Eigen::Index count = 0;
                for (Eigen::Index r = 0; r < base.rows(); ++r)
                    if (!mask(r, c)) {
                        sum += base(r, c);
                        ++count;
                    }
                const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
                for (Eigen::Index r = 0; r < base.rows(); ++r)
                    if (mask(r, c)) base(r, c) = mean;
            }
            baseline_mse.push_back(mse(truth[v], base, &mask));
        }
        EvalReport report = EvalReport::from_values("imputation_mse", model_mse,
                                                    json{{"baseline_column_mean", baseline_mse}});
        save_report_json(join_path(g.out_dir, "report_impute.json"), report);
        save_report_csv(join_path(g.out_dir, "report_impute.csv"), report);
        std::cout << "imputation mse mean " << report.mean << "\n";
    }
    std::cout << "wrote " << filled.size() << " filled views to " << g.out_dir << "\n";
    return kExitOk;
}

// --------------------------------------------------------- kernel-check ----

struct KernelCheckOptions {
    Eigen::Index q = 2;
    Eigen::Index d = 2;
    Eigen::Index n = 30;
    Eigen::Index seeds = 20;
    std::vector<Eigen::Index> l_values{64, 256, 1024, 4096};
    Eigen::Index moment_draws = 100000;
};

SpectralMixtureParams random_mixture(Eigen::Index q, Eigen::Index d, RngStream& rng) {
    SpectralMixtureParams p;
    p.alpha = Eigen::VectorXd::NullaryExpr(q, [&](Eigen::Index) { return 0.3 + rng.uniform(); });
    p.mu1 = rng.normal_matrix(q, d);
    p.mu2 = rng.normal_matrix(q, d);
    p.sigma1_sq = Eigen::MatrixXd::NullaryExpr(
        q, d, [&](Eigen::Index, Eigen::Index) { return 0.2 + rng.uniform(); });
    p.sigma2_sq = Eigen::MatrixXd::NullaryExpr(
        q, d, [&](Eigen::Index, Eigen::Index) { return 0.2 + rng.uniform(); });
    p.rho = Eigen::VectorXd::NullaryExpr(q, [&](Eigen::Index) { return 1.8 * rng.uniform() - 0.9; });
    return p;
}

int run_kernel_check(const GlobalOptions& g, const KernelCheckOptions& opt) {
    fs::create_directories(g.out_dir);
    RngStream setup(derive_seed(g.seed, {kKernelCheckStream, 1}));
    const SpectralMixtureParams params = random_mixture(opt.q, opt.d, setup);
    const Eigen::MatrixXd x = setup.normal_matrix(opt.n, opt.d);
    const Eigen::MatrixXd k_exact = ngsm_gram(x, params);
    const double k_norm = k_exact.operatorNorm();

    std::ofstream table(join_path(g.out_dir, "kernel_check.csv"));
    table << "L,seed,spec_norm_err,bound,eps_at_half\n";
    for (const Eigen::Index l : opt.l_values) {
        const double eps_half = error_eps_at(0.5, opt.n, l, opt.q, params.alpha, k_norm);
        std::vector<double> errors(static_cast<std::size_t>(opt.seeds));
        parallel_for(opt.seeds, [&](Eigen::Index s) {
            RngStream rng(derive_seed(g.seed, {kKernelCheckStream, 2, static_cast<std::uint64_t>(l),
                                               static_cast<std::uint64_t>(s)}));
            const SpectralSample sample = sample_spectral_points(params, l, rng);
            const Eigen::MatrixXd phi = feature_matrix(x, sample, params);
            errors[static_cast<std::size_t>(s)] = (phi * phi.transpose() - k_exact).operatorNorm();
        });
        for (Eigen::Index s = 0; s < opt.seeds; ++s) {
            const double err = errors[static_cast<std::size_t>(s)];
            table << l << "," << s << "," << format_g17(err) << ","
                  << format_g17(error_bound(opt.n, l, opt.q, params.alpha, k_norm, err)) << ","
                  << format_g17(eps_half) << "\n";
        }
    }
    table.close();

    // Sampler moment report: empirical vs target first/second moments.
    std::ofstream moments(join_path(g.out_dir, "moments.csv"));
    moments << "component,dim,statistic,target,empirical\n";
    RngStream rng(derive_seed(g.seed, {kKernelCheckStream, 3}));
    const Eigen::Index reps = opt.moment_draws;
    for (Eigen::Index q = 0; q < opt.q; ++q) {
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(2, opt.d);
        Eigen::MatrixXd sq_sums = Eigen::MatrixXd::Zero(2, opt.d);
        Eigen::VectorXd cross = Eigen::VectorXd::Zero(opt.d);
        for (Eigen::Index rep = 0; rep < reps; ++rep) {
            const SpectralSample s = sample_spectral_points(params, 2, rng);
            const auto qi = static_cast<std::size_t>(q);
            sums.row(0) += s.w1[qi].row(0);
            sums.row(1) += s.w2[qi].row(0);
            sq_sums.row(0) += s.w1[qi].row(0).array().square().matrix();
            sq_sums.row(1) += s.w2[qi].row(0).array().square().matrix();
            cross += (s.w1[qi].row(0).array() * s.w2[qi].row(0).array()).matrix().transpose();
        }
        const double inv = 1.0 / static_cast<double>(reps);
        for (Eigen::Index j = 0; j < opt.d; ++j) {
            const double m1 = sums(0, j) * inv;
            const double m2 = sums(1, j) * inv;
            moments << q << "," << j << ",mean_w1," << format_g17(params.mu1(q, j)) << ","
                    << format_g17(m1) << "\n";
            moments << q << "," << j << ",mean_w2," << format_g17(params.mu2(q, j)) << ","
                    << format_g17(m2) << "\n";
            moments << q << "," << j << ",var_w1," << format_g17(params.sigma1_sq(q, j)) << ","
                    << format_g17(sq_sums(0, j) * inv - m1 * m1) << "\n";
            moments << q << "," << j << ",var_w2," << format_g17(params.sigma2_sq(q, j)) << ","
                    << format_g17(sq_sums(1, j) * inv - m2 * m2) << "\n";
            const double target_cov = params.rho(q) * std::sqrt(params.sigma1_sq(q, j)) *
                                      std::sqrt(params.sigma2_sq(q, j));
            moments << q << "," << j << ",cov_w1_w2," << format_g17(target_cov) << ","
                    << format_g17(cross(j) * inv - m1 * m2) << "\n";
        }
    }
    std::cout << "wrote kernel_check.csv and moments.csv to " << g.out_dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-view spectral mixture latent variable model toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    GlobalOptions g;
    app.add_option("--seed", g.seed, "Master RNG seed")->capture_default_str();
    app.add_option("--config", g.config_path, "JSON config file path");
    app.add_option("--out", g.out_dir, "Output directory")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")->capture_default_str();

    SynthOptions synth_opt;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic two-view S-curve dataset");
    auto* variant_opt = synth->add_option("--config", synth_opt.variant,
                                          "Kernel configuration: A (rbf/rbf) or B (rbf/gibbs)")
                            ->capture_default_str();
    auto* synth_n = synth->add_option("--n", synth_opt.n, "Data points")->capture_default_str();
    auto* synth_m =
        synth->add_option("--m", synth_opt.m, "Output dims per view")->capture_default_str();
    auto* synth_noise = synth->add_option("--noise", synth_opt.noise_std, "Observation noise std")
                            ->capture_default_str();
    auto* synth_missing = synth->add_option("--missing-frac", synth_opt.missing_frac,
                                            "Fraction of entries to mask")
                              ->capture_default_str();

    TrainOptions train_opt;
    auto* train_cmd = app.add_subcommand("train", "Train the model on a dataset manifest");
    train_cmd->add_option("--data", train_opt.data_path, "Dataset manifest path")->required();
    auto* t_q =
        train_cmd->add_option("--q", train_opt.config.q, "Mixture components")->capture_default_str();
    auto* t_l = train_cmd->add_option("--l", train_opt.config.l,
                                      "Feature dimension per component (even; L/2 pairs)")
                    ->capture_default_str();
    auto* t_d =
        train_cmd->add_option("--d", train_opt.config.d, "Latent dimension")->capture_default_str();
    auto* t_i = train_cmd->add_option("--mc-samples", train_opt.config.mc_samples,
                                      "MC samples per ELBO evaluation")
                    ->capture_default_str();
    auto* t_iters = train_cmd->add_option("--iters", train_opt.config.max_iters, "Max iterations")
                        ->capture_default_str();
    auto* t_lr =
        train_cmd->add_option("--lr", train_opt.config.lr, "Adam learning rate")->capture_default_str();
    auto* t_b1 =
        train_cmd->add_option("--beta1", train_opt.config.beta1, "Adam beta1")->capture_default_str();
    auto* t_b2 =
        train_cmd->add_option("--beta2", train_opt.config.beta2, "Adam beta2")->capture_default_str();
    auto* t_tol =
        train_cmd
            ->add_option("--tol", train_opt.config.conv_tol,
                         "Relative moving-average convergence tolerance (<=0 disables)")
            ->capture_default_str();
    auto* t_draws = train_cmd->add_option("--feature-draws", train_opt.config.n_feature_draws,
                                          "Feature draws for reconstruct/impute")
                        ->capture_default_str();
    train_cmd->add_flag("--label-view", train_opt.label_view,
                        "Append a one-hot label view from the manifest labels");

    EvalOptions eval_opt;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model");
    eval_cmd->add_option("--model", eval_opt.model_path, "Model JSON path")->required();
    eval_cmd->add_option("--data", eval_opt.data_path, "Dataset manifest path")->required();
    eval_cmd->add_option("--metrics", eval_opt.metrics, "Metrics: knn, r2, mse")
        ->delimiter(',')
        ->capture_default_str();
    eval_cmd->add_option("--k", eval_opt.k, "KNN neighbors")->capture_default_str();
    eval_cmd->add_option("--folds", eval_opt.folds, "Cross-validation folds")->capture_default_str();
    eval_cmd->add_option("--predictions", eval_opt.prediction_files,
                         "Prediction CSVs (one per view) for mse instead of reconstructing")
        ->delimiter(',');

    ImputeOptions impute_opt;
    auto* impute_cmd = app.add_subcommand("impute", "Fill missing entries of a masked dataset");
    impute_cmd->add_option("--model", impute_opt.model_path, "Model JSON path")->required();
    impute_cmd->add_option("--data", impute_opt.data_path, "Dataset manifest path")->required();
    impute_cmd->add_option("--draws", impute_opt.draws, "Feature draws (0 = model default)")
        ->capture_default_str();

    KernelCheckOptions kc_opt;
    auto* kc_cmd = app.add_subcommand(
        "kernel-check", "Closed-form vs RFF diagnostics and sampler moment report");
    kc_cmd->add_option("--q", kc_opt.q, "Mixture components")->capture_default_str();
    kc_cmd->add_option("--d", kc_opt.d, "Input dimension")->capture_default_str();
    kc_cmd->add_option("--n", kc_opt.n, "Gram matrix size")->capture_default_str();
    kc_cmd->add_option("--seeds", kc_opt.seeds, "Feature draws per L")->capture_default_str();
    kc_cmd->add_option("--l-values", kc_opt.l_values, "Feature dimensions to test")
        ->delimiter(',')
        ->capture_default_str();
    kc_cmd->add_option("--moment-draws", kc_opt.moment_draws, "Draws for the moment report")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        const json cfg = load_config_file(g.config_path);
        set_num_threads(g.threads);

        if (app.got_subcommand(synth)) {
            maybe_from_config(cfg, "variant", variant_opt, synth_opt.variant);
            maybe_from_config(cfg, "n", synth_n, synth_opt.n);
            maybe_from_config(cfg, "m", synth_m, synth_opt.m);
            maybe_from_config(cfg, "noise", synth_noise, synth_opt.noise_std);
            maybe_from_config(cfg, "missing_frac", synth_missing, synth_opt.missing_frac);
            return run_synth(g, synth_opt);
        }
        if (app.got_subcommand(train_cmd)) {
            maybe_from_config(cfg, "q", t_q, train_opt.config.q);
            maybe_from_config(cfg, "l", t_l, train_opt.config.l);
            maybe_from_config(cfg, "d", t_d, train_opt.config.d);
            maybe_from_config(cfg, "mc_samples", t_i, train_opt.config.mc_samples);
            maybe_from_config(cfg, "iters", t_iters, train_opt.config.max_iters);
            maybe_from_config(cfg, "lr", t_lr, train_opt.config.lr);
            maybe_from_config(cfg, "beta1", t_b1, train_opt.config.beta1);
            maybe_from_config(cfg, "beta2", t_b2, train_opt.config.beta2);
            maybe_from_config(cfg, "tol", t_tol, train_opt.config.conv_tol);
            maybe_from_config(cfg, "feature_draws", t_draws, train_opt.config.n_feature_draws);
            return run_train(g, train_opt);
        }
        if (app.got_subcommand(eval_cmd)) return run_eval(g, eval_opt);
        if (app.got_subcommand(impute_cmd)) return run_impute(g, impute_opt);
        if (app.got_subcommand(kc_cmd)) return run_kernel_check(g, kc_opt);
        std::cerr << "no subcommand given\n";
        return kExitUsage;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
