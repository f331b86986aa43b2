// Python bindings for the multi-view spectral mixture latent variable model.

#include "ngmvlvm/data.hpp"
#include "ngmvlvm/elbo.hpp"
#include "ngmvlvm/eval.hpp"
#include "ngmvlvm/kernels.hpp"
#include "ngmvlvm/model.hpp"
#include "ngmvlvm/rff.hpp"
#include "ngmvlvm/rng.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>

namespace py = pybind11;
using namespace ngmvlvm;

namespace {

MultiViewDataset dataset_from_python(const std::vector<Eigen::MatrixXd>& views,
                                     const std::optional<std::vector<Eigen::MatrixXd>>& masks,
                                     const std::optional<std::vector<int>>& labels) {
    MultiViewDataset data;
    data.views = views;
    data.masks.resize(views.size());
    if (masks) {
        if (masks->size() != views.size())
            throw std::invalid_argument("masks must match the number of views");
        for (std::size_t v = 0; v < views.size(); ++v) {
            const Eigen::MatrixXd& m = (*masks)[v];
            if (m.size() == 0) continue;
            BoolMask mask = m.array() != 0.0;
            for (Eigen::Index r = 0; r < mask.rows(); ++r)
                for (Eigen::Index c = 0; c < mask.cols(); ++c)
                    if (mask(r, c)) data.views[v](r, c) = 0.0;
            data.masks[v] = std::move(mask);
        }
    }
    if (labels) data.labels = *labels;
    data.validate();
    return data;
}

TrainConfig config_from_kwargs(Eigen::Index q, Eigen::Index l, Eigen::Index d,
                               Eigen::Index mc_samples, long max_iters, double lr, double beta1,
                               double beta2, double conv_tol, std::uint64_t seed) {
    TrainConfig config;
    config.q = q;
    config.l = l;
    config.d = d;
    config.mc_samples = mc_samples;
    config.max_iters = max_iters;
    config.lr = lr;
    config.beta1 = beta1;
    config.beta2 = beta2;
    config.conv_tol = conv_tol;
    config.seed = seed;
    return config;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-view spectral mixture latent variable model (C++ core)";

    py::class_<SpectralMixtureParams>(m, "SpectralMixtureParams")
        .def(py::init([](const Eigen::VectorXd& alpha, const Eigen::MatrixXd& mu1,
                         const Eigen::MatrixXd& mu2, const Eigen::MatrixXd& sigma1_sq,
                         const Eigen::MatrixXd& sigma2_sq, const Eigen::VectorXd& rho) {
                 SpectralMixtureParams p{alpha, mu1, mu2, sigma1_sq, sigma2_sq, rho};
                 p.validate();
                 return p;
             }),
             py::arg("alpha"), py::arg("mu1"), py::arg("mu2"), py::arg("sigma1_sq"),
             py::arg("sigma2_sq"), py::arg("rho"))
        .def_readonly("alpha", &SpectralMixtureParams::alpha)
        .def_readonly("mu1", &SpectralMixtureParams::mu1)
        .def_readonly("mu2", &SpectralMixtureParams::mu2)
        .def_readonly("sigma1_sq", &SpectralMixtureParams::sigma1_sq)
        .def_readonly("sigma2_sq", &SpectralMixtureParams::sigma2_sq)
        .def_readonly("rho", &SpectralMixtureParams::rho);

    m.def("ngsm_kernel", &ngsm_kernel, py::arg("x1"), py::arg("x2"), py::arg("params"),
          "Closed-form kernel value.");
    m.def("ngsm_gram", &ngsm_gram, py::arg("x"), py::arg("params"), "Exact kernel matrix.");
    m.def("ngsm_spectral_density", &ngsm_spectral_density, py::arg("w1"), py::arg("w2"),
          py::arg("params"));
    m.def(
        "feature_matrix",
        [](const Eigen::MatrixXd& x, const SpectralMixtureParams& params, Eigen::Index l,
           std::uint64_t seed) {
            RngStream rng(seed);
            return feature_matrix(x, sample_spectral_points(params, l, rng), params);
        },
        py::arg("x"), py::arg("params"), py::arg("l"), py::arg("seed"),
        "Random feature matrix from a fresh spectral draw.");
    m.def("error_bound", &error_bound, py::arg("n"), py::arg("l"), py::arg("q"), py::arg("alphas"),
          py::arg("k_norm"), py::arg("eps"));

    m.def("make_s_curve_latents", &make_s_curve_latents, py::arg("n"), py::arg("seed"),
          py::arg("jitter") = 0.01);
    m.def(
        "sample_two_view_s_curve",
        [](Eigen::Index n, bool gibbs_second_view, Eigen::Index m, double noise_std,
           std::uint64_t seed) {
            const Eigen::MatrixXd latents = make_s_curve_latents(n, seed);
            SyntheticSpec spec;
            spec.n = n;
            spec.kernels = {KernelSpec{RbfKernel{}}, gibbs_second_view
                                                         ? KernelSpec{GibbsKernel{}}
                                                         : KernelSpec{RbfKernel{}}};
            spec.view_dims = {m, m};
            spec.noise_std = {noise_std, noise_std};
            spec.seed = seed;
            const MultiViewDataset data = sample_gp_views(latents, spec);
            return py::make_tuple(data.views, latents);
        },
        py::arg("n"), py::arg("gibbs_second_view") = false, py::arg("m") = 10,
        py::arg("noise_std") = 0.1, py::arg("seed") = 0,
        "Synthetic two-view dataset over an S-shaped latent; returns (views, latents).");

    py::class_<ModelState>(m, "ModelState")
        .def_property_readonly("trained", [](const ModelState& s) { return s.trained; })
        .def_property_readonly("elbo_history",
                               [](const ModelState& s) { return s.elbo_history; })
        .def_property_readonly("latent_mean", [](const ModelState& s) { return latent_mean(s); })
        .def("save", [](const ModelState& s, const std::string& path) { save_model(path, s); },
             py::arg("path"))
        .def_static("load", [](const std::string& path) { return load_model(path); },
                    py::arg("path"));

    m.def(
        "train",
        [](const std::vector<Eigen::MatrixXd>& views,
           const std::optional<std::vector<Eigen::MatrixXd>>& masks,
           const std::optional<std::vector<int>>& labels, Eigen::Index q, Eigen::Index l,
           Eigen::Index d, Eigen::Index mc_samples, long max_iters, double lr, double beta1,
           double beta2, double conv_tol, std::uint64_t seed) {
            return train(dataset_from_python(views, masks, labels),
                         config_from_kwargs(q, l, d, mc_samples, max_iters, lr, beta1, beta2,
                                            conv_tol, seed));
        },
        py::arg("views"), py::arg("masks") = std::nullopt, py::arg("labels") = std::nullopt,
        py::arg("q") = 2, py::arg("l") = 100, py::arg("d") = 2, py::arg("mc_samples") = 1,
        py::arg("max_iters") = 10000, py::arg("lr") = 0.01, py::arg("beta1") = 0.9,
        py::arg("beta2") = 0.99, py::arg("conv_tol") = 1e-4, py::arg("seed") = 0,
        "Train on a list of (N x M_v) views; returns a ModelState.");

    m.def(
        "reconstruct",
        [](const ModelState& model, const std::vector<Eigen::MatrixXd>& views,
           Eigen::Index n_feature_draws) {
            return reconstruct(model, dataset_from_python(views, std::nullopt, std::nullopt),
                               n_feature_draws);
        },
        py::arg("model"), py::arg("views"), py::arg("n_feature_draws") = 0);

    m.def(
        "impute",
        [](const ModelState& model, const std::vector<Eigen::MatrixXd>& views,
           const std::vector<Eigen::MatrixXd>& masks, Eigen::Index n_feature_draws) {
            return impute(model, dataset_from_python(views, masks, std::nullopt),
                          n_feature_draws);
        },
        py::arg("model"), py::arg("views"), py::arg("masks"), py::arg("n_feature_draws") = 0);

    m.def(
        "knn_cv_accuracy",
        [](const Eigen::MatrixXd& x, const std::vector<int>& labels, int k, int folds,
           std::uint64_t seed) {
            const EvalReport report = knn_cv_accuracy(x, labels, k, folds, seed);
            return py::make_tuple(report.mean, report.stddev, report.values);
        },
        py::arg("x"), py::arg("labels"), py::arg("k") = 1, py::arg("folds") = 5,
        py::arg("seed") = 0, "Returns (mean, stddev, per-fold accuracies).");
    m.def("r2_alignment", &r2_alignment, py::arg("x_learned"), py::arg("x_true"));
    m.def(
        "mse",
        [](const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat) { return mse(y, y_hat); },
        py::arg("y"), py::arg("y_hat"));
}
