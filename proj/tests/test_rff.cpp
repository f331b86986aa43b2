#include "ngmvlvm/rff.hpp"

#include "ngmvlvm/kernels.hpp"
#include "ngmvlvm/rng.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace ngmvlvm;
using ngmvlvm::testing::min_eigenvalue;
using ngmvlvm::testing::random_mixture;
using ngmvlvm::testing::RunningStat;
using ngmvlvm::testing::spectral_norm;

TEST_CASE("two-step sampler honours the zero-correlation case") {
    RngStream rng(31);
    SpectralMixtureParams p = random_mixture(2, 3, rng);
    p.rho.setZero();
    const SpectralNoise noise = draw_spectral_noise(2, 8, 3, rng);
    const SpectralSample s = sample_spectral_points(p, 8, noise);
    for (Eigen::Index q = 0; q < 2; ++q) {
        const auto qi = static_cast<std::size_t>(q);
        const Eigen::ArrayXXd expected =
            (noise.eps2[qi].array().rowwise() * p.sigma2_sq.row(q).array().sqrt()).rowwise() +
            p.mu2.row(q).array();
        CHECK((s.w2[qi].array() - expected).abs().maxCoeff() <= 1e-15);
    }
}

TEST_CASE("two-step sampler is deterministic given w1 at full correlation") {
    RngStream rng(32);
    SpectralMixtureParams p = random_mixture(1, 2, rng);
    p.rho(0) = 1.0;  // allowed in sampling
    const SpectralNoise noise = draw_spectral_noise(1, 6, 2, rng);
    const SpectralSample s = sample_spectral_points(p, 6, noise);
    const Eigen::Array<double, 1, Eigen::Dynamic> ratio =
        p.sigma2_sq.row(0).array().sqrt() / p.sigma1_sq.row(0).array().sqrt();
    const Eigen::ArrayXXd expected =
        ((s.w1[0].array().rowwise() - p.mu1.row(0).array()).rowwise() * ratio).rowwise() +
        p.mu2.row(0).array();
    CHECK((s.w2[0].array() - expected).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("two-step sampler reproduces the target moments") {
    // Monte-Carlo moment oracle: mean and covariance of (w1, w2) against the
    // mixture component's parameters, three standard errors at 1e5 draws.
    SpectralMixtureParams p;
    p.alpha = Eigen::VectorXd::Ones(1);
    p.mu1 = (Eigen::MatrixXd(1, 2) << 1.0, 0.0).finished();
    p.mu2 = (Eigen::MatrixXd(1, 2) << 0.0, -1.0).finished();
    p.sigma1_sq = (Eigen::MatrixXd(1, 2) << 1.0, 2.0).finished();
    p.sigma2_sq = (Eigen::MatrixXd(1, 2) << 2.0, 1.0).finished();
    p.rho = Eigen::VectorXd::Constant(1, 0.6);

    const Eigen::Index n = 100000;
    RngStream rng(33);
    Eigen::MatrixXd draws(n, 4);  // [w1, w2]
    for (Eigen::Index i = 0; i < n; ++i) {
        const SpectralSample s = sample_spectral_points(p, 2, rng);
        draws(i, 0) = s.w1[0](0, 0);
        draws(i, 1) = s.w1[0](0, 1);
        draws(i, 2) = s.w2[0](0, 0);
        draws(i, 3) = s.w2[0](0, 1);
    }
    Eigen::Vector4d target_mean;
    target_mean << 1.0, 0.0, 0.0, -1.0;
    Eigen::Matrix4d target_cov = Eigen::Matrix4d::Zero();
    target_cov(0, 0) = 1.0;
    target_cov(1, 1) = 2.0;
    target_cov(2, 2) = 2.0;
    target_cov(3, 3) = 1.0;
    target_cov(0, 2) = target_cov(2, 0) = 0.6 * std::sqrt(1.0 * 2.0);
    target_cov(1, 3) = target_cov(3, 1) = 0.6 * std::sqrt(2.0 * 1.0);

    const Eigen::Vector4d mean = draws.colwise().mean();
    for (int j = 0; j < 4; ++j) {
        const double se = std::sqrt(target_cov(j, j) / static_cast<double>(n));
        CHECK(std::abs(mean(j) - target_mean(j)) <= 3.0 * se);
    }
    const Eigen::MatrixXd centered = draws.rowwise() - mean.transpose();
    const Eigen::Matrix4d cov =
        (centered.transpose() * centered) / static_cast<double>(n - 1);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            const double se = std::sqrt(
                (target_cov(a, a) * target_cov(b, b) + target_cov(a, b) * target_cov(a, b)) /
                static_cast<double>(n));
            CHECK(std::abs(cov(a, b) - target_cov(a, b)) <= 3.0 * se);
        }
}

TEST_CASE("sampler rejects odd feature counts and bad variances") {
    RngStream rng(34);
    SpectralMixtureParams p = random_mixture(1, 2, rng);
    CHECK_THROWS_AS(sample_spectral_points(p, 5, rng), std::invalid_argument);
    p.sigma1_sq(0, 0) = -0.5;
    CHECK_THROWS_AS(sample_spectral_points(p, 4, rng), std::invalid_argument);
}

TEST_CASE("regenerating a sample from its stored noise is exact") {
    RngStream rng(35);
    const SpectralMixtureParams p = random_mixture(2, 2, rng);
    const SpectralSample s = sample_spectral_points(p, 10, rng);
    const SpectralSample again = sample_spectral_points(p, 10, s.noise);
    for (std::size_t q = 0; q < 2; ++q) {
        CHECK((s.w1[q] - again.w1[q]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((s.w2[q] - again.w2[q]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("identical seeds give bitwise-identical samples and features") {
    const SpectralMixtureParams p = [] {
        RngStream rng(36);
        return random_mixture(2, 2, rng);
    }();
    RngStream a(1234), b(1234);
    const SpectralSample sa = sample_spectral_points(p, 16, a);
    const SpectralSample sb = sample_spectral_points(p, 16, b);
    RngStream xr(77);
    const Eigen::MatrixXd x = xr.normal_matrix(7, 2);
    const Eigen::MatrixXd fa = feature_matrix(x, sa, p);
    const Eigen::MatrixXd fb = feature_matrix(x, sb, p);
    CHECK((fa - fb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("feature map at zero input") {
    RngStream rng(37);
    const Eigen::MatrixXd w1 = rng.normal_matrix(4, 3);
    const Eigen::MatrixXd w2 = rng.normal_matrix(4, 3);
    const Eigen::VectorXd phi = feature_map(Eigen::VectorXd::Zero(3), w1, w2);
    const double expected = 2.0 * std::sqrt(1.0 / 16.0);
    CHECK((phi.head(4).array() - expected).abs().maxCoeff() <= 1e-15);
    CHECK(phi.tail(4).cwiseAbs().maxCoeff() == 0.0);
    CHECK(phi.squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("feature map with identical frequency pairs doubles the basic map") {
    RngStream rng(38);
    const Eigen::MatrixXd w = rng.normal_matrix(5, 2);
    const Eigen::VectorXd x = rng.normal_vector(2);
    const Eigen::VectorXd phi = feature_map(x, w, w);
    const double c = std::sqrt(1.0 / 20.0);
    const Eigen::ArrayXd wx = (w * x).array();
    CHECK((phi.head(5).array() - 2.0 * c * wx.cos()).abs().maxCoeff() <= 1e-15);
    CHECK((phi.tail(5).array() - 2.0 * c * wx.sin()).abs().maxCoeff() <= 1e-15);
}

TEST_CASE("feature map norm never exceeds its analytic bound") {
    RngStream rng(39);
    const Eigen::MatrixXd w1 = rng.normal_matrix(8, 2);
    const Eigen::MatrixXd w2 = rng.normal_matrix(8, 2);
    double max_norm = 0.0;
    for (int rep = 0; rep < 10000; ++rep) {
        const Eigen::VectorXd x = 3.0 * rng.normal_vector(2);
        max_norm = std::max(max_norm, feature_map(x, w1, w2).squaredNorm());
    }
    CHECK(max_norm <= 2.0 + 1e-12);
}

TEST_CASE("stacked feature map composes the per-component maps") {
    RngStream rng(40);
    const SpectralMixtureParams p = random_mixture(3, 2, rng);
    const SpectralSample s = sample_spectral_points(p, 8, rng);

    SUBCASE("zero input norm is the weight sum") {
        const Eigen::VectorXd phi = stacked_feature_map(Eigen::VectorXd::Zero(2), s, p);
        CHECK(phi.size() == 3 * 8);
        CHECK(phi.squaredNorm() == doctest::Approx(p.alpha.sum()).epsilon(1e-12));
    }
    SUBCASE("single unit-weight component reduces to the bare map") {
        SpectralMixtureParams single = random_mixture(1, 2, rng);
        single.alpha(0) = 1.0;
        const SpectralSample ss = sample_spectral_points(single, 8, rng);
        const Eigen::VectorXd x = rng.normal_vector(2);
        const Eigen::VectorXd a = stacked_feature_map(x, ss, single);
        const Eigen::VectorXd b = feature_map(x, ss.w1[0], ss.w2[0]);
        CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("feature products are unbiased for the exact kernel") {
    RngStream rng(41);
    const SpectralMixtureParams p = random_mixture(2, 2, rng);
    const Eigen::VectorXd x1 = rng.normal_vector(2);
    const Eigen::VectorXd x2 = rng.normal_vector(2);
    const double exact = ngsm_kernel(x1, x2, p);

    RunningStat stat;
    for (int rep = 0; rep < 200000; ++rep) {
        const SpectralSample s = sample_spectral_points(p, 2, rng);
        stat.add(stacked_feature_map(x1, s, p).dot(stacked_feature_map(x2, s, p)));
    }
    CHECK(std::abs(stat.mean - exact) <= 3.0 * stat.stderr_mean());
}

TEST_CASE("feature matrix rows equal the stacked map and give a PSD Gram") {
    RngStream rng(42);
    const SpectralMixtureParams p = random_mixture(2, 2, rng);
    const SpectralSample s = sample_spectral_points(p, 8, rng);

    SUBCASE("single row") {
        const Eigen::MatrixXd x = rng.normal_matrix(1, 2);
        const Eigen::MatrixXd f = feature_matrix(x, s, p);
        const Eigen::VectorXd phi = stacked_feature_map(x.row(0).transpose(), s, p);
        CHECK((f.row(0).transpose() - phi).cwiseAbs().maxCoeff() <= 1e-15);
    }
    SUBCASE("gram approximation is PSD") {
        const Eigen::MatrixXd x = rng.normal_matrix(12, 2);
        const Eigen::MatrixXd f = feature_matrix(x, s, p);
        const Eigen::MatrixXd k_hat = f * f.transpose();
        CHECK(min_eigenvalue(k_hat) >= -1e-10 * k_hat.trace());
    }
}

TEST_CASE("gram approximation error decays with the feature count") {
    RngStream rng(43);
    const SpectralMixtureParams p = random_mixture(2, 2, rng);
    const Eigen::MatrixXd x = rng.normal_matrix(15, 2);
    const Eigen::MatrixXd k = ngsm_gram(x, p);
    auto median_error = [&](Eigen::Index l) {
        std::vector<double> errs;
        for (int seed = 0; seed < 9; ++seed) {
            RngStream r(derive_seed(500, {static_cast<std::uint64_t>(l),
                                          static_cast<std::uint64_t>(seed)}));
            const SpectralSample s = sample_spectral_points(p, l, r);
            const Eigen::MatrixXd f = feature_matrix(x, s, p);
            errs.push_back(spectral_norm(f * f.transpose() - k));
        }
        std::nth_element(errs.begin(), errs.begin() + 4, errs.end());
        return errs[4];
    };
    CHECK(median_error(1024) < median_error(16));
}

TEST_CASE("theorem-style error bound behaves as stated") {
    const Eigen::VectorXd alphas = (Eigen::VectorXd(2) << 0.7, 1.3).finished();

    SUBCASE("monotone decreasing in L and eps") {
        double prev = error_bound(30, 32, 2, alphas, 25.0, 4.0);
        for (const Eigen::Index l : {64, 128, 256, 512}) {
            const double b = error_bound(30, l, 2, alphas, 25.0, 4.0);
            CHECK(b < prev);
            prev = b;
        }
        prev = error_bound(30, 256, 2, alphas, 25.0, 0.5);
        for (double eps = 1.0; eps < 20.0; eps += 0.5) {
            const double b = error_bound(30, 256, 2, alphas, 25.0, eps);
            CHECK(b < prev);
            prev = b;
        }
    }
    SUBCASE("eps to zero recovers N") {
        CHECK(error_bound(30, 256, 2, alphas, 25.0, 1e-9) == doctest::Approx(30.0).epsilon(1e-6));
    }
    SUBCASE("nonpositive eps is rejected") {
        CHECK_THROWS_AS(error_bound(30, 256, 2, alphas, 25.0, 0.0), std::invalid_argument);
    }
    SUBCASE("bisection inverts the bound") {
        const double eps = error_eps_at(0.5, 30, 256, 2, alphas, 25.0);
        CHECK(error_bound(30, 256, 2, alphas, 25.0, eps) == doctest::Approx(0.5).epsilon(1e-9));
    }
}

TEST_CASE("empirical concentration stays under the loose bound level") {
    // Over 50 seeds the fraction of errors above eps*(bound = 0.5) must not
    // exceed 0.5 plus slack; the bound is loose so the observed fraction is
    // far smaller.
    RngStream rng(44);
    const SpectralMixtureParams p = random_mixture(2, 2, rng);
    const Eigen::MatrixXd x = rng.normal_matrix(20, 2);
    const Eigen::MatrixXd k = ngsm_gram(x, p);
    const double eps_half = error_eps_at(0.5, 20, 256, 2, p.alpha, spectral_norm(k));
    int exceed = 0;
    for (int seed = 0; seed < 50; ++seed) {
        RngStream r(derive_seed(900, {static_cast<std::uint64_t>(seed)}));
        const SpectralSample s = sample_spectral_points(p, 256, r);
        const Eigen::MatrixXd f = feature_matrix(x, s, p);
        if (spectral_norm(f * f.transpose() - k) >= eps_half) ++exceed;
    }
    CHECK(static_cast<double>(exceed) / 50.0 <= 0.65);
}

TEST_CASE("feature product gradients match finite differences") {
    RngStream rng(45);
    const Eigen::Index q = 2, d = 2;
    const SpectralMixtureParams p = random_mixture(q, d, rng);
    const SpectralNoise noise = draw_spectral_noise(q, 6, d, rng);
    const Eigen::VectorXd x1 = rng.normal_vector(d);
    const Eigen::VectorXd x2 = rng.normal_vector(d);

    const SpectralSample sample = sample_spectral_points(p, 6, noise);
    const SpectralParamGrad grad = feature_product_gradient(x1, x2, p, sample);

    auto product_at = [&](const SpectralMixtureParams& params) {
        const SpectralSample s = sample_spectral_points(params, 6, noise);
        return stacked_feature_map(x1, s, params).dot(stacked_feature_map(x2, s, params));
    };
    auto check_fd = [&](double analytic, auto setter) {
        const double h = 1e-6;
        SpectralMixtureParams up = p, dn = p;
        setter(up, h);
        setter(dn, -h);
        const double fd = (product_at(up) - product_at(dn)) / (2.0 * h);
        CHECK(std::abs(fd - analytic) <= 1e-5 * std::max({1.0, std::abs(fd), std::abs(analytic)}));
    };

    for (Eigen::Index qq = 0; qq < q; ++qq) {
        check_fd(grad.alpha(qq), [&](SpectralMixtureParams& m, double h) { m.alpha(qq) += h; });
        check_fd(grad.rho(qq), [&](SpectralMixtureParams& m, double h) { m.rho(qq) += h; });
        for (Eigen::Index j = 0; j < d; ++j) {
            check_fd(grad.mu1(qq, j), [&](SpectralMixtureParams& m, double h) { m.mu1(qq, j) += h; });
            check_fd(grad.mu2(qq, j), [&](SpectralMixtureParams& m, double h) { m.mu2(qq, j) += h; });
            check_fd(grad.sigma1_sq(qq, j),
                     [&](SpectralMixtureParams& m, double h) { m.sigma1_sq(qq, j) += h; });
            check_fd(grad.sigma2_sq(qq, j),
                     [&](SpectralMixtureParams& m, double h) { m.sigma2_sq(qq, j) += h; });
        }
    }
}
