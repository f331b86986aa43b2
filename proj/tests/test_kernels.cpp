#include "ngmvlvm/kernels.hpp"
#include "ngmvlvm/rng.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace ngmvlvm;
using ngmvlvm::testing::min_eigenvalue;
using ngmvlvm::testing::random_mixture;

TEST_CASE("ngsm kernel at zero inputs equals the weight sum") {
    RngStream rng(11);
    for (int rep = 0; rep < 5; ++rep) {
        const Eigen::Index d = 1 + rep % 3;
        const SpectralMixtureParams p = random_mixture(1 + rep, d, rng);
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
        CHECK(ngsm_kernel(zero, zero, p) == doctest::Approx(p.alpha.sum()).epsilon(1e-14));
    }
}

TEST_CASE("ngsm kernel collapses to the stationary SM kernel") {
    // rho = 1, mu1 = mu2, sigma1 = sigma2 makes every term stationary.
    RngStream rng(12);
    for (int rep = 0; rep < 3; ++rep) {
        SpectralMixtureParams p = random_mixture(2, 2, rng);
        p.mu2 = p.mu1;
        p.sigma2_sq = p.sigma1_sq;
        p.rho.setOnes();

        SmKernel sm;
        sm.weights = p.alpha;
        sm.mu = p.mu1;
        sm.sigma_sq = p.sigma1_sq;

        for (int pair = 0; pair < 20; ++pair) {
            const Eigen::VectorXd x1 = rng.normal_vector(2);
            const Eigen::VectorXd x2 = rng.normal_vector(2);
            const double exact = ngsm_kernel(x1, x2, p);
            const double stationary = reference_kernel(x1, x2, KernelSpec{sm});
            CHECK(std::abs(exact - stationary) <= 1e-10);
        }
    }
}

TEST_CASE("ngsm kernel is exactly symmetric") {
    RngStream rng(13);
    const SpectralMixtureParams p = random_mixture(3, 4, rng);
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::VectorXd x1 = rng.normal_vector(4);
        const Eigen::VectorXd x2 = rng.normal_vector(4);
        CHECK(ngsm_kernel(x1, x2, p) == ngsm_kernel(x2, x1, p));
    }
}

TEST_CASE("ngsm kernel is linear in the mixture weights") {
    RngStream rng(14);
    const Eigen::Index q = 3;
    const SpectralMixtureParams p = random_mixture(q, 2, rng);
    const Eigen::VectorXd x1 = rng.normal_vector(2);
    const Eigen::VectorXd x2 = rng.normal_vector(2);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < q; ++i) {
        SpectralMixtureParams single = p;
        single.alpha = Eigen::VectorXd::Constant(q, 1e-300);  // weights must stay positive
        single.alpha(i) = p.alpha(i);
        sum += ngsm_kernel(x1, x2, single);
    }
    CHECK(std::abs(sum - ngsm_kernel(x1, x2, p)) <= 1e-12);
}

TEST_CASE("ngsm kernel rejects dimension mismatches") {
    RngStream rng(15);
    const SpectralMixtureParams p = random_mixture(1, 3, rng);
    CHECK_THROWS_AS(ngsm_kernel(rng.normal_vector(2), rng.normal_vector(3), p),
                    std::invalid_argument);
}

TEST_CASE("ngsm gram of a single zero point is the weight sum") {
    RngStream rng(16);
    SpectralMixtureParams p = random_mixture(1, 1, rng);
    p.alpha(0) = 3.0;
    Eigen::MatrixXd x(1, 1);
    x << 0.0;
    const Eigen::MatrixXd k = ngsm_gram(x, p);
    CHECK(k.rows() == 1);
    CHECK(k(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("ngsm gram matrices are positive semi-definite") {
    RngStream rng(17);
    for (int rep = 0; rep < 100; ++rep) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform() * 28);
        const SpectralMixtureParams p = random_mixture(1 + rep % 3, 2, rng);
        const Eigen::MatrixXd x = rng.normal_matrix(n, 2);
        const Eigen::MatrixXd k = ngsm_gram(x, p);
        CHECK(min_eigenvalue(k) >= -1e-8 * k.trace());
    }
}

TEST_CASE("ngsm gram repeats rows for duplicated inputs") {
    RngStream rng(18);
    const SpectralMixtureParams p = random_mixture(2, 2, rng);
    Eigen::MatrixXd x = rng.normal_matrix(5, 2);
    x.row(3) = x.row(1);
    const Eigen::MatrixXd k = ngsm_gram(x, p);
    CHECK((k.row(1) - k.row(3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spectral density is symmetric under joint negation") {
    RngStream rng(19);
    const SpectralMixtureParams p = random_mixture(2, 3, rng);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::VectorXd w1 = rng.normal_vector(3);
        const Eigen::VectorXd w2 = rng.normal_vector(3);
        CHECK(ngsm_spectral_density(w1, w2, p) == ngsm_spectral_density(-w1, -w2, p));
        CHECK(ngsm_spectral_density(w1, w2, p) >= 0.0);
    }
}

TEST_CASE("spectral density matches the standard bivariate normal at the origin") {
    SpectralMixtureParams p;
    p.alpha = Eigen::VectorXd::Ones(1);
    p.mu1 = Eigen::MatrixXd::Zero(1, 1);
    p.mu2 = Eigen::MatrixXd::Zero(1, 1);
    p.sigma1_sq = Eigen::MatrixXd::Ones(1, 1);
    p.sigma2_sq = Eigen::MatrixXd::Ones(1, 1);
    p.rho = Eigen::VectorXd::Zero(1);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
    CHECK(ngsm_spectral_density(zero, zero, p) ==
          doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("reference kernels match their analytic values") {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.7);

    SUBCASE("rbf at identical inputs") {
        CHECK(reference_kernel(x, x, KernelSpec{RbfKernel{1.0, 1.0}}) == 1.0);
    }
    SUBCASE("rbf one lengthscale-scaled step away") {
        Eigen::VectorXd x2 = x;
        x2(0) += std::numbers::sqrt2;
        CHECK(reference_kernel(x, x2, KernelSpec{RbfKernel{1.0, 1.0}}) ==
              doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    }
    SUBCASE("gibbs diagonal is one") {
        CHECK(reference_kernel(x, x, KernelSpec{GibbsKernel{}}) == doctest::Approx(1.0));
    }
    SUBCASE("white kernel is an indicator") {
        Eigen::VectorXd x2 = x;
        CHECK(reference_kernel(x, x2, KernelSpec{WhiteKernel{}}) == 1.0);
        x2(1) += 1e-12;
        CHECK(reference_kernel(x, x2, KernelSpec{WhiteKernel{}}) == 0.0);
    }
    SUBCASE("ngsm variant is rejected") {
        RngStream rng(20);
        CHECK_THROWS_AS(reference_kernel(x, x, KernelSpec{random_mixture(1, 2, rng)}),
                        std::invalid_argument);
    }
}

TEST_CASE("parameter validation rejects broken mixtures") {
    RngStream rng(21);
    SpectralMixtureParams p = random_mixture(2, 2, rng);
    SUBCASE("negative weight") {
        p.alpha(0) = -1.0;
        CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    }
    SUBCASE("zero variance") {
        p.sigma1_sq(0, 0) = 0.0;
        CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    }
    SUBCASE("correlation out of range") {
        p.rho(1) = 1.5;
        CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    }
}
