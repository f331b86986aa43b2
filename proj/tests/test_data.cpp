#include "ngmvlvm/data.hpp"

#include "ngmvlvm/rng.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace ngmvlvm;

namespace {

std::string temp_dir() {
    static int counter = 0;
    const auto dir =
        std::filesystem::temp_directory_path() / ("ngmvlvm_data_test_" + std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("s-curve latents have the documented shape and scale") {
    const Eigen::MatrixXd x = make_s_curve_latents(500, 3);
    CHECK(x.rows() == 500);
    CHECK(x.cols() == 2);
    for (Eigen::Index c = 0; c < 2; ++c) {
        const double sd = std::sqrt((x.col(c).array() - x.col(c).mean()).square().mean());
        CHECK(sd >= 0.9);
        CHECK(sd <= 1.1);
    }
    const Eigen::MatrixXd again = make_s_curve_latents(500, 3);
    CHECK((x - again).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("s-curve latents are centrally symmetric in distribution") {
    const Eigen::Index n = 4000;
    const Eigen::MatrixXd x = make_s_curve_latents(n, 11);
    // Coordinates have unit scale, so the mean's standard error is ~1/sqrt(n).
    const double se = 1.0 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(x.col(0).mean()) <= 3.0 * se);
    CHECK(std::abs(x.col(1).mean()) <= 3.0 * se);
}

TEST_CASE("gp view sampler matches its kernel covariance") {
    const Eigen::MatrixXd x = make_s_curve_latents(5, 1, 0.0);
    SyntheticSpec spec;
    spec.n = 5;
    spec.kernels = {KernelSpec{RbfKernel{}}};
    spec.view_dims = {1};
    spec.noise_std = {0.0};

    const Eigen::MatrixXd k = reference_gram(x, spec.kernels[0]);
    const int redraws = 10000;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(5, 5);
    Eigen::VectorXd mean_sum = Eigen::VectorXd::Zero(5);
    for (int rep = 0; rep < redraws; ++rep) {
        spec.seed = static_cast<std::uint64_t>(rep);
        const Eigen::VectorXd f = sample_gp_views(x, spec).views[0].col(0);
        sum += f * f.transpose();
        mean_sum += f;
    }
    const Eigen::MatrixXd emp = sum / static_cast<double>(redraws);
    for (Eigen::Index a = 0; a < 5; ++a)
        for (Eigen::Index b = 0; b < 5; ++b) {
            const double se = std::sqrt((k(a, a) * k(b, b) + k(a, b) * k(a, b)) /
                                        static_cast<double>(redraws));
            CHECK(std::abs(emp(a, b) - k(a, b)) <= 3.0 * se);
        }
    CHECK(mean_sum.cwiseAbs().maxCoeff() / redraws <= 3.0 / std::sqrt(static_cast<double>(redraws)));
}

TEST_CASE("white kernel gives i.i.d. unit-variance samples") {
    RngStream rng(80);
    const Eigen::MatrixXd x = rng.normal_matrix(200, 2);
    SyntheticSpec spec;
    spec.n = 200;
    spec.kernels = {KernelSpec{WhiteKernel{}}};
    spec.view_dims = {50};
    spec.noise_std = {0.0};
    spec.seed = 5;
    const Eigen::MatrixXd y = sample_gp_views(x, spec).views[0];
    CHECK(y.rows() == 200);
    CHECK(y.cols() == 50);
    const double mean = y.mean();
    const double var = (y.array() - mean).square().mean();
    CHECK(std::abs(mean) <= 3.0 / std::sqrt(10000.0));
    CHECK(std::abs(var - 1.0) <= 0.05);
}

TEST_CASE("both synthetic views are functions of the same latents") {
    // Noiseless views: nearest neighbours in one view space should often be
    // nearest neighbours in the other, far above the 1/(N-1) chance rate.
    const Eigen::Index n = 50;
    const Eigen::MatrixXd x = make_s_curve_latents(n, 21, 0.0);
    SyntheticSpec spec;
    spec.n = n;
    spec.kernels = {KernelSpec{RbfKernel{}}, KernelSpec{RbfKernel{}}};
    spec.view_dims = {10, 10};
    spec.noise_std = {0.0, 0.0};
    spec.seed = 9;
    const MultiViewDataset data = sample_gp_views(x, spec);

    auto nearest = [&](const Eigen::MatrixXd& y, Eigen::Index i) {
        double best = std::numeric_limits<double>::infinity();
        Eigen::Index arg = -1;
        for (Eigen::Index j = 0; j < y.rows(); ++j) {
            if (j == i) continue;
            const double d2 = (y.row(i) - y.row(j)).squaredNorm();
            if (d2 < best) {
                best = d2;
                arg = j;
            }
        }
        return arg;
    };
    int agree = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (nearest(data.views[0], i) == nearest(data.views[1], i)) ++agree;
    CHECK(static_cast<double>(agree) / static_cast<double>(n) >= 0.2);
}

TEST_CASE("csv round trip preserves doubles and masks") {
    RngStream rng(81);
    const std::string dir = temp_dir();
    Eigen::MatrixXd m = rng.normal_matrix(7, 3);
    m(0, 0) = 1.0 / 3.0;
    m(3, 2) = -1e-17;
    BoolMask mask = BoolMask::Constant(7, 3, false);
    mask(2, 1) = true;
    m(2, 1) = 0.0;

    const std::string path = dir + "/view.csv";
    save_matrix_csv(path, m, &mask);
    const MultiViewDataset loaded = load_multiview_csv({path});
    CHECK((loaded.views[0] - m).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(loaded.has_mask(0));
    CHECK(loaded.masks[0](2, 1));
    CHECK(loaded.masks[0].count() == 1);
    CHECK(loaded.views[0](2, 1) == 0.0);
}

TEST_CASE("csv loader reports mismatched rows and bad cells") {
    const std::string dir = temp_dir();
    {
        std::ofstream a(dir + "/a.csv");
        a << "c0\n1\n2\n";
        std::ofstream b(dir + "/b.csv");
        b << "c0\n1\n";
    }
    CHECK_THROWS_WITH_AS(load_multiview_csv({dir + "/a.csv", dir + "/b.csv"}),
                         doctest::Contains("b.csv"), std::runtime_error);
    {
        std::ofstream c(dir + "/c.csv");
        c << "c0,c1\n1,oops\n";
    }
    CHECK_THROWS_WITH_AS(load_multiview_csv({dir + "/c.csv"}), doctest::Contains("column 2"),
                         std::runtime_error);
}

TEST_CASE("label views are one-hot in ascending class order") {
    MultiViewDataset data;
    RngStream rng(82);
    data.views.push_back(rng.normal_matrix(3, 2));
    data.masks.emplace_back();

    SUBCASE("binary labels") {
        const MultiViewDataset out = append_label_view(data, {0, 1, 0});
        CHECK(out.view_count() == 2);
        Eigen::MatrixXd expected(3, 2);
        expected << 1, 0, 0, 1, 1, 0;
        CHECK((out.views[1] - expected).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("arbitrary integer ids map to ascending columns") {
        const MultiViewDataset out = append_label_view(data, {7, -2, 7});
        Eigen::MatrixXd expected(3, 2);  // columns: class -2, class 7
        expected << 0, 1, 1, 0, 0, 1;
        CHECK((out.views[1] - expected).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("a single class is rejected") {
        CHECK_THROWS_AS(append_label_view(data, {4, 4, 4}), std::invalid_argument);
    }
}

TEST_CASE("manifest round trip and dataset loading") {
    const std::string dir = temp_dir();
    RngStream rng(83);
    const Eigen::MatrixXd v0 = rng.normal_matrix(4, 2);
    const Eigen::MatrixXd v1 = rng.normal_matrix(4, 3);
    save_matrix_csv(dir + "/v0.csv", v0);
    save_matrix_csv(dir + "/v1.csv", v1);

    DataManifest manifest;
    manifest.view_files = {"v0.csv", "v1.csv"};
    manifest.view_dims = {2, 3};
    manifest.n = 4;
    manifest.kernels = {"rbf", "gibbs"};
    manifest.seed = 17;
    save_manifest(dir + "/manifest.json", manifest);

    const DataManifest loaded = load_manifest(dir + "/manifest.json");
    CHECK(loaded.view_files == manifest.view_files);
    CHECK(loaded.kernels == manifest.kernels);
    CHECK(loaded.seed == 17);

    const MultiViewDataset data = load_dataset(dir + "/manifest.json");
    CHECK(data.view_count() == 2);
    CHECK((data.views[1] - v1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("random masking zeroes entries and spares one per column") {
    RngStream rng(84);
    MultiViewDataset data;
    data.views.push_back(rng.normal_matrix(10, 4));
    data.masks.emplace_back();
    apply_random_mask(data, 0.85, 3);
    REQUIRE(data.has_mask(0));
    const BoolMask& mask = data.masks[0];
    for (Eigen::Index c = 0; c < 4; ++c) CHECK_FALSE(mask.col(c).all());
    for (Eigen::Index r = 0; r < 10; ++r)
        for (Eigen::Index c = 0; c < 4; ++c)
            if (mask(r, c)) CHECK(data.views[0](r, c) == 0.0);
    const double frac = static_cast<double>(mask.count()) / 40.0;
    CHECK(frac >= 0.5);
    data.validate();
}

TEST_CASE("standardization is column-wise over observed entries") {
    RngStream rng(85);
    MultiViewDataset data;
    data.views.push_back(rng.normal_matrix(50, 3));
    data.views[0].col(1).array() = 4.2;  // constant column
    data.masks.emplace_back();

    std::vector<std::string> warnings;
    MultiViewDataset copy = data;
    const StandardizationStats stats = standardize_views(copy, &warnings);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("column 1") != std::string::npos);
    CHECK(std::abs(copy.views[0].col(0).mean()) <= 1e-12);
    // Mean removed, divisor 1; residue is at rounding level for a constant column.
    CHECK(copy.views[0].col(1).cwiseAbs().maxCoeff() <= 1e-12);

    MultiViewDataset fresh = data;
    apply_standardization(fresh, stats);
    CHECK((fresh.views[0] - copy.views[0]).cwiseAbs().maxCoeff() == 0.0);
}
