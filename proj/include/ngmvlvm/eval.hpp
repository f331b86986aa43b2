#pragma once

#include "ngmvlvm/data.hpp"

#include <Eigen/Dense>

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace ngmvlvm {

/// One metric's per-fold (or per-seed) values with summary statistics.
/// `stddev` is the sample standard deviation (ddof 1; 0 for a single value).
struct EvalReport {
    std::string metric;
    std::vector<double> values;
    double mean = 0.0;
    double stddev = 0.0;
    nlohmann::json config;  // echo of k / folds / seed and friends

    static EvalReport from_values(std::string metric, std::vector<double> values,
                                  nlohmann::json config);
};

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
void save_report_json(const std::string& path, const EvalReport& report);
/// Flat CSV: metric,fold,value.
void save_report_csv(const std::string& path, const EvalReport& report);

/// Stratified K-fold KNN classification accuracy on the rows of X.
/// Folds are assigned per class round-robin after a seeded shuffle. Euclidean
/// metric; majority vote with ties broken by smallest class id; distance ties
/// by smallest training index. Errors if any class has fewer members than
/// folds.
EvalReport knn_cv_accuracy(const Eigen::MatrixXd& x, const std::vector<int>& labels, int k,
                           int folds, std::uint64_t seed);

/// As above with an explicit fold assignment (values in [0, folds)).
EvalReport knn_cv_accuracy_folds(const Eigen::MatrixXd& x, const std::vector<int>& labels, int k,
                                 const std::vector<int>& fold_ids);

/// Alignment of learned latents with ground truth: fits the least-squares
/// affine map X_learned A + b -> X_true and returns 1 - RSS/TSS. Invariant to
/// invertible affine transformations of X_learned. Requires N > D + 1.
double r2_alignment(const Eigen::MatrixXd& x_learned, const Eigen::MatrixXd& x_true);

/// Mean squared entry difference, optionally restricted to mask-true entries.
double mse(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat,
           const BoolMask* restrict_to = nullptr);

}  // namespace ngmvlvm
