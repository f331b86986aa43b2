#include "ngmvlvm/eval.hpp"

#include "ngmvlvm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace ngmvlvm {

using nlohmann::json;

EvalReport EvalReport::from_values(std::string metric, std::vector<double> values, json config) {
    if (values.empty()) throw std::invalid_argument("eval report: no values");
    EvalReport r;
    r.metric = std::move(metric);
    r.values = std::move(values);
    r.config = std::move(config);
    double sum = 0.0;
    for (const double v : r.values) sum += v;
    r.mean = sum / static_cast<double>(r.values.size());
    if (r.values.size() > 1) {
        double ss = 0.0;
        for (const double v : r.values) ss += (v - r.mean) * (v - r.mean);
        r.stddev = std::sqrt(ss / static_cast<double>(r.values.size() - 1));
    }
    return r;
}

json report_to_json(const EvalReport& report) {
    json j;
    j["version"] = "ngmvlvm-report-v1";
    j["metric"] = report.metric;
    j["values"] = report.values;
    j["mean"] = report.mean;
    j["stddev"] = report.stddev;
    j["config"] = report.config;
    return j;
}

EvalReport report_from_json(const json& j) {
    if (j.value("version", "") != std::string("ngmvlvm-report-v1"))
        throw std::runtime_error("report version mismatch (expected ngmvlvm-report-v1)");
    EvalReport r = EvalReport::from_values(j.at("metric").get<std::string>(),
                                           j.at("values").get<std::vector<double>>(),
                                           j.value("config", json::object()));
    return r;
}

void save_report_json(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << report_to_json(report).dump(2) << "\n";
}

void save_report_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << "metric,fold,value\n";
    char buf[40];
    for (std::size_t i = 0; i < report.values.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", report.values[i]);
        out << report.metric << "," << i << "," << buf << "\n";
    }
}

namespace {

std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (const auto& [cls, members] : by_class) {
        if (static_cast<int>(members.size()) < folds)
            throw std::invalid_argument("knn: class " + std::to_string(cls) + " has only " +
                                        std::to_string(members.size()) +
                                        " members; use fewer folds");
    }
    RngStream rng(derive_seed(seed, {stream::kFolds}));
    std::vector<int> fold_ids(labels.size(), 0);
    for (auto& [cls, members] : by_class) {
        // Seeded Fisher-Yates, then deal round-robin.
        for (std::size_t i = members.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
            std::swap(members[i - 1], members[std::min(j, i - 1)]);
        }
        for (std::size_t i = 0; i < members.size(); ++i)
            fold_ids[members[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
    }
    return fold_ids;
}

int knn_classify(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                 const std::vector<Eigen::Index>& train, const Eigen::VectorXd& query, int k) {
    // Partial sort of (distance, index); distance ties keep the smaller index.
    std::vector<std::pair<double, Eigen::Index>> dist;
    dist.reserve(train.size());
    for (const Eigen::Index t : train)
        dist.emplace_back((x.row(t).transpose() - query).squaredNorm(), t);
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    std::map<int, int> votes;
    for (std::size_t i = 0; i < kk; ++i) votes[labels[static_cast<std::size_t>(dist[i].second)]]++;
    int best_class = votes.begin()->first;
    int best_votes = votes.begin()->second;
    for (const auto& [cls, count] : votes) {
        if (count > best_votes) {  // ties keep the smallest class id
            best_class = cls;
            best_votes = count;
        }
    }
    return best_class;
}

}  // namespace

EvalReport knn_cv_accuracy_folds(const Eigen::MatrixXd& x, const std::vector<int>& labels, int k,
                                 const std::vector<int>& fold_ids) {
    if (static_cast<Eigen::Index>(labels.size()) != x.rows())
        throw std::invalid_argument("knn: label count != row count");
    if (fold_ids.size() != labels.size())
        throw std::invalid_argument("knn: fold assignment size mismatch");
    if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
    const int folds = *std::max_element(fold_ids.begin(), fold_ids.end()) + 1;
    if (folds < 2) throw std::invalid_argument("knn: need at least two folds");

    std::vector<double> accuracies;
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < fold_ids.size(); ++i)
            (fold_ids[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
        if (test.empty() || train.empty())
            throw std::invalid_argument("knn: empty fold " + std::to_string(f));
        Eigen::Index correct = 0;
        for (const Eigen::Index t : test) {
            const int predicted = knn_classify(x, labels, train, x.row(t).transpose(), k);
            if (predicted == labels[static_cast<std::size_t>(t)]) ++correct;
        }
        accuracies.push_back(static_cast<double>(correct) / static_cast<double>(test.size()));
    }
    return EvalReport::from_values("knn_accuracy", std::move(accuracies),
                                   json{{"k", k}, {"folds", folds}});
}

EvalReport knn_cv_accuracy(const Eigen::MatrixXd& x, const std::vector<int>& labels, int k,
                           int folds, std::uint64_t seed) {
    if (folds < 2) throw std::invalid_argument("knn: need at least two folds");
    if (x.rows() < folds) throw std::invalid_argument("knn: fewer rows than folds");
    EvalReport r = knn_cv_accuracy_folds(x, labels, k, stratified_folds(labels, folds, seed));
    r.config["seed"] = seed;
    return r;
}

double r2_alignment(const Eigen::MatrixXd& x_learned, const Eigen::MatrixXd& x_true) {
    if (x_learned.rows() != x_true.rows())
        throw std::invalid_argument("r2_alignment: row counts disagree");
    const Eigen::Index n = x_learned.rows();
    const Eigen::Index d = x_learned.cols();
    if (n <= d + 1) throw std::invalid_argument("r2_alignment: need N > D + 1 rows");

    Eigen::MatrixXd design(n, d + 1);
    design.leftCols(d) = x_learned;
    design.col(d).setOnes();
    const Eigen::MatrixXd coef = design.colPivHouseholderQr().solve(x_true);
    const double rss = (x_true - design * coef).squaredNorm();
    const Eigen::RowVectorXd mean = x_true.colwise().mean();
    const double tss = (x_true.rowwise() - mean).squaredNorm();
    if (tss == 0.0) throw std::invalid_argument("r2_alignment: ground truth has zero variance");
    return 1.0 - rss / tss;
}

double mse(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat, const BoolMask* restrict_to) {
    if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols())
        throw std::invalid_argument("mse: shapes disagree");
    if (restrict_to == nullptr || restrict_to->size() == 0) {
        if (y.size() == 0) throw std::invalid_argument("mse: empty selection");
        return (y - y_hat).squaredNorm() / static_cast<double>(y.size());
    }
    if (restrict_to->rows() != y.rows() || restrict_to->cols() != y.cols())
        throw std::invalid_argument("mse: mask shape mismatch");
    double sum = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index r = 0; r < y.rows(); ++r)
        for (Eigen::Index c = 0; c < y.cols(); ++c)
            if ((*restrict_to)(r, c)) {
                const double diff = y(r, c) - y_hat(r, c);
                sum += diff * diff;
                ++count;
            }
    if (count == 0) throw std::invalid_argument("mse: empty selection");
    return sum / static_cast<double>(count);
}

}  // namespace ngmvlvm
