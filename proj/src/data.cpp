#include "ngmvlvm/data.hpp"

#include "ngmvlvm/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ngmvlvm {

namespace fs = std::filesystem;
using nlohmann::json;

bool MultiViewDataset::has_mask(Eigen::Index v) const {
    const auto i = static_cast<std::size_t>(v);
    return i < masks.size() && masks[i].size() > 0;
}

bool MultiViewDataset::any_missing() const {
    for (Eigen::Index v = 0; v < view_count(); ++v)
        if (has_mask(v) && masks[static_cast<std::size_t>(v)].any()) return true;
    return false;
}

void MultiViewDataset::validate() const {
    if (views.empty()) throw std::invalid_argument("dataset: no views");
    const Eigen::Index rows = n();
    if (!masks.empty() && masks.size() != views.size())
        throw std::invalid_argument("dataset: mask count != view count");
    for (Eigen::Index v = 0; v < view_count(); ++v) {
        const auto i = static_cast<std::size_t>(v);
        if (views[i].rows() != rows)
            throw std::invalid_argument("dataset: views disagree on row count");
        if (has_mask(v)) {
            if (masks[i].rows() != views[i].rows() || masks[i].cols() != views[i].cols())
                throw std::invalid_argument("dataset: mask shape != view shape");
            if ((masks[i] && (views[i].array() != 0.0)).any())
                throw std::invalid_argument("dataset: values at missing entries must be 0");
        }
    }
    if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != rows)
        throw std::invalid_argument("dataset: label count != row count");
}

StandardizationStats standardize_views(MultiViewDataset& data, std::vector<std::string>* warnings) {
    data.validate();
    StandardizationStats stats;
    for (Eigen::Index v = 0; v < data.view_count(); ++v) {
        const auto vi = static_cast<std::size_t>(v);
        Eigen::MatrixXd& y = data.views[vi];
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(y.cols());
        Eigen::VectorXd stddev = Eigen::VectorXd::Ones(y.cols());
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
            double sum = 0.0;
            Eigen::Index count = 0;
            for (Eigen::Index r = 0; r < y.rows(); ++r) {
                if (data.has_mask(v) && data.masks[vi](r, c)) continue;
                sum += y(r, c);
                ++count;
            }
            if (count == 0) continue;
            const double m = sum / static_cast<double>(count);
            double var = 0.0;
            for (Eigen::Index r = 0; r < y.rows(); ++r) {
                if (data.has_mask(v) && data.masks[vi](r, c)) continue;
                var += (y(r, c) - m) * (y(r, c) - m);
            }
            var /= static_cast<double>(count);
            mean(c) = m;
            // Columns whose spread is at rounding level count as constant.
            const double floor = 1e-9 * (1.0 + std::abs(m));
            if (var > floor * floor) {
                stddev(c) = std::sqrt(var);
            } else if (warnings != nullptr) {
                warnings->push_back("view " + std::to_string(v) + " column " + std::to_string(c) +
                                    " has zero variance; kept unscaled");
            }
            for (Eigen::Index r = 0; r < y.rows(); ++r) {
                if (data.has_mask(v) && data.masks[vi](r, c)) continue;
                y(r, c) = (y(r, c) - mean(c)) / stddev(c);
            }
        }
        stats.mean.push_back(std::move(mean));
        stats.stddev.push_back(std::move(stddev));
    }
    return stats;
}

void apply_standardization(MultiViewDataset& data, const StandardizationStats& stats) {
    if (stats.mean.size() != data.views.size())
        throw std::invalid_argument("apply_standardization: stats/view count mismatch");
    for (Eigen::Index v = 0; v < data.view_count(); ++v) {
        const auto vi = static_cast<std::size_t>(v);
        Eigen::MatrixXd& y = data.views[vi];
        if (stats.mean[vi].size() != y.cols())
            throw std::invalid_argument("apply_standardization: column count mismatch");
        for (Eigen::Index c = 0; c < y.cols(); ++c)
            for (Eigen::Index r = 0; r < y.rows(); ++r) {
                if (data.has_mask(v) && data.masks[vi](r, c)) continue;
                y(r, c) = (y(r, c) - stats.mean[vi](c)) / stats.stddev[vi](c);
            }
    }
}

void SyntheticSpec::validate() const {
    if (n < 2) throw std::invalid_argument("synthetic spec: n must be >= 2");
    if (kernels.empty() || kernels.size() != view_dims.size() ||
        kernels.size() != noise_std.size())
        throw std::invalid_argument("synthetic spec: per-view settings disagree");
    for (const auto m : view_dims)
        if (m < 1) throw std::invalid_argument("synthetic spec: view dims must be >= 1");
    for (const double s : noise_std)
        if (s < 0.0) throw std::invalid_argument("synthetic spec: noise std must be >= 0");
}

Eigen::MatrixXd make_s_curve_latents(Eigen::Index n, std::uint64_t seed, double jitter) {
    if (n < 2) throw std::invalid_argument("make_s_curve_latents: n must be >= 2");
    RngStream rng(derive_seed(seed, {stream::kSynth, 0x5c}));
    Eigen::MatrixXd x(n, 2);
    const double half = 1.5 * std::numbers::pi;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = (2.0 * rng.uniform() - 1.0) * half;
        const double sign = t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0);
        x(i, 0) = std::sin(t);
        x(i, 1) = sign * (std::cos(t) - 1.0);
    }
    for (Eigen::Index c = 0; c < 2; ++c) {
        const double m = x.col(c).mean();
        const double sd = std::sqrt((x.col(c).array() - m).square().mean());
        if (sd > 0.0) x.col(c) /= sd;
    }
    if (jitter > 0.0) x += jitter * rng.normal_matrix(n, 2);
    return x;
}

namespace {

Eigen::MatrixXd kernel_gram(const Eigen::MatrixXd& x, const KernelSpec& spec) {
    if (std::holds_alternative<SpectralMixtureParams>(spec))
        return ngsm_gram(x, std::get<SpectralMixtureParams>(spec));
    return reference_gram(x, spec);
}

Eigen::LLT<Eigen::MatrixXd> jittered_cholesky(const Eigen::MatrixXd& k) {
    double jitter = 1e-8 * k.diagonal().mean();
    if (jitter <= 0.0) jitter = 1e-12;
    for (int attempt = 0; attempt < 4; ++attempt) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(kj);
        if (llt.info() == Eigen::Success) return llt;
        jitter *= 10.0;
    }
    throw std::runtime_error("sample_gp_views: Cholesky failed after jitter escalation");
}

}  // namespace

MultiViewDataset sample_gp_views(const Eigen::MatrixXd& x, const SyntheticSpec& spec) {
    spec.validate();
    if (x.rows() != spec.n) throw std::invalid_argument("sample_gp_views: latents row mismatch");
    MultiViewDataset data;
    for (std::size_t v = 0; v < spec.kernels.size(); ++v) {
        const Eigen::LLT<Eigen::MatrixXd> llt = jittered_cholesky(kernel_gram(x, spec.kernels[v]));
        RngStream rng(derive_seed(spec.seed, {stream::kSynth, static_cast<std::uint64_t>(v)}));
        Eigen::MatrixXd y(spec.n, spec.view_dims[v]);
        for (Eigen::Index m = 0; m < spec.view_dims[v]; ++m) {
            const Eigen::VectorXd f = llt.matrixL() * rng.normal_vector(spec.n);
            y.col(m) = f + spec.noise_std[v] * rng.normal_vector(spec.n);
        }
        data.views.push_back(std::move(y));
        data.masks.emplace_back();
    }
    return data;
}

void apply_random_mask(MultiViewDataset& data, double missing_frac, std::uint64_t seed) {
    if (missing_frac < 0.0 || missing_frac >= 1.0)
        throw std::invalid_argument("apply_random_mask: fraction must lie in [0, 1)");
    if (missing_frac == 0.0) return;
    RngStream rng(derive_seed(seed, {stream::kMask}));
    data.masks.resize(data.views.size());
    for (std::size_t v = 0; v < data.views.size(); ++v) {
        Eigen::MatrixXd& y = data.views[v];
        BoolMask mask = BoolMask::Constant(y.rows(), y.cols(), false);
        for (Eigen::Index r = 0; r < y.rows(); ++r)
            for (Eigen::Index c = 0; c < y.cols(); ++c)
                if (rng.uniform() < missing_frac) mask(r, c) = true;
        // Every column must keep at least one observed entry.
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
            if (!mask.col(c).all()) continue;
            const auto keep = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(y.rows()));
            mask(std::min(keep, y.rows() - 1), c) = false;
        }
        for (Eigen::Index r = 0; r < y.rows(); ++r)
            for (Eigen::Index c = 0; c < y.cols(); ++c)
                if (mask(r, c)) y(r, c) = 0.0;
        data.masks[v] = std::move(mask);
    }
}

MultiViewDataset append_label_view(const MultiViewDataset& data, const std::vector<int>& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != data.n())
        throw std::invalid_argument("append_label_view: label count != row count");
    const std::set<int> classes(labels.begin(), labels.end());
    if (classes.size() < 2)
        throw std::invalid_argument("append_label_view: need at least two classes");
    std::map<int, Eigen::Index> col_of;
    Eigen::Index next = 0;
    for (const int c : classes) col_of[c] = next++;

    MultiViewDataset out = data;
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(data.n(), static_cast<Eigen::Index>(classes.size()));
    for (Eigen::Index i = 0; i < data.n(); ++i)
        onehot(i, col_of.at(labels[static_cast<std::size_t>(i)])) = 1.0;
    out.views.push_back(std::move(onehot));
    if (!out.masks.empty()) out.masks.emplace_back();
    out.labels = labels;
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (const char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV file: " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("CSV file is empty: " + path);
    table.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != table.header.size())
            throw std::runtime_error("CSV row width mismatch in " + path + " at data row " +
                                     std::to_string(table.rows.size() + 1));
        table.rows.push_back(std::move(fields));
    }
    return table;
}

double parse_cell(const std::string& field, const std::string& path, std::size_t row,
                  std::size_t col) {
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0')
        throw std::runtime_error("non-numeric CSV cell in " + path + " at data row " +
                                 std::to_string(row + 1) + ", column " + std::to_string(col + 1) +
                                 ": '" + field + "'");
    return v;
}

}  // namespace

MultiViewDataset load_multiview_csv(const std::vector<std::string>& paths,
                                    const std::optional<LabelColumnSpec>& label_spec) {
    if (paths.empty()) throw std::invalid_argument("load_multiview_csv: no files");
    MultiViewDataset data;
    std::optional<Eigen::Index> rows;
    for (const auto& path : paths) {
        const CsvTable table = read_csv(path);
        if (rows && static_cast<Eigen::Index>(table.rows.size()) != *rows)
            throw std::runtime_error("CSV row counts disagree: " + paths.front() + " has " +
                                     std::to_string(*rows) + " rows, " + path + " has " +
                                     std::to_string(table.rows.size()));
        rows = static_cast<Eigen::Index>(table.rows.size());

        std::optional<std::size_t> label_col;
        if (label_spec && label_spec->path == path) {
            const auto it = std::find(table.header.begin(), table.header.end(), label_spec->column);
            if (it == table.header.end())
                throw std::runtime_error("label column '" + label_spec->column + "' not in " + path);
            label_col = static_cast<std::size_t>(it - table.header.begin());
        }

        const std::size_t n_cols = table.header.size() - (label_col ? 1 : 0);
        Eigen::MatrixXd y(*rows, static_cast<Eigen::Index>(n_cols));
        BoolMask mask = BoolMask::Constant(*rows, static_cast<Eigen::Index>(n_cols), false);
        bool any_missing = false;
        if (label_col) data.labels.resize(static_cast<std::size_t>(*rows));
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            Eigen::Index out_c = 0;
            for (std::size_t c = 0; c < table.header.size(); ++c) {
                const std::string& field = table.rows[r][c];
                if (label_col && c == *label_col) {
                    data.labels[r] = static_cast<int>(std::lround(parse_cell(field, path, r, c)));
                    continue;
                }
                if (field.empty()) {
                    mask(static_cast<Eigen::Index>(r), out_c) = true;
                    y(static_cast<Eigen::Index>(r), out_c) = 0.0;
                    any_missing = true;
                } else {
                    y(static_cast<Eigen::Index>(r), out_c) = parse_cell(field, path, r, c);
                }
                ++out_c;
            }
        }
        if (n_cols > 0) {
            data.views.push_back(std::move(y));
            data.masks.push_back(any_missing ? std::move(mask) : BoolMask());
        }
    }
    data.validate();
    return data;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void save_matrix_csv(const std::string& path, const Eigen::MatrixXd& m, const BoolMask* mask) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write CSV file: " + path);
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? ",c" : "c") << c;
    out << "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ",";
            if (mask != nullptr && mask->size() > 0 && (*mask)(r, c)) continue;
            out << format_double(m(r, c));
        }
        out << "\n";
    }
}

Eigen::MatrixXd load_matrix_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(table.rows.size()),
                      static_cast<Eigen::Index>(table.header.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        for (std::size_t c = 0; c < table.header.size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                parse_cell(table.rows[r][c], path, r, c);
    return m;
}

void save_manifest(const std::string& path, const DataManifest& manifest) {
    json j;
    j["version"] = "ngmvlvm-data-v1";
    j["views"] = json::array();
    for (std::size_t v = 0; v < manifest.view_files.size(); ++v) {
        json entry;
        entry["path"] = manifest.view_files[v];
        entry["cols"] = v < manifest.view_dims.size() ? manifest.view_dims[v] : -1;
        j["views"].push_back(entry);
    }
    j["n"] = manifest.n;
    if (manifest.labels) {
        j["labels"] = {{"path", manifest.labels->path}, {"column", manifest.labels->column}};
    } else {
        j["labels"] = nullptr;
    }
    j["latents"] = manifest.latents_file ? json(*manifest.latents_file) : json(nullptr);
    j["truth_views"] = manifest.truth_view_files;
    j["kernels"] = manifest.kernels;
    j["noise_std"] = manifest.noise_std;
    j["missing_frac"] = manifest.missing_frac;
    j["seed"] = manifest.seed;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

DataManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    json j;
    in >> j;
    if (j.value("version", "") != std::string("ngmvlvm-data-v1"))
        throw std::runtime_error("manifest version mismatch in " + path +
                                 " (expected ngmvlvm-data-v1)");
    DataManifest m;
    for (const auto& entry : j.at("views")) {
        m.view_files.push_back(entry.at("path").get<std::string>());
        m.view_dims.push_back(entry.value("cols", -1));
    }
    m.n = j.value("n", 0);
    if (!j.at("labels").is_null())
        m.labels = LabelColumnSpec{j["labels"].at("path").get<std::string>(),
                                   j["labels"].at("column").get<std::string>()};
    if (j.contains("latents") && !j["latents"].is_null())
        m.latents_file = j["latents"].get<std::string>();
    if (j.contains("truth_views")) m.truth_view_files = j["truth_views"].get<std::vector<std::string>>();
    if (j.contains("kernels")) m.kernels = j["kernels"].get<std::vector<std::string>>();
    m.noise_std = j.value("noise_std", 0.0);
    m.missing_frac = j.value("missing_frac", 0.0);
    m.seed = j.value("seed", std::uint64_t{0});
    return m;
}

namespace {

std::string resolve(const std::string& manifest_path, const std::string& file) {
    const fs::path p(file);
    if (p.is_absolute()) return file;
    return (fs::path(manifest_path).parent_path() / p).string();
}

}  // namespace

MultiViewDataset load_dataset(const std::string& manifest_path) {
    const DataManifest manifest = load_manifest(manifest_path);
    std::vector<std::string> paths;
    paths.reserve(manifest.view_files.size());
    for (const auto& f : manifest.view_files) paths.push_back(resolve(manifest_path, f));
    std::optional<LabelColumnSpec> labels = manifest.labels;
    if (labels) labels->path = resolve(manifest_path, labels->path);
    return load_multiview_csv(paths, labels);
}

std::optional<Eigen::MatrixXd> load_manifest_latents(const std::string& manifest_path) {
    const DataManifest manifest = load_manifest(manifest_path);
    if (!manifest.latents_file) return std::nullopt;
    return load_matrix_csv(resolve(manifest_path, *manifest.latents_file));
}

std::vector<Eigen::MatrixXd> load_manifest_truth_views(const std::string& manifest_path) {
    const DataManifest manifest = load_manifest(manifest_path);
    std::vector<Eigen::MatrixXd> views;
    for (const auto& f : manifest.truth_view_files)
        views.push_back(load_matrix_csv(resolve(manifest_path, f)));
    return views;
}

}  // namespace ngmvlvm
