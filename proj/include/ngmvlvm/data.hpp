#pragma once

#include "ngmvlvm/kernels.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ngmvlvm {

using BoolMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// V observation matrices over the same N rows, with optional integer labels
/// and per-view missing masks (true = missing). Values at missing entries are
/// stored as exactly 0; they carry no information.
struct MultiViewDataset {
    std::vector<Eigen::MatrixXd> views;
    std::vector<BoolMask> masks;  // per view; a 0x0 mask means "nothing missing"
    std::vector<int> labels;      // empty when absent

    Eigen::Index n() const { return views.empty() ? 0 : views.front().rows(); }
    Eigen::Index view_count() const { return static_cast<Eigen::Index>(views.size()); }
    bool has_mask(Eigen::Index v) const;
    bool any_missing() const;
    void validate() const;
};

/// Per-view, per-column standardization statistics.
struct StandardizationStats {
    std::vector<Eigen::VectorXd> mean;
    std::vector<Eigen::VectorXd> stddev;
};

/// Standardizes every view column to zero mean / unit variance over its
/// observed entries, in place. Zero-variance columns keep divisor 1 and are
/// reported in `warnings`. Missing entries stay exactly 0.
StandardizationStats standardize_views(MultiViewDataset& data,
                                       std::vector<std::string>* warnings = nullptr);

/// Standardizes with precomputed statistics (e.g. the ones stored in a model).
void apply_standardization(MultiViewDataset& data, const StandardizationStats& stats);

struct SyntheticSpec {
    Eigen::Index n = 150;
    std::vector<KernelSpec> kernels;       // one per view
    std::vector<Eigen::Index> view_dims;   // M_v per view
    std::vector<double> noise_std;         // per view
    std::uint64_t seed = 0;

    void validate() const;
};

/// Planar S-shaped latents: t uniform on [-3pi/2, 3pi/2],
/// x = (sin t, sign(t)(cos t - 1)), scaled to unit per-coordinate standard
/// deviation, plus Gaussian jitter.
Eigen::MatrixXd make_s_curve_latents(Eigen::Index n, std::uint64_t seed, double jitter = 0.01);

/// Draws each view dimension as f ~ N(0, K_v) over the given latents (jittered
/// Cholesky, escalating jitter up to 3 times) plus observation noise.
MultiViewDataset sample_gp_views(const Eigen::MatrixXd& x, const SyntheticSpec& spec);

/// Masks a fraction of entries uniformly at random across all views, keeping
/// at least one observed entry per column. Masked values are zeroed.
void apply_random_mask(MultiViewDataset& data, double missing_frac, std::uint64_t seed);

/// Appends a one-hot label view (columns in ascending class id). Requires at
/// least two distinct classes.
MultiViewDataset append_label_view(const MultiViewDataset& data, const std::vector<int>& labels);

struct LabelColumnSpec {
    std::string path;    // CSV holding the label column
    std::string column;  // header name
};

/// Loads one CSV per view (header row required, comma separated, empty field =
/// missing). Rows align by position across files. If a label spec is given,
/// that column is extracted as integer labels and removed from its view; a
/// file left with zero feature columns contributes no view.
MultiViewDataset load_multiview_csv(const std::vector<std::string>& paths,
                                    const std::optional<LabelColumnSpec>& label_spec = {});

/// Writes a matrix as CSV with header c0,c1,... Missing entries (mask true)
/// become empty fields. Values are printed with 17 significant digits so the
/// loader reproduces them bit for bit.
void save_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                     const BoolMask* mask = nullptr);

Eigen::MatrixXd load_matrix_csv(const std::string& path);

/// Dataset manifest ("ngmvlvm-data-v1"): view files, optional label column,
/// optional ground-truth latents and pre-mask views, and the generation echo.
struct DataManifest {
    std::vector<std::string> view_files;
    std::optional<LabelColumnSpec> labels;
    std::optional<std::string> latents_file;
    std::vector<std::string> truth_view_files;
    std::vector<std::string> kernels;  // e.g. {"rbf", "gibbs"}; empty for loaded data
    Eigen::Index n = 0;
    std::vector<Eigen::Index> view_dims;
    double noise_std = 0.0;
    double missing_frac = 0.0;
    std::uint64_t seed = 0;
};

void save_manifest(const std::string& path, const DataManifest& manifest);
DataManifest load_manifest(const std::string& path);

/// Loads the views (and labels) referenced by a manifest; relative paths are
/// resolved against the manifest's directory.
MultiViewDataset load_dataset(const std::string& manifest_path);

/// Ground-truth latents referenced by the manifest, if any.
std::optional<Eigen::MatrixXd> load_manifest_latents(const std::string& manifest_path);

/// Pre-mask ground-truth views referenced by the manifest, if any.
std::vector<Eigen::MatrixXd> load_manifest_truth_views(const std::string& manifest_path);

}  // namespace ngmvlvm
