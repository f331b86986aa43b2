#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>

namespace ngmvlvm {

/// Deterministic Gaussian/uniform stream on top of std::mt19937_64.
///
/// std::normal_distribution is implementation-defined, so normals are produced
/// by an explicit Box-Muller transform; identical seeds give identical draws.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal();

    /// Matrix of i.i.d. standard normals, filled row by row.
    Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);
    Eigen::VectorXd normal_vector(Eigen::Index n);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derives a substream seed from a master seed and a path of stream labels.
/// Used to split one user seed into independent streams per
/// (purpose, iteration, view, draw, ...) without coupling their outputs.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

/// Stream-purpose labels for derive_seed paths.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kLatentNoise = 2;
inline constexpr std::uint64_t kSpectralNoise = 3;
inline constexpr std::uint64_t kSynth = 4;
inline constexpr std::uint64_t kMask = 5;
inline constexpr std::uint64_t kFolds = 6;
inline constexpr std::uint64_t kPredict = 7;
}  // namespace stream

/// Process-wide worker count for parallel_for (1 = serial).
void set_num_threads(int n);
int num_threads();

/// Runs fn(i) for i in [0, n). Tasks must write to disjoint state; any
/// reduction over results happens at the call site in index order, so the
/// outcome is independent of the worker count.
void parallel_for(Eigen::Index n, const std::function<void(Eigen::Index)>& fn);

}  // namespace ngmvlvm
