#pragma once

// Multi-view dataset ingestion and preprocessing: Mfeat loading, PCA, angle
// scaling, binary labels, balanced splits and a synthetic generator.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lqmvkl/kernel.hpp"

namespace lqmvkl {

struct MultiViewDataset {
    std::vector<FeatureMatrix> views;
    std::vector<ViewInfo> info;
    // Digit classes 0-9.
    std::vector<int> labels;
    std::string provenance;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t num_views() const noexcept { return views.size(); }

    std::size_t view_index(const std::string& name) const {
        for (std::size_t m = 0; m < info.size(); ++m)
            if (info[m].name == name) return m;
        throw std::invalid_argument("unknown view '" + name + "'");
    }

    void validate() const {
        if (views.empty()) throw std::invalid_argument("MultiViewDataset: no views");
        if (views.size() != info.size()) throw std::invalid_argument("MultiViewDataset: view metadata mismatch");
        for (const auto& v : views) {
            if (static_cast<std::size_t>(v.rows()) != labels.size()) {
                throw std::invalid_argument("MultiViewDataset: views must share the instance count");
            }
        }
    }
};

struct MfeatView {
    const char* name;
    std::size_t dimension;
};

inline constexpr MfeatView mfeat_views[] = {{"fou", 76}, {"fac", 216}, {"kar", 64},
                                            {"pix", 240}, {"zer", 47}, {"mor", 6}};
inline constexpr std::size_t mfeat_rows = 2000;
inline constexpr std::size_t mfeat_per_class = 200;

namespace detail {

inline FeatureMatrix read_numeric_table(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    FeatureMatrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::string line;
    std::size_t r = 0;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::vector<double> values;
        double v;
        while (ss >> v) values.push_back(v);
        if (!ss.eof()) throw std::runtime_error(path.string() + ": non-numeric entry on line " + std::to_string(r + 1));
        if (values.empty()) continue;
        if (values.size() != cols) {
            throw std::runtime_error(path.string() + ": line " + std::to_string(r + 1) + " has " +
                                     std::to_string(values.size()) + " columns, expected " + std::to_string(cols));
        }
        if (r >= rows) throw std::runtime_error(path.string() + ": more than the expected " + std::to_string(rows) + " rows");
        for (std::size_t c = 0; c < cols; ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[c];
        ++r;
    }
    if (r != rows) {
        throw std::runtime_error(path.string() + ": found " + std::to_string(r) + " rows, expected " + std::to_string(rows));
    }
    return out;
}

}  // namespace detail

// Reads mfeat-fou ... mfeat-mor (bare names fou ... mor also accepted).
// Rows come in class blocks of 200 in digit order 0-9.
inline MultiViewDataset load_mfeat(const std::filesystem::path& dir) {
    MultiViewDataset ds;
    ds.provenance = "mfeat:" + dir.string();
    for (const auto& v : mfeat_views) {
        auto path = dir / (std::string("mfeat-") + v.name);
        if (!std::filesystem::exists(path)) path = dir / v.name;
        if (!std::filesystem::exists(path)) {
            throw std::runtime_error("missing Mfeat file " + (dir / (std::string("mfeat-") + v.name)).string());
        }
        ds.views.push_back(detail::read_numeric_table(path, mfeat_rows, v.dimension));
        ds.info.push_back({v.name, v.dimension});
    }
    ds.labels.resize(mfeat_rows);
    for (std::size_t i = 0; i < mfeat_rows; ++i) ds.labels[i] = static_cast<int>(i / mfeat_per_class);
    return ds;
}

// ---------------------------------------------------------------------------

inline FeatureMatrix select_rows(const FeatureMatrix& x, std::span<const std::size_t> idx) {
    FeatureMatrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(idx[r]));
    return out;
}

struct PcaTransform {
    Eigen::RowVectorXd mean;
    // Columns are the retained principal directions.
    Eigen::MatrixXd components;
    // Every covariance eigenvalue of the fit rows, descending.
    Eigen::VectorXd eigenvalues;

    FeatureMatrix apply(const FeatureMatrix& x) const {
        if (x.cols() != mean.size()) throw std::invalid_argument("PcaTransform: dimension mismatch");
        return (x.rowwise() - mean) * components;
    }
};

struct PcaResult {
    FeatureMatrix reduced;
    PcaTransform transform;
};

// strict: a target dimension above the covariance rank is an error.
// clamp_to_rank: keep min(target, rank) components instead.
enum class RankPolicy { strict, clamp_to_rank };

inline PcaTransform pca_fit(const FeatureMatrix& x, std::size_t target_dim, std::span<const std::size_t> fit_rows,
                            RankPolicy policy = RankPolicy::strict) {
    if (fit_rows.empty()) throw std::invalid_argument("pca: no fit rows");
    const auto d = static_cast<std::size_t>(x.cols());
    if (target_dim < 1 || target_dim > d) {
        throw std::invalid_argument("pca: target dimension " + std::to_string(target_dim) + " outside [1, " +
                                    std::to_string(d) + "]");
    }
    const FeatureMatrix fit = select_rows(x, fit_rows);
    PcaTransform t;
    t.mean = fit.colwise().mean();
    const Eigen::MatrixXd centered = fit.rowwise() - t.mean;
    const double denom = fit.rows() > 1 ? static_cast<double>(fit.rows() - 1) : 1.0;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw std::runtime_error("pca: eigen-decomposition failed");

    // Eigen returns ascending eigenvalues.
    t.eigenvalues = eig.eigenvalues().reverse();
    const double top = std::max(t.eigenvalues[0], 0.0);
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < t.eigenvalues.size(); ++i)
        if (t.eigenvalues[i] > 1e-10 * top && t.eigenvalues[i] > 0.0) ++rank;
    if (policy == RankPolicy::clamp_to_rank) target_dim = std::min(target_dim, std::max<std::size_t>(rank, 1));
    if (target_dim > rank) {
        throw std::invalid_argument("pca: target dimension " + std::to_string(target_dim) + " exceeds data rank " +
                                    std::to_string(rank));
    }
    t.components.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(target_dim));
    for (std::size_t c = 0; c < target_dim; ++c) {
        Eigen::VectorXd v = eig.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - c));
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0.0) v = -v;
        t.components.col(static_cast<Eigen::Index>(c)) = v;
    }
    return t;
}

inline PcaResult pca_reduce(const FeatureMatrix& x, std::size_t target_dim, std::span<const std::size_t> fit_rows) {
    PcaResult r{{}, pca_fit(x, target_dim, fit_rows)};
    r.reduced = r.transform.apply(x);
    return r;
}

// Per-dimension affine map of the fit rows onto [0, pi]; constant columns
// map to pi/2; everything is clipped to [0, pi].
struct ScalingRecord {
    Eigen::RowVectorXd min;
    Eigen::RowVectorXd max;

    FeatureMatrix apply(const FeatureMatrix& x) const {
        if (x.cols() != min.size()) throw std::invalid_argument("ScalingRecord: dimension mismatch");
        FeatureMatrix out(x.rows(), x.cols());
        constexpr double pi = std::numbers::pi;
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            const double span = max[c] - min[c];
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
                out(r, c) = span > 0.0 ? std::clamp((x(r, c) - min[c]) / span * pi, 0.0, pi) : pi / 2.0;
            }
        }
        return out;
    }
};

struct ScalingResult {
    FeatureMatrix scaled;
    ScalingRecord record;
};

inline ScalingRecord scale_fit(const FeatureMatrix& x, std::span<const std::size_t> fit_rows) {
    if (fit_rows.empty()) throw std::invalid_argument("scale_features: no fit rows");
    const FeatureMatrix fit = select_rows(x, fit_rows);
    return {fit.colwise().minCoeff(), fit.colwise().maxCoeff()};
}

inline ScalingResult scale_features(const FeatureMatrix& x, std::span<const std::size_t> fit_rows) {
    ScalingResult r{{}, scale_fit(x, fit_rows)};
    r.scaled = r.record.apply(x);
    return r;
}

// 0-4 -> -1, 5-9 -> +1
inline std::vector<int> binarize_labels(std::span<const int> digits) {
    std::vector<int> out;
    out.reserve(digits.size());
    for (int d : digits) {
        if (d < 0 || d > 9) throw std::invalid_argument("binarize_labels: digit " + std::to_string(d) + " out of range");
        out.push_back(d <= 4 ? -1 : 1);
    }
    return out;
}

struct SplitSpec {
    std::size_t train_per_class = 40;
    std::size_t test_per_class = 40;
    std::uint64_t seed = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Seeded shuffle within each binary class; the first train_per_class go to
// train, the next test_per_class to test. Index lists are returned sorted.
inline SplitIndices balanced_split(std::span<const int> binary_labels, const SplitSpec& spec) {
    if (spec.train_per_class < 1 || spec.test_per_class < 1) throw std::invalid_argument("balanced_split: sizes must be >= 1");
    std::mt19937_64 rng(spec.seed);
    SplitIndices out;
    for (int cls : {-1, 1}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < binary_labels.size(); ++i)
            if (binary_labels[i] == cls) members.push_back(i);
        const auto need = spec.train_per_class + spec.test_per_class;
        if (members.size() < need) {
            throw std::invalid_argument("balanced_split: class " + std::to_string(cls) + " has " +
                                        std::to_string(members.size()) + " instances, need " + std::to_string(need));
        }
        std::shuffle(members.begin(), members.end(), rng);
        out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(spec.train_per_class));
        out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(spec.train_per_class),
                        members.begin() + static_cast<std::ptrdiff_t>(need));
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

// ---------------------------------------------------------------------------

struct SyntheticSpec {
    std::size_t views = 3;
    std::size_t classes = 2;
    std::size_t per_class = 60;
    std::vector<std::size_t> dims = {3, 3, 3};
    std::uint64_t seed = 0;
    // Distance between adjacent class centers in units of the latent spread.
    double separation = 6.0;
    double noise = 0.1;
    std::size_t latent_dim = 2;
};

// Gaussian class blobs in a latent space pushed through seeded random linear
// maps per view, plus isotropic noise. Class c carries digit label
// c * 10 / classes so that two classes land on opposite binary labels.
inline MultiViewDataset synthesize_dataset(const SyntheticSpec& spec) {
    if (spec.views < 1 || spec.classes < 1 || spec.per_class < 1 || spec.latent_dim < 1 || spec.classes > 10) {
        throw std::invalid_argument("synthesize_dataset: sizes must be positive (classes <= 10)");
    }
    if (spec.dims.size() != spec.views) throw std::invalid_argument("synthesize_dataset: one dimension per view required");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto n = spec.classes * spec.per_class;
    const auto latent = static_cast<Eigen::Index>(spec.latent_dim);

    Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(spec.classes), latent);
    for (std::size_t c = 0; c < spec.classes; ++c) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(spec.classes);
        const double radius = spec.classes > 1 ? spec.separation / (2.0 * std::sin(std::numbers::pi / static_cast<double>(spec.classes))) : 0.0;
        centers(static_cast<Eigen::Index>(c), 0) = radius * std::cos(angle);
        if (latent > 1) centers(static_cast<Eigen::Index>(c), 1) = radius * std::sin(angle);
    }
    Eigen::MatrixXd z(static_cast<Eigen::Index>(n), latent);
    MultiViewDataset ds;
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = i / spec.per_class;
        ds.labels[i] = static_cast<int>(c * 10 / spec.classes);
        for (Eigen::Index l = 0; l < latent; ++l) z(static_cast<Eigen::Index>(i), l) = centers(static_cast<Eigen::Index>(c), l) + gauss(rng);
    }
    for (std::size_t m = 0; m < spec.views; ++m) {
        const auto d = static_cast<Eigen::Index>(spec.dims[m]);
        if (d < 1) throw std::invalid_argument("synthesize_dataset: view dimension must be positive");
        Eigen::MatrixXd map(latent, d);
        for (Eigen::Index a = 0; a < latent; ++a)
            for (Eigen::Index b = 0; b < d; ++b) map(a, b) = gauss(rng);
        FeatureMatrix x = z * map;
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index b = 0; b < d; ++b) x(i, b) += spec.noise * gauss(rng);
        ds.views.push_back(std::move(x));
        ds.info.push_back({"v" + std::to_string(m + 1), spec.dims[m]});
    }
    ds.provenance = "synthetic:seed=" + std::to_string(spec.seed);
    return ds;
}

// "N d" header, then one row per line.
inline void write_view(std::ostream& os, const FeatureMatrix& x) {
    os << x.rows() << ' ' << x.cols() << '\n';
    char buf[40];
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", x(i, j));
            if (j) os << ' ';
            os << buf;
        }
        os << '\n';
    }
}

}  // namespace lqmvkl
