#pragma once

// Kernel-target alignment in global, local (k-nearest-neighbor) and hybrid
// form, plus the analytic alignment gradient used for circuit training.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lqmvkl/kernel.hpp"

namespace lqmvkl {

// Ideal kernel K* = y y^T for labels in {-1, +1}.
class TargetKernel {
public:
    explicit TargetKernel(std::vector<int> labels) : labels_(std::move(labels)) {
        if (labels_.empty()) throw std::invalid_argument("TargetKernel: no labels");
        for (int y : labels_)
            if (y != -1 && y != 1) throw std::invalid_argument("TargetKernel: labels must be -1 or +1");
    }

    std::size_t size() const noexcept { return labels_.size(); }
    int operator[](std::size_t i) const { return labels_[i]; }
    const std::vector<int>& labels() const noexcept { return labels_; }

    Eigen::MatrixXd matrix() const {
        const auto n = static_cast<Eigen::Index>(labels_.size());
        Eigen::MatrixXd k(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                k(i, j) = labels_[static_cast<std::size_t>(i)] * labels_[static_cast<std::size_t>(j)];
        return k;
    }

    TargetKernel restrict(std::span<const std::size_t> idx) const {
        std::vector<int> out;
        out.reserve(idx.size());
        for (auto i : idx) out.push_back(labels_.at(i));
        return TargetKernel(std::move(out));
    }

private:
    std::vector<int> labels_;
};

enum class NeighborMode { distance, kernel };

// Whether N(x_i) holds the anchor itself plus k-1 others, or k others.
enum class AnchorPolicy { include_anchor, exclude_anchor };

struct NeighborSets {
    std::vector<std::vector<std::size_t>> lists;
    NeighborMode mode = NeighborMode::distance;
    AnchorPolicy policy = AnchorPolicy::include_anchor;

    std::size_t size() const noexcept { return lists.size(); }
    const std::vector<std::size_t>& operator[](std::size_t i) const { return lists[i]; }

    void write(std::ostream& os) const {
        for (std::size_t i = 0; i < lists.size(); ++i) {
            os << i << ':';
            for (auto j : lists[i]) os << ' ' << j;
            os << '\n';
        }
    }

    friend bool operator==(const NeighborSets&, const NeighborSets&) = default;
};

struct AlignmentConfig {
    double lambda = 0.125;
    std::size_t k = 8;

    void validate(std::size_t n) const {
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("AlignmentConfig: lambda must lie in [0, 1]");
        if (k < 2 || k > n) {
            throw std::invalid_argument("AlignmentConfig: k=" + std::to_string(k) + " must lie in [2, " +
                                        std::to_string(n) + "]");
        }
    }
};

inline Eigen::MatrixXd restrict(const Eigen::MatrixXd& k, std::span<const std::size_t> idx) {
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b)
            out(a, b) = k(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(a)]),
                          static_cast<Eigen::Index>(idx[static_cast<std::size_t>(b)]));
    return out;
}

inline KernelGradient restrict(const KernelGradient& grad, std::span<const std::size_t> idx) {
    KernelGradient out;
    out.reserve(grad.size());
    for (const auto& g : grad) out.push_back(restrict(g, idx));
    return out;
}

inline double frobenius_inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("frobenius_inner: shape mismatch");
    return (a.array() * b.array()).sum();
}

namespace detail {

inline void check_square(const Eigen::MatrixXd& k, std::size_t n, const char* who) {
    if (k.rows() != k.cols() || static_cast<std::size_t>(k.rows()) != n) {
        throw std::invalid_argument(std::string(who) + ": kernel is " + std::to_string(k.rows()) + "x" +
                                    std::to_string(k.cols()) + " but there are " + std::to_string(n) + " labels");
    }
}

// sum_ij y_i y_j K_ij
inline double label_weighted_sum(const Eigen::MatrixXd& k, const TargetKernel& t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
        double row = 0.0;
        for (Eigen::Index j = 0; j < k.cols(); ++j) row += t[static_cast<std::size_t>(j)] * k(i, j);
        s += t[static_cast<std::size_t>(i)] * row;
    }
    return s;
}

}  // namespace detail

// sum_ij y_i y_j K_ij / (N sqrt(sum_ij K_ij^2))
inline double target_alignment(const Eigen::MatrixXd& k, const TargetKernel& target) {
    detail::check_square(k, target.size(), "target_alignment");
    const double norm = k.norm();
    if (!(norm > 0.0)) throw std::invalid_argument("target_alignment: zero kernel matrix");
    return detail::label_weighted_sum(k, target) / (static_cast<double>(target.size()) * norm);
}

inline double local_target_alignment(const Eigen::MatrixXd& k, const TargetKernel& target,
                                     const NeighborSets& neighbors) {
    detail::check_square(k, target.size(), "local_target_alignment");
    if (neighbors.size() != target.size()) throw std::invalid_argument("local_target_alignment: neighbor count mismatch");
    double sum = 0.0;
    for (const auto& idx : neighbors.lists) sum += target_alignment(restrict(k, idx), target.restrict(idx));
    return sum / static_cast<double>(neighbors.size());
}

inline double hybrid_alignment(const Eigen::MatrixXd& k, const TargetKernel& target, const NeighborSets& neighbors,
                               const AlignmentConfig& config) {
    const double lta = local_target_alignment(k, target, neighbors);
    const double ta = target_alignment(k, target);
    return (1.0 - config.lambda) * lta + config.lambda * ta;
}

namespace detail {

// Ascending order of (score, index) pairs; index breaks ties.
template <class Score>
std::vector<std::size_t> neighbors_of(std::size_t anchor, std::size_t n, std::size_t k, AnchorPolicy policy,
                                      Score&& score) {
    std::vector<std::size_t> others;
    others.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
        if (j != anchor) others.push_back(j);
    const std::size_t take = policy == AnchorPolicy::include_anchor ? k - 1 : k;
    if (take > others.size()) throw std::invalid_argument("neighbor search: k exceeds available instances");
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(take), others.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double sa = score(a), sb = score(b);
                          return sa < sb || (sa == sb && a < b);
                      });
    std::vector<std::size_t> out;
    out.reserve(k);
    if (policy == AnchorPolicy::include_anchor) out.push_back(anchor);
    out.insert(out.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(take));
    return out;
}

inline void check_k(std::size_t k, std::size_t n, AnchorPolicy policy) {
    if (k > n) throw std::invalid_argument("k=" + std::to_string(k) + " exceeds N=" + std::to_string(n));
    if (k < 1 || (policy == AnchorPolicy::exclude_anchor && k >= n)) {
        throw std::invalid_argument("k=" + std::to_string(k) + " invalid for N=" + std::to_string(n));
    }
}

}  // namespace detail

// Euclidean k-nearest neighbors; the anchor is always listed first.
inline NeighborSets knn_by_distance(const FeatureMatrix& x, std::size_t k,
                                    AnchorPolicy policy = AnchorPolicy::include_anchor) {
    const auto n = static_cast<std::size_t>(x.rows());
    detail::check_k(k, n, policy);
    NeighborSets out{{}, NeighborMode::distance, policy};
    out.lists.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.lists.push_back(detail::neighbors_of(i, n, k, policy, [&](std::size_t j) {
            return (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).squaredNorm();
        }));
    }
    return out;
}

// Largest off-diagonal kernel values of each row.
inline NeighborSets knn_by_kernel(const Eigen::MatrixXd& k_combined, std::size_t k,
                                  AnchorPolicy policy = AnchorPolicy::include_anchor) {
    if (k_combined.rows() != k_combined.cols()) throw std::invalid_argument("knn_by_kernel: kernel must be square");
    const auto n = static_cast<std::size_t>(k_combined.rows());
    detail::check_k(k, n, policy);
    NeighborSets out{{}, NeighborMode::kernel, policy};
    out.lists.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.lists.push_back(detail::neighbors_of(i, n, k, policy, [&](std::size_t j) {
            return -k_combined(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }));
    }
    return out;
}

// d TA / d theta given d K_ij / d theta for every entry:
// [sum yy dK * sum K^2 - sum yy K * sum K dK] / (N (sum K^2)^{3/2})
inline Eigen::VectorXd alignment_gradient(const Eigen::MatrixXd& k, const KernelGradient& grad_k,
                                          const TargetKernel& target) {
    detail::check_square(k, target.size(), "alignment_gradient");
    const double sq = k.squaredNorm();
    if (!(sq > 0.0)) throw std::invalid_argument("alignment_gradient: zero kernel matrix");
    const double aligned = detail::label_weighted_sum(k, target);
    const double denom = static_cast<double>(target.size()) * sq * std::sqrt(sq);
    Eigen::VectorXd g(static_cast<Eigen::Index>(grad_k.size()));
    for (std::size_t p = 0; p < grad_k.size(); ++p) {
        const auto& dk = grad_k[p];
        if (dk.rows() != k.rows() || dk.cols() != k.cols()) {
            throw std::invalid_argument("alignment_gradient: gradient block shape mismatch");
        }
        g[static_cast<Eigen::Index>(p)] =
            (detail::label_weighted_sum(dk, target) * sq - aligned * frobenius_inner(k, dk)) / denom;
    }
    return g;
}

// (1 - lambda)/N sum_i g_i + lambda g, with N the number of local gradients.
inline Eigen::VectorXd hybrid_gradient(const Eigen::VectorXd& global_grad, std::span<const Eigen::VectorXd> local_grads,
                                       const AlignmentConfig& config) {
    if (local_grads.empty()) throw std::invalid_argument("hybrid_gradient: no local gradients");
    Eigen::VectorXd local = Eigen::VectorXd::Zero(global_grad.size());
    for (const auto& g : local_grads) {
        if (g.size() != global_grad.size()) throw std::invalid_argument("hybrid_gradient: length mismatch");
        local += g;
    }
    return (1.0 - config.lambda) / static_cast<double>(local_grads.size()) * local + config.lambda * global_grad;
}

}  // namespace lqmvkl
