#pragma once

// Quantum and classical base kernels, their matrices and parameter
// gradients, and the linear multi-kernel combination.

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lqmvkl/qsim.hpp"

namespace lqmvkl {

using KernelMatrix = Eigen::MatrixXd;
// One row per instance; rows are contiguous so they can be viewed as spans.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
// gradient[k](i, j) = d kappa(x_i, x_j) / d theta_k
using KernelGradient = std::vector<Eigen::MatrixXd>;

inline std::span<const double> row_span(const FeatureMatrix& x, Eigen::Index i) {
    return {x.row(i).data(), static_cast<std::size_t>(x.cols())};
}

struct ViewInfo {
    std::string name;
    std::size_t dimension = 0;
};

struct ViewKernelSet {
    std::vector<KernelMatrix> matrices;
    std::vector<qsim::AnsatzParams> params;
    std::vector<ViewInfo> views;

    std::size_t size() const noexcept { return matrices.size(); }

    void validate() const {
        if (matrices.empty()) throw std::invalid_argument("ViewKernelSet: at least one view required");
        for (const auto& m : matrices) {
            if (m.rows() != matrices.front().rows() || m.cols() != matrices.front().cols()) {
                throw std::invalid_argument("ViewKernelSet: view matrices differ in size");
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Quantum kernel

inline double quantum_kernel_value(std::span<const double> xi, std::span<const double> xj,
                                   const qsim::AnsatzParams& params) {
    return qsim::zero_probability(qsim::run_circuit(qsim::build_overlap_circuit(xi, xj, params)));
}

// Per-occurrence parameter-shift gradient of the overlap circuit. Every tagged
// rotation R(phi), phi = scale * theta_k, contributes
// scale * (f(phi + pi/2) - f(phi - pi/2)) / 2 to d kappa / d theta_k.
inline Eigen::VectorXd quantum_kernel_gradient(std::span<const double> xi, std::span<const double> xj,
                                               const qsim::AnsatzParams& params) {
    const qsim::Circuit base = qsim::build_overlap_circuit(xi, xj, params);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()));
    constexpr double shift = std::numbers::pi / 2.0;
    qsim::Circuit shifted = base;
    for (std::size_t g = 0; g < base.gates.size(); ++g) {
        const auto& gate = base.gates[g];
        if (!gate.param) continue;
        shifted.gates[g].angle = *gate.angle + shift;
        const double plus = qsim::zero_probability(qsim::run_circuit(shifted));
        shifted.gates[g].angle = *gate.angle - shift;
        const double minus = qsim::zero_probability(qsim::run_circuit(shifted));
        shifted.gates[g].angle = gate.angle;
        grad[static_cast<Eigen::Index>(gate.param->index)] += gate.param->scale * 0.5 * (plus - minus);
    }
    return grad;
}

// Encoded states W(x_i)|0> for every row, optionally with parameter tangents.
// kappa(x_i, x_j) = |<psi_j|psi_i>|^2 equals the zero-outcome probability of
// the overlap circuit.
class EncodedDataset {
public:
    EncodedDataset(const FeatureMatrix& x, const qsim::AnsatzParams& params, bool with_tangents)
        : num_params_(params.size()) {
        if (x.rows() < 1 || x.cols() < 1) throw std::invalid_argument("EncodedDataset: empty feature matrix");
        encoded_.reserve(static_cast<std::size_t>(x.rows()));
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const auto circuit = qsim::build_ansatz_circuit(row_span(x, i), params);
            if (with_tangents) {
                encoded_.push_back(qsim::encode_with_tangents(circuit, num_params_));
            } else {
                encoded_.push_back({qsim::run_circuit(circuit), {}});
            }
        }
        has_tangents_ = with_tangents;
    }

    std::size_t size() const noexcept { return encoded_.size(); }
    std::size_t num_params() const noexcept { return num_params_; }
    const qsim::EncodedState& operator[](std::size_t i) const { return encoded_[i]; }

    double kernel(std::size_t i, std::size_t j) const {
        if (i == j) return 1.0;
        return overlap_probability(encoded_[i].state, encoded_[j].state);
    }

    static double overlap_probability(const qsim::StateVector& a, const qsim::StateVector& b) {
        return std::clamp(std::norm(qsim::inner_product(b.amplitudes(), a.amplitudes())), 0.0, 1.0);
    }

    // Gradient entries for the index block idx x idx.
    KernelGradient gradient_block(std::span<const std::size_t> idx) const {
        if (!has_tangents_) throw std::logic_error("EncodedDataset: tangents were not computed");
        const auto n = static_cast<Eigen::Index>(idx.size());
        KernelGradient out(num_params_, Eigen::MatrixXd::Zero(n, n));
        for (Eigen::Index a = 0; a < n; ++a) {
            for (Eigen::Index b = a + 1; b < n; ++b) {
                const auto& si = encoded_[idx[static_cast<std::size_t>(a)]];
                const auto& sj = encoded_[idx[static_cast<std::size_t>(b)]];
                if (&si == &sj) continue;
                const qsim::complex o = qsim::inner_product(sj.state.amplitudes(), si.state.amplitudes());
                for (std::size_t k = 0; k < num_params_; ++k) {
                    const qsim::complex d =
                        qsim::inner_product(sj.state.amplitudes(), si.tangents[k].amplitudes()) +
                        qsim::inner_product(sj.tangents[k].amplitudes(), si.state.amplitudes());
                    const double g = 2.0 * std::real(std::conj(o) * d);
                    out[k](a, b) = g;
                    out[k](b, a) = g;
                }
            }
        }
        return out;
    }

    KernelGradient gradient_matrix() const {
        std::vector<std::size_t> all(size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return gradient_block(all);
    }

    KernelMatrix kernel_matrix() const {
        const auto n = static_cast<Eigen::Index>(size());
        KernelMatrix k = KernelMatrix::Identity(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                k(i, j) = k(j, i) = kernel(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            }
        }
        return k;
    }

private:
    std::size_t num_params_;
    bool has_tangents_ = false;
    std::vector<qsim::EncodedState> encoded_;
};

inline KernelMatrix quantum_kernel_matrix(const FeatureMatrix& x, const qsim::AnsatzParams& params) {
    if (x.rows() < 2) throw std::invalid_argument("quantum_kernel_matrix: need at least two instances");
    return EncodedDataset(x, params, false).kernel_matrix();
}

inline KernelMatrix cross_kernel_matrix(const FeatureMatrix& x_test, const FeatureMatrix& x_train,
                                        const qsim::AnsatzParams& params) {
    if (x_test.cols() != x_train.cols()) {
        throw std::invalid_argument("cross_kernel_matrix: test dimension " + std::to_string(x_test.cols()) +
                                    " differs from train dimension " + std::to_string(x_train.cols()));
    }
    const EncodedDataset test(x_test, params, false), train(x_train, params, false);
    KernelMatrix k(x_test.rows(), x_train.rows());
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
        for (Eigen::Index j = 0; j < k.cols(); ++j) {
            k(i, j) = EncodedDataset::overlap_probability(test[static_cast<std::size_t>(i)].state,
                                                          train[static_cast<std::size_t>(j)].state);
        }
    }
    return k;
}

// ---------------------------------------------------------------------------
// Gaussian baseline

// Bandwidth: mean Euclidean distance over unordered pairs of rows.
inline double mean_pairwise_distance(const FeatureMatrix& x) {
    if (x.rows() < 2) throw std::invalid_argument("mean_pairwise_distance: need at least two instances");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = i + 1; j < x.rows(); ++j) sum += (x.row(i) - x.row(j)).norm();
    const double pairs = 0.5 * static_cast<double>(x.rows()) * static_cast<double>(x.rows() - 1);
    return sum / pairs;
}

inline KernelMatrix gaussian_cross_kernel_matrix(const FeatureMatrix& a, const FeatureMatrix& b, double sigma) {
    if (a.cols() != b.cols()) throw std::invalid_argument("gaussian_cross_kernel_matrix: dimension mismatch");
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian kernel: degenerate bandwidth (all points identical)");
    KernelMatrix k(a.rows(), b.rows());
    const double denom = 2.0 * sigma * sigma;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = std::exp(-(a.row(i) - b.row(j)).squaredNorm() / denom);
    return k;
}

inline KernelMatrix gaussian_kernel_matrix(const FeatureMatrix& x, double sigma) {
    KernelMatrix k = gaussian_cross_kernel_matrix(x, x, sigma);
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
        k(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) k(i, j) = k(j, i);
    }
    return k;
}

inline KernelMatrix gaussian_kernel_matrix(const FeatureMatrix& x) {
    return gaussian_kernel_matrix(x, mean_pairwise_distance(x));
}

// ---------------------------------------------------------------------------

inline KernelMatrix combine_kernels(std::span<const KernelMatrix> views, std::span<const double> weights) {
    if (views.empty()) throw std::invalid_argument("combine_kernels: no views");
    if (weights.size() != views.size()) {
        throw std::invalid_argument("combine_kernels: " + std::to_string(weights.size()) + " weights for " +
                                    std::to_string(views.size()) + " views");
    }
    KernelMatrix out = KernelMatrix::Zero(views.front().rows(), views.front().cols());
    for (std::size_t m = 0; m < views.size(); ++m) {
        if (views[m].rows() != out.rows() || views[m].cols() != out.cols()) {
            throw std::invalid_argument("combine_kernels: view matrices differ in size");
        }
        out += weights[m] * views[m];
    }
    return out;
}

inline KernelMatrix combine_kernels(const ViewKernelSet& set, std::span<const double> weights) {
    set.validate();
    return combine_kernels(std::span<const KernelMatrix>(set.matrices), weights);
}

// Text format: "rows cols" then one row per line, 17 significant digits.
inline void write_kernel_matrix(std::ostream& os, const KernelMatrix& k) {
    os << k.rows() << ' ' << k.cols() << '\n';
    char buf[40];
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
        for (Eigen::Index j = 0; j < k.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", k(i, j));
            if (j) os << ' ';
            os << buf;
        }
        os << '\n';
    }
}

inline KernelMatrix read_kernel_matrix(std::istream& is) {
    Eigen::Index rows = 0, cols = 0;
    if (!(is >> rows >> cols) || rows < 0 || cols < 0) throw std::runtime_error("kernel matrix: bad header");
    KernelMatrix k(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            if (!(is >> k(i, j))) throw std::runtime_error("kernel matrix: truncated data");
    return k;
}

}  // namespace lqmvkl
