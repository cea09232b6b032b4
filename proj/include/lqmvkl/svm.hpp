#pragma once

// Soft-margin C-SVC on a precomputed kernel. The dual is solved by pairwise
// working-set optimization with second-order working-set selection.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lqmvkl/kernel.hpp"

namespace lqmvkl {

struct SvmOptions {
    double tolerance = 1e-3;
    std::size_t max_iter = 10'000'000;
};

struct SvmModel {
    std::vector<double> alpha;
    double bias = 0.0;
    std::vector<std::size_t> support;
    std::vector<int> labels;
    double c = 1.0;
    std::size_t iterations = 0;
    // Decision values on the training kernel, cached at fit time.
    std::vector<double> train_decision;

    std::size_t train_size() const noexcept { return labels.size(); }
};

namespace detail {

inline double svm_decision_row(const SvmModel& model, const KernelMatrix& k, Eigen::Index row) {
    double s = 0.0;
    for (auto j : model.support) {
        s += model.alpha[j] * model.labels[j] * k(row, static_cast<Eigen::Index>(j));
    }
    return s + model.bias;
}

}  // namespace detail

inline std::vector<double> svm_decision_values(const SvmModel& model, const KernelMatrix& k_cross) {
    if (static_cast<std::size_t>(k_cross.cols()) != model.train_size()) {
        throw std::invalid_argument("svm: cross kernel has " + std::to_string(k_cross.cols()) +
                                    " columns, model was trained on " + std::to_string(model.train_size()));
    }
    std::vector<double> out(static_cast<std::size_t>(k_cross.rows()));
    for (Eigen::Index i = 0; i < k_cross.rows(); ++i) out[static_cast<std::size_t>(i)] = detail::svm_decision_row(model, k_cross, i);
    return out;
}

// sign(0) is +1.
inline std::vector<int> svm_predict(const SvmModel& model, const KernelMatrix& k_cross) {
    const auto values = svm_decision_values(model, k_cross);
    std::vector<int> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [](double v) { return v >= 0.0 ? 1 : -1; });
    return out;
}

inline SvmModel svm_fit(const KernelMatrix& k, std::span<const int> y, double c, const SvmOptions& opts = {}) {
    const auto n = y.size();
    if (k.rows() != k.cols() || static_cast<std::size_t>(k.rows()) != n) {
        throw std::invalid_argument("svm_fit: kernel size does not match label count");
    }
    if (!(c > 0.0)) throw std::invalid_argument("svm_fit: C must be positive");
    bool has_pos = false, has_neg = false;
    for (int v : y) {
        if (v == 1) has_pos = true;
        else if (v == -1) has_neg = true;
        else throw std::invalid_argument("svm_fit: labels must be -1 or +1");
    }
    if (!has_pos || !has_neg) throw std::invalid_argument("svm_fit: both classes must be present");
    const double sym_tol = 1e-9 * std::max(1.0, k.cwiseAbs().maxCoeff());
    if ((k - k.transpose()).cwiseAbs().maxCoeff() > sym_tol) {
        throw std::invalid_argument("svm_fit: kernel matrix is not symmetric");
    }

    auto q = [&](std::size_t i, std::size_t j) {
        return static_cast<double>(y[i] * y[j]) * k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    };
    constexpr double tau = 1e-12;
    std::vector<double> alpha(n, 0.0), grad(n, -1.0);
    auto in_up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < c) || (y[t] == -1 && alpha[t] > 0.0); };
    auto in_low = [&](std::size_t t) { return (y[t] == 1 && alpha[t] > 0.0) || (y[t] == -1 && alpha[t] < c); };

    std::size_t iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (in_up(t) && -y[t] * grad[t] > gmax) {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        double gmin = std::numeric_limits<double>::infinity();
        double best = std::numeric_limits<double>::infinity();
        std::size_t j = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (!in_low(t)) continue;
            const double v = -y[t] * grad[t];
            gmin = std::min(gmin, v);
            if (i == n || v >= gmax) continue;
            const double b = gmax - v;
            double a = q(i, i) + q(t, t) - 2.0 * y[i] * y[t] * q(i, t);
            if (a <= 0.0) a = tau;
            const double score = -(b * b) / a;
            if (score < best) {
                best = score;
                j = t;
            }
        }
        if (i == n || j == n || gmax - gmin < opts.tolerance) break;

        const double old_i = alpha[i], old_j = alpha[j];
        if (y[i] != y[j]) {
            double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if (quad <= 0.0) quad = tau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = diff; }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[i] > c) { alpha[i] = c; alpha[j] = c - diff; }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if (quad <= 0.0) quad = tau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) { alpha[i] = c; alpha[j] = sum - c; }
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) { alpha[j] = c; alpha[i] = sum - c; }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < n; ++t) grad[t] += q(i, t) * di + q(j, t) * dj;
    }

    SvmModel model;
    model.c = c;
    model.iterations = iter;
    model.labels.assign(y.begin(), y.end());
    model.alpha = alpha;
    for (std::size_t t = 0; t < n; ++t)
        if (alpha[t] > 0.0) model.support.push_back(t);

    // Offset: mean of y_t * grad_t over free vectors, else the midpoint of
    // the feasible interval.
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (alpha[t] >= c) {
            if (y[t] == -1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0.0) {
            if (y[t] == 1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++free_count;
            free_sum += yg;
        }
    }
    const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : 0.5 * (ub + lb);
    model.bias = -rho;
    model.train_decision = svm_decision_values(model, k);
    return model;
}

inline double accuracy(std::span<const int> predicted, std::span<const int> actual) {
    if (predicted.size() != actual.size()) throw std::invalid_argument("accuracy: length mismatch");
    if (predicted.empty()) throw std::invalid_argument("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == actual[i];
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

// Plain-text model: key lines "c", "bias", "n", then "sv <index> <label> <alpha>".
inline void write_svm_model(std::ostream& os, const SvmModel& m) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", m.c);
    os << "c " << buf << '\n';
    std::snprintf(buf, sizeof buf, "%.17g", m.bias);
    os << "bias " << buf << '\n' << "n " << m.labels.size() << '\n';
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", m.alpha[i]);
        os << "sv " << i << ' ' << m.labels[i] << ' ' << buf << '\n';
    }
}

inline SvmModel read_svm_model(std::istream& is) {
    SvmModel m;
    std::string key;
    std::size_t n = 0;
    if (!(is >> key >> m.c) || key != "c") throw std::runtime_error("svm model: expected 'c'");
    if (!(is >> key >> m.bias) || key != "bias") throw std::runtime_error("svm model: expected 'bias'");
    if (!(is >> key >> n) || key != "n") throw std::runtime_error("svm model: expected 'n'");
    m.alpha.assign(n, 0.0);
    m.labels.assign(n, 0);
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t idx = 0;
        if (!(is >> key >> idx) || key != "sv" || idx >= n) throw std::runtime_error("svm model: bad sv line");
        is >> m.labels[idx] >> m.alpha[idx];
    }
    for (std::size_t i = 0; i < n; ++i)
        if (m.alpha[i] > 0.0) m.support.push_back(i);
    return m;
}

}  // namespace lqmvkl
