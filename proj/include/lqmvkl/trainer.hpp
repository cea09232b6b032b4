#pragma once

// Two-stage training: gradient ascent of each view's circuit parameters on
// the hybrid alignment, then alternating optimization of the combination
// weights through a non-negative quadratic program.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lqmvkl/alignment.hpp"
#include "lqmvkl/kernel.hpp"
#include "lqmvkl/qsim.hpp"

namespace lqmvkl {

inline constexpr double weight_floor = 1e-8;

struct TrainConfig {
    double lambda = 0.125;
    std::size_t k1 = 8;
    std::size_t k2 = 8;
    double learning_rate = 2.0;
    std::size_t max_iter_stage1 = 50;
    std::size_t max_iter_stage2 = 20;
    double eps1 = 1e-4;
    double eps2 = 1e-4;
    // Instances sampled per Stage-1 gradient step; 0 means full batch.
    std::size_t batch = 16;
    std::uint64_t seed = 0;
    AnchorPolicy policy = AnchorPolicy::include_anchor;

    void validate(std::size_t n) const {
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("TrainConfig: lambda must lie in [0, 1]");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be positive");
        if (max_iter_stage1 < 1 || max_iter_stage2 < 1) throw std::invalid_argument("TrainConfig: T1, T2 must be >= 1");
        if (!(eps1 >= 0.0) || !(eps2 >= 0.0)) throw std::invalid_argument("TrainConfig: eps1, eps2 must be >= 0");
        for (auto k : {k1, k2}) {
            if (k < 2 || k > n) {
                throw std::invalid_argument("TrainConfig: neighbor count " + std::to_string(k) + " must lie in [2, " +
                                            std::to_string(n) + "]");
            }
        }
    }

    AlignmentConfig stage1_alignment() const { return {lambda, k1}; }
    AlignmentConfig stage2_alignment() const { return {lambda, k2}; }
};

// Uniform in [0, 2pi) for every beta and gamma.
template <class Rng>
qsim::AnsatzParams random_params(std::size_t depth, Rng& rng) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::vector<double> b(depth), g(depth);
    for (auto& v : b) v = angle(rng);
    for (auto& v : g) v = angle(rng);
    return {std::move(b), std::move(g)};
}

// ---------------------------------------------------------------------------
// Checkpoints: blank-line separated records of key=value lines.
//
//   stage=1|2
//   view=<name>         (stage 1; "combined" for stage 2)
//   iteration=<t>       (1-based)
//   hta=<value>
//   theta=<b_1,..,b_P,g_1,..,g_P>   (stage 1, parameters after the update)
//   eta=<e_1,..,e_M>                (stage 2, weights after the update)

struct CheckpointRecord {
    int stage = 1;
    std::string view;
    std::size_t iteration = 0;
    double hta = 0.0;
    std::vector<double> theta;
    std::vector<double> eta;

    friend bool operator==(const CheckpointRecord&, const CheckpointRecord&) = default;
};

namespace detail {

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string join_reals(const std::vector<double>& v, char sep = ',') {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += format_real(v[i]);
    }
    return out;
}

inline std::vector<double> split_reals(const std::string& s, char sep = ',') {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const CheckpointRecord& r) {
    os << "stage=" << r.stage << '\n' << "view=" << r.view << '\n' << "iteration=" << r.iteration << '\n'
       << "hta=" << detail::format_real(r.hta) << '\n';
    if (!r.theta.empty()) os << "theta=" << detail::join_reals(r.theta) << '\n';
    if (!r.eta.empty()) os << "eta=" << detail::join_reals(r.eta) << '\n';
    os << '\n';
}

inline std::vector<CheckpointRecord> read_checkpoints(std::istream& is) {
    std::vector<CheckpointRecord> out;
    std::optional<CheckpointRecord> cur;
    std::string line;
    auto flush = [&] {
        if (cur) out.push_back(*cur);
        cur.reset();
    };
    while (std::getline(is, line)) {
        if (line.empty()) {
            flush();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("checkpoint: malformed line '" + line + "'");
        if (!cur) cur.emplace();
        const auto key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key == "stage") cur->stage = std::stoi(value);
        else if (key == "view") cur->view = value;
        else if (key == "iteration") cur->iteration = std::stoul(value);
        else if (key == "hta") cur->hta = std::stod(value);
        else if (key == "theta") cur->theta = detail::split_reals(value);
        else if (key == "eta") cur->eta = detail::split_reals(value);
        else throw std::runtime_error("checkpoint: unknown key '" + key + "'");
    }
    flush();
    return out;
}

// ---------------------------------------------------------------------------
// Stage 1

struct BaseKernelResult {
    std::string view;
    qsim::AnsatzParams initial;
    qsim::AnsatzParams trained;
    // Full-batch HTA measured at the start of every iteration.
    std::vector<double> hta_trace;
    double initial_hta = 0.0;
    // Full-batch HTA at the returned parameters.
    double final_hta = 0.0;
    KernelMatrix kernel;
    NeighborSets neighbors;
};

struct Stage1Result {
    std::vector<BaseKernelResult> views;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& view, std::size_t iteration)
        : std::runtime_error("stage 1 diverged on view '" + view + "' at iteration " + std::to_string(iteration) +
                             " (non-finite gradient)"),
          iteration_(iteration) {}
    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

namespace detail {

inline Eigen::VectorXd block_alignment_gradient(const KernelMatrix& k, const EncodedDataset& enc,
                                                const TargetKernel& target, std::span<const std::size_t> idx) {
    return alignment_gradient(restrict(k, idx), enc.gradient_block(idx), target.restrict(idx));
}

}  // namespace detail

// Full-batch hybrid-alignment gradient with respect to theta.
inline Eigen::VectorXd hybrid_alignment_gradient(const FeatureMatrix& x, const TargetKernel& target,
                                                 const NeighborSets& neighbors, const qsim::AnsatzParams& params,
                                                 const AlignmentConfig& config) {
    const EncodedDataset enc(x, params, true);
    const KernelMatrix k = enc.kernel_matrix();
    std::vector<std::size_t> all(target.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::vector<Eigen::VectorXd> locals;
    locals.reserve(all.size());
    for (std::size_t i : all) locals.push_back(detail::block_alignment_gradient(k, enc, target, neighbors[i]));
    return hybrid_gradient(detail::block_alignment_gradient(k, enc, target, all), locals, config);
}

inline BaseKernelResult train_base_kernel(const FeatureMatrix& x, const TargetKernel& target,
                                          const qsim::AnsatzParams& initial, const TrainConfig& config,
                                          const std::string& view = "view", std::ostream* checkpoint = nullptr) {
    const auto n = target.size();
    if (static_cast<std::size_t>(x.rows()) != n) throw std::invalid_argument("train_base_kernel: row/label count mismatch");
    config.validate(n);
    initial.validate();

    const AlignmentConfig align = config.stage1_alignment();
    BaseKernelResult out;
    out.view = view;
    out.initial = initial;
    out.neighbors = knn_by_distance(x, config.k1, config.policy);

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    const bool full_batch = config.batch == 0 || config.batch >= n;

    std::vector<double> theta = initial.flat();
    double previous = 0.0;
    for (std::size_t t = 1; t <= config.max_iter_stage1; ++t) {
        const auto params = qsim::AnsatzParams::from_flat(theta);
        const EncodedDataset enc(x, params, true);
        const KernelMatrix k = enc.kernel_matrix();
        const double hta = hybrid_alignment(k, target, out.neighbors, align);
        out.hta_trace.push_back(hta);

        std::vector<std::size_t> anchors;
        if (full_batch) {
            anchors = order;
        } else {
            std::shuffle(order.begin(), order.end(), rng);
            anchors.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.batch));
            std::sort(anchors.begin(), anchors.end());
        }
        std::vector<Eigen::VectorXd> locals;
        locals.reserve(anchors.size());
        for (auto i : anchors) locals.push_back(detail::block_alignment_gradient(k, enc, target, out.neighbors[i]));
        const Eigen::VectorXd g =
            hybrid_gradient(detail::block_alignment_gradient(k, enc, target, anchors), locals, align);
        if (!g.allFinite()) throw TrainingDiverged(view, t);

        for (std::size_t p = 0; p < theta.size(); ++p) theta[p] += config.learning_rate * g[static_cast<Eigen::Index>(p)];
        if (checkpoint) write_checkpoint(*checkpoint, {1, view, t, hta, theta, {}});
        if (std::abs(hta - previous) <= config.eps1) break;
        previous = hta;
    }

    out.trained = qsim::AnsatzParams::from_flat(theta);
    out.initial_hta = out.hta_trace.front();
    out.kernel = quantum_kernel_matrix(x, out.trained);
    out.final_hta = hybrid_alignment(out.kernel, target, out.neighbors, align);
    return out;
}

// ---------------------------------------------------------------------------
// Stage 2

struct WeightVector {
    std::vector<double> eta;
    std::vector<double> mu;
    std::vector<double> tau;
};

struct Stage2Result {
    WeightVector weights;
    std::vector<double> hta_trace;
    // HTA of the combined kernel at the returned weights.
    double final_hta = 0.0;
    KernelMatrix combined;
    NeighborSets neighbors;
};

// M_qr = <K^q, K^r>_F
inline Eigen::MatrixXd view_gram(std::span<const KernelMatrix> views) {
    const auto m = static_cast<Eigen::Index>(views.size());
    Eigen::MatrixXd g(m, m);
    for (Eigen::Index q = 0; q < m; ++q)
        for (Eigen::Index r = q; r < m; ++r)
            g(q, r) = g(r, q) = frobenius_inner(views[static_cast<std::size_t>(q)], views[static_cast<std::size_t>(r)]);
    return g;
}

// M^i_qr = <K^q_i, K^r_i>_F for each neighborhood.
inline std::vector<Eigen::MatrixXd> local_view_grams(std::span<const KernelMatrix> views, const NeighborSets& neighbors) {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(neighbors.size());
    std::vector<KernelMatrix> local(views.size());
    for (const auto& idx : neighbors.lists) {
        for (std::size_t m = 0; m < views.size(); ++m) local[m] = restrict(views[m], idx);
        out.push_back(view_gram(local));
    }
    return out;
}

inline Eigen::VectorXd compute_tau(std::span<const double> eta, std::span<const Eigen::MatrixXd> local_grams,
                                   const Eigen::MatrixXd& global_gram) {
    const Eigen::Map<const Eigen::VectorXd> e(eta.data(), static_cast<Eigen::Index>(eta.size()));
    if (global_gram.rows() != e.size() || global_gram.cols() != e.size()) {
        throw std::invalid_argument("compute_tau: gram size does not match weight count");
    }
    const double denom = e.dot(global_gram * e);
    if (!(denom > 0.0)) throw std::invalid_argument("compute_tau: nonpositive denominator (degenerate kernels)");
    Eigen::VectorXd tau(static_cast<Eigen::Index>(local_grams.size()));
    for (std::size_t i = 0; i < local_grams.size(); ++i) {
        const double v = e.dot(local_grams[i] * e) / denom;
        if (!(v > 0.0)) throw std::invalid_argument("compute_tau: nonpositive ratio at instance " + std::to_string(i));
        tau[static_cast<Eigen::Index>(i)] = v;
    }
    return tau;
}

struct LinearTerms {
    Eigen::VectorXd a;
    Eigen::VectorXd b;
};

// a_q = 1/(Nk) sum_i <K^q_i, K*_i>_F / sqrt(tau_i),  b_q = <K^q, K*>_F / N
inline LinearTerms compute_linear_terms(std::span<const KernelMatrix> views, const NeighborSets& neighbors,
                                        const TargetKernel& target, const Eigen::VectorXd& tau, std::size_t k) {
    const auto n = target.size();
    if (neighbors.size() != n || static_cast<std::size_t>(tau.size()) != n) {
        throw std::invalid_argument("compute_linear_terms: size mismatch");
    }
    for (Eigen::Index i = 0; i < tau.size(); ++i)
        if (!(tau[i] > 0.0)) throw std::invalid_argument("compute_linear_terms: nonpositive tau at " + std::to_string(i));
    const auto m = static_cast<Eigen::Index>(views.size());
    LinearTerms out{Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)};
    for (Eigen::Index q = 0; q < m; ++q) {
        const auto& kq = views[static_cast<std::size_t>(q)];
        double local = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& idx = neighbors[i];
            local += detail::label_weighted_sum(restrict(kq, idx), target.restrict(idx)) /
                     std::sqrt(tau[static_cast<Eigen::Index>(i)]);
        }
        out.a[q] = local / (static_cast<double>(n) * static_cast<double>(k));
        out.b[q] = detail::label_weighted_sum(kq, target) / static_cast<double>(n);
    }
    return out;
}

struct QpOptions {
    double floor = weight_floor;
    std::size_t max_iter = 10'000;
    double tol = 1e-10;
};

// mu^T M mu - (1 - lambda) mu^T a - lambda mu^T b
inline double qp_objective(const Eigen::MatrixXd& gram, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                           double lambda, const Eigen::VectorXd& mu) {
    return mu.dot(gram * mu) - (1.0 - lambda) * mu.dot(a) - lambda * mu.dot(b);
}

// Per-coordinate KKT check for the floor-constrained problem.
inline bool qp_kkt_satisfied(const Eigen::MatrixXd& gram, const Eigen::VectorXd& c, const Eigen::VectorXd& mu,
                             double floor, double rel_tol = 1e-6) {
    const Eigen::VectorXd at_floor = Eigen::VectorXd::Constant(mu.size(), floor);
    const double scale = 1.0 + (2.0 * gram * at_floor - c).norm();
    const Eigen::VectorXd grad = 2.0 * gram * mu - c;
    for (Eigen::Index q = 0; q < mu.size(); ++q) {
        if (mu[q] < floor) return false;
        const bool pinned = mu[q] == floor && grad[q] >= -rel_tol * scale;
        if (!pinned && std::abs(grad[q]) > rel_tol * scale) return false;
    }
    return true;
}

class QpNotConverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

// Solves the equality system on the given free coordinates, all others held
// at the floor. min_norm takes the minimum-norm solution of a singular block.
inline std::optional<Eigen::VectorXd> solve_free_block(const Eigen::MatrixXd& gram, const Eigen::VectorXd& c,
                                                       const std::vector<Eigen::Index>& free, double floor,
                                                       bool min_norm) {
    const auto m = gram.rows();
    Eigen::VectorXd out = Eigen::VectorXd::Constant(m, floor);
    if (free.empty()) return out;
    std::vector<bool> is_free(static_cast<std::size_t>(m), false);
    for (auto q : free) is_free[static_cast<std::size_t>(q)] = true;
    const auto f = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd a(f, f);
    Eigen::VectorXd rhs(f);
    for (Eigen::Index r = 0; r < f; ++r) {
        const auto row = free[static_cast<std::size_t>(r)];
        rhs[r] = c[row];
        for (Eigen::Index q = 0; q < m; ++q)
            if (!is_free[static_cast<std::size_t>(q)]) rhs[r] -= 2.0 * gram(row, q) * floor;
        for (Eigen::Index s = 0; s < f; ++s) a(r, s) = 2.0 * gram(row, free[static_cast<std::size_t>(s)]);
    }
    Eigen::VectorXd sol;
    if (min_norm) {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
        cod.setThreshold(1e-10);
        cod.compute(a);
        sol = cod.solve(rhs);
    } else {
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
        if (ldlt.info() != Eigen::Success) return std::nullopt;
        sol = ldlt.solve(rhs);
    }
    if (!sol.allFinite()) return std::nullopt;
    for (Eigen::Index r = 0; r < f; ++r) {
        if (sol[r] < floor) return std::nullopt;
        out[free[static_cast<std::size_t>(r)]] = sol[r];
    }
    return out;
}

// Exact solve of the free block for the active set of mu.
inline std::optional<Eigen::VectorXd> polish_active_set(const Eigen::MatrixXd& gram, const Eigen::VectorXd& c,
                                                        const Eigen::VectorXd& mu, double floor) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index q = 0; q < mu.size(); ++q)
        if (mu[q] > floor) free.push_back(q);
    auto out = solve_free_block(gram, c, free, floor, false);
    if (!out || !qp_kkt_satisfied(gram, c, *out, floor)) return std::nullopt;
    return out;
}

// A singular gram matrix leaves a face of minimizers and coordinate descent
// lands on whichever end it reaches first. Re-solve for the minimum-norm
// point over the free and degenerate (floored, zero gradient) coordinates,
// so exchangeable views share weight.
inline Eigen::VectorXd prefer_min_norm(const Eigen::MatrixXd& gram, const Eigen::VectorXd& c,
                                       const Eigen::VectorXd& mu, double floor) {
    const Eigen::VectorXd at_floor = Eigen::VectorXd::Constant(mu.size(), floor);
    const double scale = 1.0 + (2.0 * gram * at_floor - c).norm();
    const Eigen::VectorXd grad = 2.0 * gram * mu - c;
    std::vector<Eigen::Index> free;
    for (Eigen::Index q = 0; q < mu.size(); ++q)
        if (mu[q] > floor || std::abs(grad[q]) <= 1e-9 * scale) free.push_back(q);
    const auto alt = solve_free_block(gram, c, free, floor, true);
    if (!alt || !qp_kkt_satisfied(gram, c, *alt, floor)) return mu;
    const double f0 = mu.dot(gram * mu) - mu.dot(c), f1 = alt->dot(gram * *alt) - alt->dot(c);
    if (f1 > f0 + 1e-12 * (1.0 + std::abs(f0))) return mu;
    return *alt;
}

}  // namespace detail

// Projected coordinate descent with exact per-coordinate minimization and
// clamping at the floor. Every 50 sweeps the current active set is tried
// with an exact solve of the free block.
inline Eigen::VectorXd solve_nonneg_qp(const Eigen::MatrixXd& gram, const Eigen::VectorXd& a,
                                       const Eigen::VectorXd& b, double lambda, const QpOptions& opts = {}) {
    const auto m = gram.rows();
    if (gram.cols() != m || a.size() != m || b.size() != m) throw std::invalid_argument("solve_nonneg_qp: size mismatch");
    if (m < 1 || m > 64) throw std::invalid_argument("solve_nonneg_qp: view count must lie in [1, 64]");
    if (!(gram - gram.transpose()).isZero(1e-12 * (1.0 + gram.cwiseAbs().maxCoeff()))) {
        throw std::invalid_argument("solve_nonneg_qp: gram matrix is not symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double psd_tol = 1e-8 * std::max(1.0, gram.diagonal().cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -psd_tol) throw std::invalid_argument("solve_nonneg_qp: gram matrix is not PSD");

    const Eigen::VectorXd c = (1.0 - lambda) * a + lambda * b;
    Eigen::VectorXd mu = Eigen::VectorXd::Constant(m, opts.floor);
    for (std::size_t sweep = 1; sweep <= opts.max_iter; ++sweep) {
        double largest_step = 0.0;
        for (Eigen::Index q = 0; q < m; ++q) {
            const double off = gram.row(q).dot(mu) - gram(q, q) * mu[q];
            double next;
            if (gram(q, q) > 0.0) {
                next = std::max(opts.floor, (c[q] - 2.0 * off) / (2.0 * gram(q, q)));
            } else if (c[q] - 2.0 * off <= 0.0) {
                next = opts.floor;
            } else {
                throw std::invalid_argument("solve_nonneg_qp: objective unbounded below");
            }
            largest_step = std::max(largest_step, std::abs(next - mu[q]));
            mu[q] = next;
        }
        if (largest_step <= opts.tol) return detail::prefer_min_norm(gram, c, mu, opts.floor);
        if (sweep % 50 == 0) {
            if (auto exact = detail::polish_active_set(gram, c, mu, opts.floor))
                return detail::prefer_min_norm(gram, c, *exact, opts.floor);
        }
    }
    if (auto exact = detail::polish_active_set(gram, c, mu, opts.floor))
        return detail::prefer_min_norm(gram, c, *exact, opts.floor);
    throw QpNotConverged("solve_nonneg_qp: no convergence within " + std::to_string(opts.max_iter) + " sweeps");
}

// eta = mu / sum(mu), then entries below the floor are raised to it and the
// rest rescaled so that the total stays one.
inline std::vector<double> normalize_weights(const Eigen::VectorXd& mu) {
    const double total = mu.sum();
    if (!(total > 0.0)) throw std::invalid_argument("normalize_weights: nonpositive total");
    std::vector<double> eta(static_cast<std::size_t>(mu.size()));
    for (std::size_t q = 0; q < eta.size(); ++q) eta[q] = mu[static_cast<Eigen::Index>(q)] / total;
    std::vector<bool> pinned(eta.size(), false);
    for (bool changed = true; changed;) {
        changed = false;
        double pinned_mass = 0.0, free_mass = 0.0;
        for (std::size_t q = 0; q < eta.size(); ++q) {
            if (!pinned[q] && eta[q] < weight_floor) {
                pinned[q] = true;
                changed = true;
            }
            if (pinned[q]) {
                eta[q] = weight_floor;
                pinned_mass += weight_floor;
            } else {
                free_mass += eta[q];
            }
        }
        if (free_mass > 0.0)
            for (std::size_t q = 0; q < eta.size(); ++q)
                if (!pinned[q]) eta[q] *= (1.0 - pinned_mass) / free_mass;
    }
    return eta;
}

inline Stage2Result train_weights(std::span<const KernelMatrix> views, const TargetKernel& target,
                                  std::vector<double> initial_eta, const TrainConfig& config,
                                  std::ostream* checkpoint = nullptr) {
    const auto n = target.size();
    if (views.empty()) throw std::invalid_argument("train_weights: no view kernels");
    for (const auto& v : views) {
        if (static_cast<std::size_t>(v.rows()) != n || v.cols() != v.rows()) {
            throw std::invalid_argument("train_weights: view kernel size does not match label count");
        }
    }
    if (initial_eta.size() != views.size()) throw std::invalid_argument("train_weights: weight count mismatch");
    config.validate(n);
    const AlignmentConfig align = config.stage2_alignment();

    Stage2Result out;
    out.weights.eta = std::move(initial_eta);
    if (views.size() == 1) {
        out.weights.eta = {1.0};
        out.weights.mu = {1.0};
        out.combined = views.front();
        out.neighbors = knn_by_kernel(out.combined, config.k2, config.policy);
        out.final_hta = hybrid_alignment(out.combined, target, out.neighbors, align);
        out.hta_trace = {out.final_hta};
        const auto grams = local_view_grams(views, out.neighbors);
        const auto tau = compute_tau(out.weights.eta, grams, view_gram(views));
        out.weights.tau.assign(tau.data(), tau.data() + tau.size());
        return out;
    }

    const Eigen::MatrixXd gram = view_gram(views);
    double previous = 0.0;
    for (std::size_t t = 1; t <= config.max_iter_stage2; ++t) {
        const KernelMatrix combined = combine_kernels(views, out.weights.eta);
        const NeighborSets neighbors = knn_by_kernel(combined, config.k2, config.policy);
        const double hta = hybrid_alignment(combined, target, neighbors, align);
        out.hta_trace.push_back(hta);

        const auto grams = local_view_grams(views, neighbors);
        const Eigen::VectorXd tau = compute_tau(out.weights.eta, grams, gram);
        const LinearTerms terms = compute_linear_terms(views, neighbors, target, tau, config.k2);
        const Eigen::VectorXd mu = solve_nonneg_qp(gram, terms.a, terms.b, config.lambda);

        out.weights.mu.assign(mu.data(), mu.data() + mu.size());
        out.weights.tau.assign(tau.data(), tau.data() + tau.size());
        out.weights.eta = normalize_weights(mu);
        if (checkpoint) write_checkpoint(*checkpoint, {2, "combined", t, hta, {}, out.weights.eta});
        if (std::abs(hta - previous) <= config.eps2) break;
        previous = hta;
    }

    out.combined = combine_kernels(views, out.weights.eta);
    out.neighbors = knn_by_kernel(out.combined, config.k2, config.policy);
    out.final_hta = hybrid_alignment(out.combined, target, out.neighbors, align);
    return out;
}

}  // namespace lqmvkl
