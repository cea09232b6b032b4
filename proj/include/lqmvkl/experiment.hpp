#pragma once

// Experiment protocol: split, preprocess, build base kernels, train, fit the
// SVM on the combined kernel, score on the test split, aggregate over
// repeats, and write reports.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lqmvkl/alignment.hpp"
#include "lqmvkl/dataset.hpp"
#include "lqmvkl/kernel.hpp"
#include "lqmvkl/svm.hpp"
#include "lqmvkl/trainer.hpp"

namespace lqmvkl {

enum class KernelFamily { quantum, classical };
enum class ReportFormat { csv, jsonl };

inline constexpr const char* dataset_dir_env = "LQMVKL_DATASET_DIR";

struct ExperimentConfig {
    std::string dataset_dir;
    bool synthetic = false;
    SyntheticSpec synthetic_spec;
    TrainConfig train;
    std::size_t depth = 6;
    std::size_t pca_dim = 6;
    double svm_c = 1.0;
    std::size_t repeats = 20;
    std::uint64_t seed = 0;
    KernelFamily family = KernelFamily::quantum;
    bool trained = true;
    // Empty (or "multi") selects the multi-view kernel.
    std::string view;
    std::size_t train_per_class = 40;
    std::size_t test_per_class = 40;

    void validate() const {
        if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
        if (depth < 1) throw std::invalid_argument("depth must be >= 1");
        if (pca_dim < 1) throw std::invalid_argument("pca dimension must be >= 1");
        if (!(svm_c > 0.0)) throw std::invalid_argument("svm C must be positive");
        if (train_per_class < 1 || test_per_class < 1) throw std::invalid_argument("split sizes must be >= 1");
        if (!synthetic && dataset_dir.empty()) {
            throw std::invalid_argument(std::string("no dataset: pass --dataset-dir, set ") + dataset_dir_env +
                                        ", or use --synthetic");
        }
        train.validate(2 * train_per_class);
    }

    // Resolved configuration as key=value lines; keys match the CLI flags.
    std::string to_text() const {
        std::ostringstream os;
        auto real = [](double v) { return detail::format_real(v); };
        if (!synthetic) os << "dataset-dir=" << dataset_dir << '\n';
        os << "synthetic=" << (synthetic ? "true" : "false") << '\n';
        if (synthetic) {
            os << "synthetic-views=" << synthetic_spec.views << '\n'
               << "synthetic-dim=" << (synthetic_spec.dims.empty() ? 0 : synthetic_spec.dims.front()) << '\n'
               << "synthetic-per-class=" << synthetic_spec.per_class << '\n'
               << "synthetic-seed=" << synthetic_spec.seed << '\n'
               << "synthetic-separation=" << real(synthetic_spec.separation) << '\n'
               << "synthetic-noise=" << real(synthetic_spec.noise) << '\n';
        }
        os << "mode=" << (family == KernelFamily::quantum ? "quantum" : "classical") << '\n'
           << "trained=" << (trained ? "true" : "false") << '\n'
           << "view=" << (view.empty() ? "multi" : view) << '\n'
           << "lambda=" << real(train.lambda) << '\n'
           << "k1=" << train.k1 << '\n'
           << "k2=" << train.k2 << '\n'
           << "depth=" << depth << '\n'
           << "pca-dim=" << pca_dim << '\n'
           << "repeats=" << repeats << '\n'
           << "seed=" << seed << '\n'
           << "svm-c=" << real(svm_c) << '\n'
           << "lr=" << real(train.learning_rate) << '\n'
           << "t1=" << train.max_iter_stage1 << '\n'
           << "t2=" << train.max_iter_stage2 << '\n'
           << "eps1=" << real(train.eps1) << '\n'
           << "eps2=" << real(train.eps2) << '\n'
           << "batch=" << train.batch << '\n'
           << "train-per-class=" << train_per_class << '\n'
           << "test-per-class=" << test_per_class << '\n';
        return os.str();
    }
};

// One cell of a results table: kernel family, training flag, and either a
// single view or the multi-view combination.
struct Arm {
    KernelFamily family = KernelFamily::quantum;
    bool trained = true;
    std::optional<std::size_t> view;

    std::string mode_name() const {
        if (family == KernelFamily::classical) return "classical";
        return trained ? "quantum-trained" : "quantum-untrained";
    }
};

struct RepeatRecord {
    std::size_t repeat = 0;
    std::uint64_t seed = 0;
    // Test accuracy as a fraction.
    double accuracy = 0.0;
    // HTA of the combined kernel at the returned weights.
    double combined_hta = 0.0;
    // Per-view HTA of the base kernels (distance neighbors, k1).
    std::vector<double> view_hta;
    std::vector<double> eta;
    std::vector<double> stage2_trace;
    std::vector<std::vector<double>> stage1_traces;
    std::string digit_counts;
    double seconds = 0.0;
};

struct RunReport {
    std::string mode;
    std::string view;
    std::vector<std::string> view_names;
    std::string axis;
    std::optional<double> axis_value;
    std::string config_text;
    std::vector<RepeatRecord> repeats;

    double mean_accuracy() const {
        double s = 0.0;
        for (const auto& r : repeats) s += r.accuracy;
        return s / static_cast<double>(repeats.size());
    }
    // Population standard deviation over repeats.
    double std_accuracy() const {
        const double m = mean_accuracy();
        double s = 0.0;
        for (const auto& r : repeats) s += (r.accuracy - m) * (r.accuracy - m);
        return std::sqrt(s / static_cast<double>(repeats.size()));
    }
    double mean_combined_hta() const {
        double s = 0.0;
        for (const auto& r : repeats) s += r.combined_hta;
        return s / static_cast<double>(repeats.size());
    }
    std::vector<double> mean_view_hta() const { return mean_of(&RepeatRecord::view_hta); }
    std::vector<double> mean_eta() const { return mean_of(&RepeatRecord::eta); }

private:
    std::vector<double> mean_of(std::vector<double> RepeatRecord::*field) const {
        std::vector<double> out((repeats.front().*field).size(), 0.0);
        for (const auto& r : repeats)
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += (r.*field)[i];
        for (auto& v : out) v /= static_cast<double>(repeats.size());
        return out;
    }
};

// ---------------------------------------------------------------------------

inline MultiViewDataset load_dataset(const ExperimentConfig& cfg) {
    if (cfg.synthetic) return synthesize_dataset(cfg.synthetic_spec);
    return load_mfeat(cfg.dataset_dir);
}

struct PreparedSplit {
    std::vector<FeatureMatrix> train;
    std::vector<FeatureMatrix> test;
    std::vector<int> y_train;
    std::vector<int> y_test;
    std::string digit_counts;
};

// Split, then fit PCA and scaling on the training rows only; the fitted
// records are applied unchanged to the test rows.
inline PreparedSplit prepare_split(const MultiViewDataset& ds, const ExperimentConfig& cfg, std::uint64_t seed) {
    ds.validate();
    const auto binary = binarize_labels(ds.labels);
    const auto split = balanced_split(binary, {cfg.train_per_class, cfg.test_per_class, seed});
    PreparedSplit out;
    for (auto i : split.train) out.y_train.push_back(binary[i]);
    for (auto i : split.test) out.y_test.push_back(binary[i]);

    std::map<int, std::pair<int, int>> counts;
    for (auto i : split.train) ++counts[ds.labels[i]].first;
    for (auto i : split.test) ++counts[ds.labels[i]].second;
    for (const auto& [digit, c] : counts) {
        if (!out.digit_counts.empty()) out.digit_counts += ';';
        out.digit_counts += std::to_string(digit) + ':' + std::to_string(c.first) + '/' + std::to_string(c.second);
    }

    std::vector<std::size_t> fit_rows(split.train.size());
    for (std::size_t i = 0; i < fit_rows.size(); ++i) fit_rows[i] = i;
    for (std::size_t m = 0; m < ds.num_views(); ++m) {
        const auto& x = ds.views[m];
        const FeatureMatrix xtr = select_rows(x, split.train), xte = select_rows(x, split.test);
        const auto dim = std::min<std::size_t>(cfg.pca_dim, static_cast<std::size_t>(x.cols()));
        // A view whose training rows span fewer than pca_dim directions
        // (MOR, on some splits) keeps only its rank, with a warning.
        PcaTransform pca;
        try {
            pca = pca_fit(xtr, dim, fit_rows, RankPolicy::clamp_to_rank);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("view '" + ds.info[m].name + "': " + e.what());
        }
        if (static_cast<std::size_t>(pca.components.cols()) < dim) {
            std::cerr << "warning: split seed " << seed << ", view '" << ds.info[m].name << "': training rank "
                      << pca.components.cols() << " < " << dim << ", keeping " << pca.components.cols()
                      << " components\n";
        }
        const FeatureMatrix rtr = pca.apply(xtr);
        const ScalingRecord scale = scale_fit(rtr, fit_rows);
        out.train.push_back(scale.apply(rtr));
        out.test.push_back(scale.apply(pca.apply(xte)));
    }
    return out;
}

struct ViewKernels {
    std::vector<KernelMatrix> train;
    std::vector<KernelMatrix> cross;
    std::vector<double> hta;
    std::vector<std::vector<double>> traces;
};

struct QuantumKernels {
    ViewKernels untrained;
    std::optional<ViewKernels> trained;
};

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(salt)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

inline std::vector<std::size_t> arm_views(const std::optional<std::size_t>& view, std::size_t m) {
    if (view) return {*view};
    std::vector<std::size_t> all(m);
    for (std::size_t i = 0; i < m; ++i) all[i] = i;
    return all;
}

}  // namespace detail

inline ViewKernels classical_kernels(const PreparedSplit& data, const ExperimentConfig& cfg,
                                     std::span<const std::size_t> views) {
    const TargetKernel target(data.y_train);
    ViewKernels out;
    for (auto m : views) {
        const auto& xtr = data.train[m];
        const double sigma = mean_pairwise_distance(xtr);
        out.train.push_back(gaussian_kernel_matrix(xtr, sigma));
        out.cross.push_back(gaussian_cross_kernel_matrix(data.test[m], xtr, sigma));
        const auto nbr = knn_by_distance(xtr, cfg.train.k1, cfg.train.policy);
        out.hta.push_back(hybrid_alignment(out.train.back(), target, nbr, cfg.train.stage1_alignment()));
        out.traces.emplace_back();
    }
    return out;
}

// Random initial parameters per view (shared by trained and untrained arms);
// Stage 1 runs only when train_stage1 is set.
inline QuantumKernels quantum_kernels(const PreparedSplit& data, const ExperimentConfig& cfg,
                                      std::span<const std::size_t> views, std::uint64_t seed, bool train_stage1,
                                      const std::vector<std::string>& names) {
    const TargetKernel target(data.y_train);
    QuantumKernels out;
    if (train_stage1) out.trained.emplace();
    for (auto m : views) {
        const auto& xtr = data.train[m];
        std::mt19937_64 rng(detail::derive_seed(seed, m, 0x1317));
        const auto init = random_params(cfg.depth, rng);

        out.untrained.train.push_back(quantum_kernel_matrix(xtr, init));
        out.untrained.cross.push_back(cross_kernel_matrix(data.test[m], xtr, init));
        const auto nbr = knn_by_distance(xtr, cfg.train.k1, cfg.train.policy);
        out.untrained.hta.push_back(hybrid_alignment(out.untrained.train.back(), target, nbr, cfg.train.stage1_alignment()));
        out.untrained.traces.emplace_back();

        if (train_stage1) {
            TrainConfig tc = cfg.train;
            tc.seed = detail::derive_seed(seed, m, 0x5ca1);
            auto r = train_base_kernel(xtr, target, init, tc, names[m]);
            out.trained->cross.push_back(cross_kernel_matrix(data.test[m], xtr, r.trained));
            out.trained->train.push_back(std::move(r.kernel));
            out.trained->hta.push_back(r.final_hta);
            out.trained->traces.push_back(std::move(r.hta_trace));
        }
    }
    return out;
}

// Stage 2 on the given base kernels, SVM fit, test scoring.
inline RepeatRecord evaluate_kernels(const ViewKernels& kernels, const PreparedSplit& data, const ExperimentConfig& cfg) {
    const TargetKernel target(data.y_train);
    const std::vector<double> uniform(kernels.train.size(), 1.0 / static_cast<double>(kernels.train.size()));
    const auto stage2 = train_weights(kernels.train, target, uniform, cfg.train);
    const auto model = svm_fit(stage2.combined, data.y_train, cfg.svm_c);
    const auto cross = combine_kernels(kernels.cross, stage2.weights.eta);
    const auto predicted = svm_predict(model, cross);

    RepeatRecord r;
    r.accuracy = accuracy(predicted, data.y_test);
    r.combined_hta = stage2.final_hta;
    r.view_hta = kernels.hta;
    r.eta = stage2.weights.eta;
    r.stage2_trace = stage2.hta_trace;
    r.stage1_traces = kernels.traces;
    r.digit_counts = data.digit_counts;
    return r;
}

inline ViewKernels subset(const ViewKernels& all, std::span<const std::size_t> pick) {
    ViewKernels out;
    for (auto i : pick) {
        out.train.push_back(all.train[i]);
        out.cross.push_back(all.cross[i]);
        out.hta.push_back(all.hta[i]);
        out.traces.push_back(all.traces[i]);
    }
    return out;
}

inline RunReport make_report(const Arm& arm, const MultiViewDataset& ds, const ExperimentConfig& cfg) {
    RunReport rep;
    rep.mode = arm.mode_name();
    rep.view = arm.view ? ds.info[*arm.view].name : "multi";
    for (auto m : detail::arm_views(arm.view, ds.num_views())) rep.view_names.push_back(ds.info[m].name);
    rep.config_text = cfg.to_text();
    return rep;
}

namespace detail {

template <class Body>
void for_each_repeat(const ExperimentConfig& cfg, Body&& body) {
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
        const std::uint64_t seed = cfg.seed + r;
        try {
            body(r, seed);
        } catch (const std::exception& e) {
            throw std::runtime_error("repeat " + std::to_string(r) + " (seed " + std::to_string(seed) + "): " + e.what());
        }
    }
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

inline RunReport run_pipeline(const ExperimentConfig& cfg, const MultiViewDataset& ds) {
    cfg.validate();
    Arm arm{cfg.family, cfg.trained, std::nullopt};
    if (!cfg.view.empty() && cfg.view != "multi") arm.view = ds.view_index(cfg.view);
    RunReport report = make_report(arm, ds, cfg);
    const auto views = detail::arm_views(arm.view, ds.num_views());
    std::vector<std::string> names;
    for (const auto& v : ds.info) names.push_back(v.name);

    detail::for_each_repeat(cfg, [&](std::size_t r, std::uint64_t seed) {
        const auto start = std::chrono::steady_clock::now();
        const auto data = prepare_split(ds, cfg, seed);
        ViewKernels kernels;
        if (cfg.family == KernelFamily::classical) {
            kernels = classical_kernels(data, cfg, views);
        } else {
            auto q = quantum_kernels(data, cfg, views, seed, cfg.trained, names);
            kernels = cfg.trained ? std::move(*q.trained) : std::move(q.untrained);
        }
        auto rec = evaluate_kernels(kernels, data, cfg);
        rec.repeat = r;
        rec.seed = seed;
        rec.seconds = detail::seconds_since(start);
        report.repeats.push_back(std::move(rec));
    });
    return report;
}

inline RunReport run_pipeline(const ExperimentConfig& cfg) { return run_pipeline(cfg, load_dataset(cfg)); }

// Every table cell in one pass: {classical, quantum-untrained,
// quantum-trained} x {each single view, multi-view}, sharing splits and
// base kernels within a repeat.
inline std::vector<RunReport> compare(const ExperimentConfig& cfg, const MultiViewDataset& ds) {
    cfg.validate();
    const auto m = ds.num_views();
    const auto all = detail::arm_views(std::nullopt, m);
    std::vector<std::string> names;
    for (const auto& v : ds.info) names.push_back(v.name);

    std::vector<Arm> arms;
    for (auto [family, trained] : {std::pair{KernelFamily::classical, false}, std::pair{KernelFamily::quantum, false},
                                   std::pair{KernelFamily::quantum, true}}) {
        for (std::size_t v = 0; v < m; ++v) arms.push_back({family, trained, v});
        arms.push_back({family, trained, std::nullopt});
    }
    std::vector<RunReport> reports;
    for (const auto& arm : arms) reports.push_back(make_report(arm, ds, cfg));

    detail::for_each_repeat(cfg, [&](std::size_t r, std::uint64_t seed) {
        const auto start = std::chrono::steady_clock::now();
        const auto data = prepare_split(ds, cfg, seed);
        const ViewKernels classical = classical_kernels(data, cfg, all);
        const QuantumKernels quantum = quantum_kernels(data, cfg, all, seed, true, names);
        const double kernel_seconds = detail::seconds_since(start);
        for (std::size_t a = 0; a < arms.size(); ++a) {
            const auto arm_start = std::chrono::steady_clock::now();
            const ViewKernels& source = arms[a].family == KernelFamily::classical
                                            ? classical
                                            : (arms[a].trained ? *quantum.trained : quantum.untrained);
            const auto pick = detail::arm_views(arms[a].view, m);
            auto rec = evaluate_kernels(subset(source, pick), data, cfg);
            rec.repeat = r;
            rec.seed = seed;
            rec.seconds = detail::seconds_since(arm_start) + kernel_seconds / static_cast<double>(arms.size());
            reports[a].repeats.push_back(std::move(rec));
        }
    });
    return reports;
}

enum class SweepAxis { lambda, k, depth };

inline const char* to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::lambda: return "lambda";
        case SweepAxis::k: return "k";
        case SweepAxis::depth: return "P";
    }
    return "?";
}

inline SweepAxis parse_sweep_axis(const std::string& s) {
    if (s == "lambda") return SweepAxis::lambda;
    if (s == "k") return SweepAxis::k;
    if (s == "P" || s == "p" || s == "depth") return SweepAxis::depth;
    throw std::invalid_argument("unknown sweep axis '" + s + "' (expected lambda, k or P)");
}

inline ExperimentConfig with_axis_value(ExperimentConfig cfg, SweepAxis axis, double value) {
    switch (axis) {
        case SweepAxis::lambda: cfg.train.lambda = value; break;
        case SweepAxis::k:
            if (value < 2 || value != std::floor(value)) throw std::invalid_argument("sweep: k must be an integer >= 2");
            cfg.train.k1 = cfg.train.k2 = static_cast<std::size_t>(value);
            break;
        case SweepAxis::depth:
            if (value < 1 || value != std::floor(value)) throw std::invalid_argument("sweep: P must be an integer >= 1");
            cfg.depth = static_cast<std::size_t>(value);
            break;
    }
    return cfg;
}

inline std::vector<RunReport> sweep(const ExperimentConfig& cfg, const MultiViewDataset& ds, SweepAxis axis,
                                    std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("sweep: no values");
    std::vector<RunReport> out;
    for (double v : values) {
        auto rep = run_pipeline(with_axis_value(cfg, axis, v), ds);
        rep.axis = to_string(axis);
        rep.axis_value = v;
        out.push_back(std::move(rep));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reports
//
// aggregate.{csv,jsonl}: one row per report
//   mode, view, axis, axis_value, repeats, mean_accuracy_pct, std_accuracy_pct,
//   mean_combined_hta, mean_view_hta, mean_eta, views, config
// details.{csv,jsonl}: one row per repeat
//   mode, view, axis, axis_value, repeat, seed, accuracy_pct, combined_hta,
//   view_hta, eta, stage2_trace, stage1_traces, digit_counts
// timings.csv: mode, view, axis_value, repeat, seconds
//
// List-valued CSV fields are ';'-separated (stage1_traces: views separated
// by '|'); reals carry 17 significant digits.

namespace detail {

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline std::string config_inline(const std::string& text) {
    std::string out = text;
    while (!out.empty() && out.back() == '\n') out.pop_back();
    for (auto& c : out)
        if (c == '\n') c = ';';
    return out;
}

inline std::string join_names(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ";" : "") + v[i];
    return out;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
        os << content;
        if (!os.flush()) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string axis_text(const RunReport& r) { return r.axis_value ? format_real(*r.axis_value) : ""; }

}  // namespace detail

inline nlohmann::json aggregate_json(const RunReport& r) {
    return {{"mode", r.mode},
            {"view", r.view},
            {"axis", r.axis},
            {"axis_value", r.axis_value ? nlohmann::json(*r.axis_value) : nlohmann::json(nullptr)},
            {"repeats", r.repeats.size()},
            {"mean_accuracy_pct", 100.0 * r.mean_accuracy()},
            {"std_accuracy_pct", 100.0 * r.std_accuracy()},
            {"mean_combined_hta", r.mean_combined_hta()},
            {"mean_view_hta", r.mean_view_hta()},
            {"mean_eta", r.mean_eta()},
            {"views", r.view_names},
            {"config", r.config_text}};
}

inline nlohmann::json detail_json(const RunReport& r, const RepeatRecord& d) {
    return {{"mode", r.mode},
            {"view", r.view},
            {"axis", r.axis},
            {"axis_value", r.axis_value ? nlohmann::json(*r.axis_value) : nlohmann::json(nullptr)},
            {"repeat", d.repeat},
            {"seed", d.seed},
            {"accuracy_pct", 100.0 * d.accuracy},
            {"combined_hta", d.combined_hta},
            {"view_hta", d.view_hta},
            {"eta", d.eta},
            {"stage2_trace", d.stage2_trace},
            {"stage1_traces", d.stage1_traces},
            {"digit_counts", d.digit_counts}};
}

struct ReportFiles {
    std::filesystem::path aggregate;
    std::filesystem::path details;
    std::filesystem::path timings;
};

inline std::string render_aggregate(std::span<const RunReport> reports, ReportFormat format) {
    std::ostringstream os;
    if (format == ReportFormat::jsonl) {
        for (const auto& r : reports) os << aggregate_json(r).dump() << '\n';
        return os.str();
    }
    using detail::format_real;
    os << "mode,view,axis,axis_value,repeats,mean_accuracy_pct,std_accuracy_pct,mean_combined_hta,mean_view_hta,"
          "mean_eta,views,config\n";
    for (const auto& r : reports) {
        os << r.mode << ',' << r.view << ',' << r.axis << ',' << detail::axis_text(r) << ',' << r.repeats.size() << ','
           << format_real(100.0 * r.mean_accuracy()) << ',' << format_real(100.0 * r.std_accuracy()) << ','
           << format_real(r.mean_combined_hta()) << ',' << detail::join_reals(r.mean_view_hta(), ';') << ','
           << detail::join_reals(r.mean_eta(), ';') << ',' << detail::join_names(r.view_names) << ','
           << detail::csv_quote(detail::config_inline(r.config_text)) << '\n';
    }
    return os.str();
}

inline std::string render_details(std::span<const RunReport> reports, ReportFormat format) {
    std::ostringstream os;
    if (format == ReportFormat::jsonl) {
        for (const auto& r : reports)
            for (const auto& d : r.repeats) os << detail_json(r, d).dump() << '\n';
        return os.str();
    }
    using detail::format_real;
    os << "mode,view,axis,axis_value,repeat,seed,accuracy_pct,combined_hta,view_hta,eta,stage2_trace,stage1_traces,"
          "digit_counts\n";
    for (const auto& r : reports) {
        for (const auto& d : r.repeats) {
            std::string traces;
            for (std::size_t v = 0; v < d.stage1_traces.size(); ++v) {
                if (v) traces += '|';
                traces += detail::join_reals(d.stage1_traces[v], ';');
            }
            os << r.mode << ',' << r.view << ',' << r.axis << ',' << detail::axis_text(r) << ',' << d.repeat << ','
               << d.seed << ',' << format_real(100.0 * d.accuracy) << ',' << format_real(d.combined_hta) << ','
               << detail::join_reals(d.view_hta, ';') << ',' << detail::join_reals(d.eta, ';') << ','
               << detail::join_reals(d.stage2_trace, ';') << ',' << traces << ',' << d.digit_counts << '\n';
        }
    }
    return os.str();
}

inline std::string render_timings(std::span<const RunReport> reports) {
    std::ostringstream os;
    os << "mode,view,axis_value,repeat,seconds\n";
    for (const auto& r : reports)
        for (const auto& d : r.repeats)
            os << r.mode << ',' << r.view << ',' << detail::axis_text(r) << ',' << d.repeat << ','
               << detail::format_real(d.seconds) << '\n';
    return os.str();
}

inline ReportFiles emit_report(std::span<const RunReport> reports, ReportFormat format,
                               const std::filesystem::path& out_dir) {
    if (reports.empty()) throw std::invalid_argument("emit_report: no reports");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out_dir.string() + ": " + ec.message());
    const std::string ext = format == ReportFormat::csv ? ".csv" : ".jsonl";
    ReportFiles files{out_dir / ("aggregate" + ext), out_dir / ("details" + ext), out_dir / "timings.csv"};
    detail::write_atomic(files.aggregate, render_aggregate(reports, format));
    detail::write_atomic(files.details, render_details(reports, format));
    detail::write_atomic(files.timings, render_timings(reports));
    return files;
}

}  // namespace lqmvkl
