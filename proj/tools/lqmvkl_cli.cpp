// Command-line experiment runner.
//
//   lqmvkl run       one configuration (kernel family, trained flag, view)
//   lqmvkl compare   classical / untrained / trained x every view + multi-view
//   lqmvkl sweep     one run per value of lambda, k or P
//   lqmvkl preprocess  dump the preprocessed split of the first repeat

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lqmvkl/lqmvkl.hpp"

namespace {

using namespace lqmvkl;

struct Options {
    ExperimentConfig cfg;
    std::string mode = "quantum";
    std::string format = "csv";
    std::string out_dir = "results";
    std::size_t synthetic_dim = 3;
    bool multi_view = false;
};

void add_common(CLI::App& app, Options& o) {
    app.set_config("--config", "", "key=value configuration file; flags override it");
    app.add_option("--dataset-dir", o.cfg.dataset_dir, "Directory holding mfeat-fou ... mfeat-mor")
        ->envname(dataset_dir_env);
    app.add_flag("--synthetic", o.cfg.synthetic, "Use the synthetic multi-view generator instead of Mfeat");
    app.add_option("--synthetic-views", o.cfg.synthetic_spec.views, "Synthetic: number of views");
    app.add_option("--synthetic-dim", o.synthetic_dim, "Synthetic: dimension of every view");
    app.add_option("--synthetic-per-class", o.cfg.synthetic_spec.per_class, "Synthetic: instances per class");
    app.add_option("--synthetic-seed", o.cfg.synthetic_spec.seed, "Synthetic: generator seed");
    app.add_option("--synthetic-separation", o.cfg.synthetic_spec.separation, "Synthetic: class center distance");
    app.add_option("--synthetic-noise", o.cfg.synthetic_spec.noise, "Synthetic: per-feature noise level");
    app.add_option("--mode", o.mode, "Kernel family")->check(CLI::IsMember({"quantum", "classical"}));
    app.add_flag("--trained,!--untrained", o.cfg.trained, "Train circuit parameters (Stage 1) or keep them random");
    app.add_option("--view", o.cfg.view, "Single view by name (fou, fac, kar, pix, zer, mor; v1.. for synthetic)");
    app.add_flag("--multi-view", o.multi_view, "Combine every view (default)");
    app.add_option("--lambda", o.cfg.train.lambda, "Hybrid parameter")->check(CLI::Range(0.0, 1.0));
    app.add_option("--k1", o.cfg.train.k1, "Neighbors for circuit training");
    app.add_option("--k2", o.cfg.train.k2, "Neighbors for weight training");
    app.add_option("--depth", o.cfg.depth, "Circuit depth P")->check(CLI::PositiveNumber);
    app.add_option("--pca-dim", o.cfg.pca_dim, "Reduced dimension per view")->check(CLI::PositiveNumber);
    app.add_option("--repeats", o.cfg.repeats, "Number of repeats")->check(CLI::PositiveNumber);
    app.add_option("--seed", o.cfg.seed, "Seed base; repeat r uses seed + r");
    app.add_option("--svm-c", o.cfg.svm_c, "SVM regularization C")->check(CLI::PositiveNumber);
    app.add_option("--lr", o.cfg.train.learning_rate, "Stage-1 learning rate")->check(CLI::PositiveNumber);
    app.add_option("--t1", o.cfg.train.max_iter_stage1, "Stage-1 iteration cap")->check(CLI::PositiveNumber);
    app.add_option("--t2", o.cfg.train.max_iter_stage2, "Stage-2 iteration cap")->check(CLI::PositiveNumber);
    app.add_option("--eps1", o.cfg.train.eps1, "Stage-1 convergence threshold")->check(CLI::NonNegativeNumber);
    app.add_option("--eps2", o.cfg.train.eps2, "Stage-2 convergence threshold")->check(CLI::NonNegativeNumber);
    app.add_option("--batch", o.cfg.train.batch, "Stage-1 batch size (0 = full batch)");
    app.add_option("--train-per-class", o.cfg.train_per_class, "Training instances per binary class");
    app.add_option("--test-per-class", o.cfg.test_per_class, "Test instances per binary class");
    app.add_option("--out", o.out_dir, "Output directory");
    app.add_option("--format", o.format, "Report format")->check(CLI::IsMember({"csv", "jsonl"}));
}

ExperimentConfig resolve(Options& o) {
    ExperimentConfig cfg = o.cfg;
    cfg.family = o.mode == "classical" ? KernelFamily::classical : KernelFamily::quantum;
    if (o.multi_view || cfg.view == "multi") cfg.view.clear();
    if (cfg.synthetic) cfg.synthetic_spec.dims.assign(cfg.synthetic_spec.views, o.synthetic_dim);
    cfg.validate();
    return cfg;
}

ReportFormat format_of(const Options& o) { return o.format == "jsonl" ? ReportFormat::jsonl : ReportFormat::csv; }

void print_table(const std::vector<RunReport>& reports) {
    std::printf("%-18s %-6s %-8s %16s %18s\n", "mode", "view", "axis", "accuracy %", "HTA(K^c) %");
    for (const auto& r : reports) {
        std::string axis = r.axis_value ? r.axis + "=" + detail::format_real(*r.axis_value) : "-";
        std::printf("%-18s %-6s %-8s %8.2f +- %5.2f %18.2f\n", r.mode.c_str(), r.view.c_str(), axis.c_str(),
                    100.0 * r.mean_accuracy(), 100.0 * r.std_accuracy(), 100.0 * r.mean_combined_hta());
    }
}

void finish(const std::vector<RunReport>& reports, const Options& o) {
    print_table(reports);
    const auto files = emit_report(reports, format_of(o), o.out_dir);
    std::printf("wrote %s, %s, %s\n", files.aggregate.c_str(), files.details.c_str(), files.timings.c_str());
}

void preprocess(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const auto ds = load_dataset(cfg);
    const auto data = prepare_split(ds, cfg, cfg.seed);
    std::filesystem::create_directories(out);
    for (std::size_t m = 0; m < ds.num_views(); ++m) {
        std::ofstream tr(out / (ds.info[m].name + "_train.txt")), te(out / (ds.info[m].name + "_test.txt"));
        write_view(tr, data.train[m]);
        write_view(te, data.test[m]);
    }
    std::ofstream ltr(out / "labels_train.txt"), lte(out / "labels_test.txt");
    for (int y : data.y_train) ltr << y << '\n';
    for (int y : data.y_test) lte << y << '\n';
    std::printf("wrote %zu views (%zu train / %zu test rows) to %s\n", ds.num_views(), data.y_train.size(),
                data.y_test.size(), out.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum multi-view kernel learning with hybrid global-local alignment"};
    app.require_subcommand(1);

    Options run_opts, cmp_opts, sweep_opts, pre_opts;
    auto* run = app.add_subcommand("run", "Run one configuration over all repeats");
    add_common(*run, run_opts);
    auto* cmp = app.add_subcommand("compare", "Classical, untrained and trained kernels for every view and multi-view");
    add_common(*cmp, cmp_opts);
    auto* swp = app.add_subcommand("sweep", "Repeat the configured run for each value of one hyperparameter");
    add_common(*swp, sweep_opts);
    std::string axis;
    std::vector<double> values;
    swp->add_option("--axis", axis, "lambda, k or P")->required()->check(CLI::IsMember({"lambda", "k", "P"}));
    swp->add_option("--values", values, "Axis values")->required()->expected(1, -1);
    auto* pre = app.add_subcommand("preprocess", "Write the preprocessed split for --seed");
    add_common(*pre, pre_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto cfg = resolve(run_opts);
            finish({run_pipeline(cfg)}, run_opts);
        } else if (cmp->parsed()) {
            const auto cfg = resolve(cmp_opts);
            finish(compare(cfg, load_dataset(cfg)), cmp_opts);
        } else if (swp->parsed()) {
            const auto cfg = resolve(sweep_opts);
            finish(sweep(cfg, load_dataset(cfg), parse_sweep_axis(axis), values), sweep_opts);
        } else if (pre->parsed()) {
            preprocess(resolve(pre_opts), pre_opts.out_dir);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
