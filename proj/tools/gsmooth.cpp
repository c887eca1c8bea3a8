// Command-line front end: experiments, label propagation and dataset utilities.

#include <gsmooth/data.hpp>
#include <gsmooth/diffusion.hpp>
#include <gsmooth/errors.hpp>
#include <gsmooth/experiment.hpp>
#include <gsmooth/models.hpp>
#include <gsmooth/rng.hpp>
#include <gsmooth/synthetic.hpp>
#include <gsmooth/trainer.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace gsmooth;

namespace {

constexpr const char* kDataEnv = "GSMOOTH_DATA_DIR";

/// A bare name such as "cora" that does not exist locally is looked up under
/// $GSMOOTH_DATA_DIR (default ./data).
fs::path resolve_dataset(const std::string& arg) {
    fs::path p(arg);
    if (fs::exists(p) || p.is_absolute()) return p;
    const char* env = std::getenv(kDataEnv);
    const fs::path root = env && *env ? fs::path(env) : fs::path("data");
    return root / p;
}

std::string percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
    return buf;
}

void write_text(const fs::path& file, const std::string& text) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw InputError("cannot write " + file.string());
    out << text;
}

Split load_or_make_split(const LabeledDataset& ds, const std::string& split_file, std::size_t ell, std::uint64_t seed,
                         SplitSizes sizes) {
    if (split_file.empty()) return make_split(ds, ell, seed, sizes);
    std::ifstream in(split_file);
    if (!in) throw InputError("cannot open split file " + split_file);
    std::stringstream buf;
    buf << in.rdbuf();
    return split_from_json(buf.str());
}

struct RunArgs {
    std::string spec_file;
    std::string from_runs;
    std::string output;
    std::size_t threads = 0;
    std::size_t splits = 0;
    bool quiet = false;
};

int cmd_run(const RunArgs& a) {
    ResultsTable table;
    if (!a.from_runs.empty()) {
        table = aggregate_run_directory(a.from_runs);
        if (!a.output.empty()) {
            write_text(fs::path(a.output) / "results.csv", table.to_csv());
            write_text(fs::path(a.output) / "results.txt", table.to_text());
        }
    } else {
        ExperimentSpec spec = load_experiment_spec(a.spec_file);
        if (!a.output.empty()) spec.output_dir = a.output;
        if (a.threads != 0) spec.threads = a.threads;
        if (a.splits != 0) spec.n_splits = a.splits;
        spec.dataset = resolve_dataset(spec.dataset.string());
        ProgressFn progress;
        if (!a.quiet) {
            progress = [](const RunRecord& r) {
                std::cerr << r.variant.label() << " ell=" << r.ell << " L=" << r.n_layers << " mu=" << r.mu
                          << " seed=" << r.seed << ": "
                          << (r.error.empty() ? "test " + percent(r.test_acc) + "%" : "FAILED " + r.error) << '\n';
            };
        }
        table = run_experiment(spec, progress);
    }
    std::cout << table.to_text();
    for (const auto& row : table.rows) {
        if (row.status != "ok") return 1;
    }
    return 0;
}

struct PropagateArgs {
    std::string dataset;
    std::size_t ell = 20;
    std::vector<double> gammas{0.1};
    std::uint64_t seed = 0;
    std::string solver = "iterative";
    double tol = 1e-8;
    std::size_t max_iter = 10'000;
    std::string split_file;
    SplitSizes sizes;
};

int cmd_propagate(const PropagateArgs& a) {
    const LabeledDataset ds = load_dataset(resolve_dataset(a.dataset));
    const Split split = load_or_make_split(ds, a.split_file, a.ell, a.seed, a.sizes);
    DiffusionConfig cfg;
    cfg.tol = a.tol;
    cfg.max_iter = a.max_iter;
    if (a.solver == "direct") {
        cfg.solver = DiffusionSolver::direct;
    } else if (a.solver != "iterative") {
        throw InputError("unknown solver '" + a.solver + "' (expected iterative or direct)");
    }

    double best_gamma = a.gammas.front();
    PropagationOutcome best;
    bool first = true;
    for (double gamma : a.gammas) {
        cfg.gamma = gamma;
        PropagationOutcome out = run_propagation(ds, split, cfg);
        for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
        if (a.gammas.size() > 1) {
            std::cout << "gamma " << gamma << ": val " << percent(out.val_acc) << "%, test " << percent(out.test_acc)
                      << "%\n";
        }
        if (first || out.val_acc > best.val_acc) {
            best = std::move(out);
            best_gamma = gamma;
            first = false;
        }
    }
    std::cout << "dataset " << ds.name << ", ell " << a.ell << ", seed " << split.seed << ", gamma " << best_gamma
              << "\nvalidation accuracy: " << percent(best.val_acc) << "%\ntest accuracy: " << percent(best.test_acc)
              << "%\n";
    return 0;
}

struct TrainArgs {
    std::string dataset;
    std::string model = "gcn";
    std::size_t layers = 2;
    std::size_t hidden = 64;
    double mu = 0.0;
    std::string variant = "cross_entropy";
    std::size_t ell = 20;
    std::uint64_t seed = 0;
    std::string split_file;
    std::string checkpoint;
    std::string report;
    std::size_t max_epochs = 1000;
    std::size_t patience = 100;
    std::string stop_metric = "val_loss";
    bool no_normalize = false;
    SplitSizes sizes;
};

int cmd_train(const TrainArgs& a) {
    const LabeledDataset ds = load_dataset(resolve_dataset(a.dataset));
    const Split split = load_or_make_split(ds, a.split_file, a.ell, a.seed, a.sizes);
    const PreparedData data(ds, !a.no_normalize);

    ModelConfig mc;
    mc.kind = parse_model_kind(a.model);
    mc.n_layers = a.layers;
    mc.hidden_dim = a.hidden;
    Model model = Model::create(mc, data.n_features(), data.n_classes(), derive_seed(split.seed, 1));

    TrainConfig tc;
    tc.max_epochs = a.max_epochs;
    tc.patience = a.patience;
    tc.loss.mu = a.mu;
    tc.loss.variant = parse_smooth_variant(a.variant);
    tc.stop_metric = parse_stop_metric(a.stop_metric);
    tc.seed = derive_seed(split.seed, 2);
    const TrainReport report = train(model, data, split, tc);

    std::cout << "best epoch " << report.best_epoch << " of " << report.epochs_run << ", validation "
              << percent(report.val_acc) << "%, test " << percent(report.test_acc) << "%\n";
    if (!a.checkpoint.empty()) {
        std::ostringstream out;
        save_checkpoint(out, model);
        write_text(a.checkpoint, out.str());
    }
    if (!a.report.empty()) {
        RunRecord rec;
        rec.dataset = ds.name;
        rec.variant = {mc.kind, a.mu > 0.0};
        rec.ell = split.ell;
        rec.n_layers = a.layers;
        rec.mu = a.mu;
        rec.seed = split.seed;
        rec.best_epoch = report.best_epoch;
        rec.epochs_run = report.epochs_run;
        rec.val_acc = report.val_acc;
        rec.test_acc = report.test_acc;
        rec.history = report.history;
        write_text(a.report, rec.to_json() + "\n");
    }
    return 0;
}

int cmd_export(const std::string& checkpoint, const std::string& dataset, const std::string& out, bool no_normalize) {
    std::ifstream in(checkpoint);
    if (!in) throw InputError("cannot open checkpoint " + checkpoint);
    const Model model = load_checkpoint(in);
    const LabeledDataset ds = load_dataset(resolve_dataset(dataset));
    const PreparedData data(ds, !no_normalize);
    if (model.in_dim() != data.n_features()) {
        throw InputError("checkpoint expects " + std::to_string(model.in_dim()) + " features, dataset has " +
                         std::to_string(data.n_features()));
    }
    const Matrix emb = hidden_embedding(model, data.features(), data.context());
    std::ostringstream csv;
    write_embedding_csv(csv, emb);
    write_text(out, csv.str());
    std::cout << "wrote " << emb.rows() << " x " << emb.cols() << " embedding to " << out << '\n';
    return 0;
}

int cmd_validate(const std::string& dir) {
    const DatasetReport report = validate_dataset(resolve_dataset(dir));
    for (const auto& e : report.errors) std::cout << "error: " << e << '\n';
    for (const auto& n : report.notes) std::cout << "note: " << n << '\n';
    std::cout << report.summary() << '\n';
    return report.ok() ? 0 : 1;
}

int cmd_make_splits(const std::string& dataset, std::size_t ell, std::size_t n_splits, std::uint64_t base_seed,
                    const std::string& out_dir, SplitSizes sizes) {
    const LabeledDataset ds = load_dataset(resolve_dataset(dataset));
    for (const Split& s : make_splits(ds, ell, n_splits, base_seed, sizes)) {
        const fs::path file = fs::path(out_dir) / ("split_ell" + std::to_string(ell) + "_seed" + std::to_string(s.seed) + ".json");
        write_text(file, split_to_json(s) + "\n");
        std::cout << file.string() << '\n';
    }
    return 0;
}

void add_split_sizes(CLI::App* cmd, SplitSizes& sizes) {
    cmd->add_option("--val-size", sizes.val, "Validation nodes per split")->capture_default_str();
    cmd->add_option("--test-size", sizes.test, "Test nodes per split")->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph semi-supervised learning with smoothness regularization"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run an experiment spec and print the results table");
    auto* spec_opt = run_cmd->add_option("spec", run.spec_file, "Experiment spec (JSON)")->check(CLI::ExistingFile);
    auto* runs_opt = run_cmd->add_option("--from-runs", run.from_runs, "Aggregate existing per-run JSON files instead")
                         ->check(CLI::ExistingDirectory);
    spec_opt->excludes(runs_opt);
    run_cmd->add_option("-o,--output", run.output, "Output directory (overrides the spec)");
    run_cmd->add_option("-j,--threads", run.threads, "Worker threads (0: all cores)");
    run_cmd->add_option("--splits", run.splits, "Override n_splits");
    run_cmd->add_flag("-q,--quiet", run.quiet, "No per-run progress on stderr");

    PropagateArgs prop;
    auto* prop_cmd = app.add_subcommand("propagate", "Label propagation baseline on one split");
    prop_cmd->add_option("dataset", prop.dataset, "Dataset directory or name")->required();
    prop_cmd->add_option("--ell", prop.ell, "Labeled nodes per class")->capture_default_str();
    prop_cmd->add_option("--gamma", prop.gammas, "Restart weight; several values are tuned on validation")
        ->capture_default_str();
    prop_cmd->add_option("--seed", prop.seed, "Split seed")->capture_default_str();
    prop_cmd->add_option("--solver", prop.solver, "iterative or direct")->capture_default_str();
    prop_cmd->add_option("--tol", prop.tol, "Convergence tolerance")->capture_default_str();
    prop_cmd->add_option("--max-iter", prop.max_iter, "Iteration cap")->capture_default_str();
    prop_cmd->add_option("--split", prop.split_file, "Use a saved split JSON");
    add_split_sizes(prop_cmd, prop.sizes);

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train one model on one split");
    train_cmd->add_option("dataset", tr.dataset, "Dataset directory or name")->required();
    train_cmd->add_option("--model", tr.model, "mlp, gcn, gat or appnp")->capture_default_str();
    train_cmd->add_option("--layers", tr.layers, "Weight layers")->capture_default_str();
    train_cmd->add_option("--hidden", tr.hidden, "Hidden units")->capture_default_str();
    train_cmd->add_option("--mu", tr.mu, "Smoothness weight (0: vanilla)")->capture_default_str();
    train_cmd->add_option("--smooth", tr.variant, "cross_entropy or l2")->capture_default_str();
    train_cmd->add_option("--ell", tr.ell, "Labeled nodes per class")->capture_default_str();
    train_cmd->add_option("--seed", tr.seed, "Split seed")->capture_default_str();
    train_cmd->add_option("--split", tr.split_file, "Use a saved split JSON");
    train_cmd->add_option("--max-epochs", tr.max_epochs)->capture_default_str();
    train_cmd->add_option("--patience", tr.patience)->capture_default_str();
    train_cmd->add_option("--stop-metric", tr.stop_metric, "val_loss or val_acc")->capture_default_str();
    train_cmd->add_flag("--no-normalize", tr.no_normalize, "Keep raw feature rows");
    train_cmd->add_option("--checkpoint", tr.checkpoint, "Write the trained parameters here");
    train_cmd->add_option("--report", tr.report, "Write the run record JSON here");
    add_split_sizes(train_cmd, tr.sizes);

    std::string ex_ckpt, ex_data, ex_out;
    bool ex_no_normalize = false;
    auto* export_cmd = app.add_subcommand("export-embeddings", "Write last-hidden-layer activations as CSV");
    export_cmd->add_option("checkpoint", ex_ckpt, "Checkpoint from 'train'")->required();
    export_cmd->add_option("dataset", ex_data, "Dataset directory or name")->required();
    export_cmd->add_option("-o,--out", ex_out, "Output CSV")->required();
    export_cmd->add_flag("--no-normalize", ex_no_normalize, "Keep raw feature rows (match training)");

    std::string val_dir;
    auto* validate_cmd = app.add_subcommand("validate-dataset", "Check a dataset directory");
    validate_cmd->add_option("dir", val_dir, "Dataset directory or name")->required();

    std::string ms_data, ms_out = "splits";
    std::size_t ms_ell = 20, ms_n = 10;
    std::uint64_t ms_seed = 0;
    SplitSizes ms_sizes;
    auto* splits_cmd = app.add_subcommand("make-splits", "Write random splits as JSON files");
    splits_cmd->add_option("dataset", ms_data, "Dataset directory or name")->required();
    splits_cmd->add_option("--ell", ms_ell)->capture_default_str();
    splits_cmd->add_option("-n,--n-splits", ms_n)->capture_default_str();
    splits_cmd->add_option("--base-seed", ms_seed)->capture_default_str();
    splits_cmd->add_option("-o,--out", ms_out, "Output directory")->capture_default_str();
    add_split_sizes(splits_cmd, ms_sizes);

    SyntheticConfig syn;
    std::string syn_out;
    auto* syn_cmd = app.add_subcommand("make-synthetic", "Write a planted-partition dataset");
    syn_cmd->add_option("out", syn_out, "Output directory")->required();
    syn_cmd->add_option("--nodes", syn.n_nodes)->capture_default_str();
    syn_cmd->add_option("--classes", syn.n_classes)->capture_default_str();
    syn_cmd->add_option("--features", syn.n_features)->capture_default_str();
    syn_cmd->add_option("--degree", syn.avg_degree, "Average degree")->capture_default_str();
    syn_cmd->add_option("--homophily", syn.homophily)->capture_default_str();
    syn_cmd->add_option("--words", syn.words_per_node)->capture_default_str();
    syn_cmd->add_option("--signal", syn.feature_signal)->capture_default_str();
    syn_cmd->add_option("--seed", syn.seed)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            if (run.spec_file.empty() && run.from_runs.empty()) throw InputError("run: give a spec file or --from-runs");
            return cmd_run(run);
        }
        if (*prop_cmd) return cmd_propagate(prop);
        if (*train_cmd) return cmd_train(tr);
        if (*export_cmd) return cmd_export(ex_ckpt, ex_data, ex_out, ex_no_normalize);
        if (*validate_cmd) return cmd_validate(val_dir);
        if (*splits_cmd) return cmd_make_splits(ms_data, ms_ell, ms_n, ms_seed, ms_out, ms_sizes);
        if (*syn_cmd) {
            const fs::path out(syn_out);
            save_dataset(make_synthetic_dataset(syn, out.filename().string()), out);
            std::cout << "wrote " << syn.n_nodes << "-node dataset to " << out.string() << '\n';
            return 0;
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
