#pragma once

#include <gsmooth/data.hpp>
#include <gsmooth/diffusion.hpp>
#include <gsmooth/models.hpp>
#include <gsmooth/trainer.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gsmooth {

/// A model kind with or without the smoothness term ("R-" prefix).
struct ModelVariant {
    ModelKind kind = ModelKind::mlp;
    bool regularized = false;

    std::string label() const;  // e.g. "gcn", "r-gcn"
};

/// Parses "gcn" or "r-gcn".
ModelVariant parse_model_variant(std::string_view text);

struct ExperimentSpec {
    std::filesystem::path dataset;
    std::vector<ModelVariant> models;
    std::vector<std::size_t> ell{20};
    std::size_t n_splits = 10;
    std::vector<std::size_t> layer_counts{2};
    /// Smoothness weights tried for regularized variants; the one with the
    /// best mean validation accuracy is reported.
    std::vector<double> mu_grid{0.1, 0.5, 1.0, 2.0};
    std::uint64_t base_seed = 0;
    std::filesystem::path output_dir;
    std::size_t threads = 0;  // 0: hardware concurrency

    ModelConfig model;  // kind and n_layers are overridden per cell
    TrainConfig train;  // loss.mu and seed are overridden per run
    bool normalize_features = true;
    SplitSizes split_sizes;

    void validate() const;
};

/// Reads the JSON experiment file; relative dataset/output paths resolve
/// against the file's directory. Unknown keys are rejected.
ExperimentSpec parse_experiment_spec(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentSpec load_experiment_spec(const std::filesystem::path& file);

/// One (cell, split, mu) training run; also the per-run JSON record.
struct RunRecord {
    std::string dataset;
    ModelVariant variant;
    std::size_t ell = 0;
    std::size_t n_layers = 0;
    double mu = 0.0;
    std::uint64_t seed = 0;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    double val_acc = 0.0;
    double test_acc = 0.0;
    std::vector<EpochRecord> history;
    std::string error;  // non-empty when the run aborted

    std::string to_json() const;
    static RunRecord from_json(const std::string& text);
    /// Stable file name for the per-run JSON.
    std::string file_name() const;
};

struct ResultRow {
    std::string dataset;
    ModelVariant variant;
    std::size_t ell = 0;
    std::size_t n_layers = 0;
    double mu = 0.0;      // selected mu (0 for unregularized rows)
    double mean = 0.0;    // percent
    double std = 0.0;     // sample standard deviation, percent
    std::size_t n_splits = 0;
    std::string status = "ok";  // "ok" or "failed"
    std::string diagnostic;
};

struct ResultsTable {
    std::vector<ResultRow> rows;

    const ResultRow* find(ModelKind kind, bool regularized, std::size_t ell, std::size_t n_layers) const;
    /// Machine-readable table; fixed formatting so identical inputs give identical bytes.
    std::string to_csv() const;
    /// Aligned human-readable table.
    std::string to_text() const;
};

/// Mean and sample (n-1) standard deviation; std is 0 for a single value.
std::pair<double, double> mean_and_sample_std(std::span<const double> values);

/// Groups runs into cells and applies the mu selection. Pure function of
/// the records, independent of their order.
ResultsTable aggregate_runs(std::vector<RunRecord> runs);

/// Reads every *.json under `run_dir` and aggregates it.
ResultsTable aggregate_run_directory(const std::filesystem::path& run_dir);

using ProgressFn = std::function<void(const RunRecord&)>;

/// Trains every (model, ell, n_layers, split, mu) combination in a worker
/// pool and aggregates in a fixed order. A failing run marks its cell failed;
/// other cells proceed. When output_dir is set, writes runs/<name>.json,
/// results.csv and results.txt there.
ResultsTable run_experiment(const ExperimentSpec& spec, const ProgressFn& progress = {});
/// Same, on an already-loaded dataset.
ResultsTable run_experiment(const ExperimentSpec& spec, const LabeledDataset& ds, const ProgressFn& progress = {});

struct PropagationOutcome {
    double test_acc = 0.0;
    double val_acc = 0.0;
    std::size_t iterations = 0;
    std::vector<std::string> warnings;
};

/// Label propagation on one split: diffusion seeded by the split's training
/// labels, scored on its validation and test sets.
PropagationOutcome run_propagation(const LabeledDataset& ds, const Split& split, const DiffusionConfig& cfg);

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

} // namespace gsmooth
