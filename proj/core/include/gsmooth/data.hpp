#pragma once

#include <gsmooth/graph.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace gsmooth {

struct LabeledDataset {
    std::string name;
    Graph graph;
    Matrix features;          // n x d, stored dense
    std::vector<int> labels;  // class id per node in [0, n_classes)
    std::size_t n_classes = 0;

    std::size_t n_nodes() const { return labels.size(); }
    std::size_t n_features() const { return static_cast<std::size_t>(features.cols()); }

    /// Checks row counts, label range and that every class appears.
    void validate() const;
};

/// Reads graph.edges, features.csv and labels.txt from `dir`. The dataset
/// name is the directory's final component. Errors carry the file and line.
LabeledDataset load_dataset(const std::filesystem::path& dir);

/// Writes the three files in canonical form. Features are written in the
/// sparse "idx:value" layout when fewer than half the entries are nonzero.
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& dir);

/// Parsers for the individual files; `source` names the file in errors.
Matrix read_features(std::istream& in, const std::string& source = "features.csv");
void write_features(std::ostream& out, const Matrix& features);
std::vector<int> read_labels(std::istream& in, const std::string& source = "labels.txt");

/// Divides every nonzero feature row by its L1 norm.
LabeledDataset row_normalize_features(LabeledDataset ds);

struct Split {
    std::uint64_t seed = 0;
    std::size_t ell = 0;
    std::vector<NodeId> train;
    std::vector<NodeId> val;
    std::vector<NodeId> test;
};

struct SplitSizes {
    std::size_t val = 500;
    std::size_t test = 1000;
};

/// One split per seed base_seed + k. Per seed: ell nodes per class drawn
/// without replacement for training, then `sizes.val` validation nodes and
/// `sizes.test` test nodes drawn from the remainder, in that order. Sampling
/// is a partial Fisher-Yates shuffle over ascending node ids driven by a
/// 64-bit Mersenne Twister, so results do not depend on the standard library.
std::vector<Split> make_splits(const LabeledDataset& ds, std::size_t ell, std::size_t n_splits,
                               std::uint64_t base_seed, SplitSizes sizes = {});
Split make_split(const LabeledDataset& ds, std::size_t ell, std::uint64_t seed, SplitSizes sizes = {});

/// {"seed":…, "ell":…, "train":[…], "val":[…], "test":[…]}
std::string split_to_json(const Split& split);
Split split_from_json(const std::string& text);

/// Reference sizes for the standard citation benchmarks.
struct KnownDataset {
    const char* name;
    std::size_t nodes;
    std::size_t edges;
    std::size_t classes;
    std::size_t features;
};
std::span<const KnownDataset> known_datasets();

struct DatasetReport {
    std::size_t nodes = 0;
    std::size_t edges = 0;  // undirected
    std::size_t classes = 0;
    std::size_t features = 0;
    std::vector<std::string> errors;
    std::vector<std::string> notes;
    bool ok() const { return errors.empty(); }
    std::string summary() const;
};

/// Runs every loader and invariant check without throwing; problems are
/// collected into the report.
DatasetReport validate_dataset(const std::filesystem::path& dir);

} // namespace gsmooth
