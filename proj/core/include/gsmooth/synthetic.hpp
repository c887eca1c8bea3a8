#pragma once

#include <gsmooth/data.hpp>

#include <cstdint>

namespace gsmooth {

/// Planted-partition graph with bag-of-words features. Each class owns a
/// block of "topic" words; a node draws `words_per_node` words, each from its
/// class block with probability `feature_signal` and uniformly otherwise.
/// Edges join same-class nodes with probability `homophily`.
struct SyntheticConfig {
    std::size_t n_nodes = 600;
    std::size_t n_classes = 4;
    std::size_t n_features = 200;
    double avg_degree = 4.0;
    double homophily = 0.8;
    std::size_t words_per_node = 12;
    double feature_signal = 0.3;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Labels are assigned round-robin so every class has n/c members.
LabeledDataset make_synthetic_dataset(const SyntheticConfig& cfg, std::string name = "synthetic");

} // namespace gsmooth
