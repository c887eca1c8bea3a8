#include <gsmooth/errors.hpp>
#include <gsmooth/rng.hpp>
#include <gsmooth/synthetic.hpp>

#include <vector>

namespace gsmooth {

void SyntheticConfig::validate() const {
    if (n_classes < 2 || n_nodes < 2 * n_classes) throw InputError("synthetic: need >= 2 classes and 2 nodes per class");
    if (n_features < n_classes) throw InputError("synthetic: need at least one feature per class");
    if (!(avg_degree >= 0.0)) throw InputError("synthetic: avg_degree must be >= 0");
    if (!(homophily >= 0.0 && homophily <= 1.0)) throw InputError("synthetic: homophily must lie in [0, 1]");
    if (!(feature_signal >= 0.0 && feature_signal <= 1.0)) throw InputError("synthetic: feature_signal must lie in [0, 1]");
    if (words_per_node < 1) throw InputError("synthetic: words_per_node must be >= 1");
}

LabeledDataset make_synthetic_dataset(const SyntheticConfig& cfg, std::string name) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::size_t n = cfg.n_nodes;
    const std::size_t c = cfg.n_classes;

    LabeledDataset ds;
    ds.name = std::move(name);
    ds.n_classes = c;
    ds.labels.resize(n);
    std::vector<std::vector<NodeId>> members(c);
    for (std::size_t v = 0; v < n; ++v) {
        ds.labels[v] = static_cast<int>(v % c);
        members[v % c].push_back(static_cast<NodeId>(v));
    }

    const std::size_t block = cfg.n_features / c;
    ds.features = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg.n_features));
    for (std::size_t v = 0; v < n; ++v) {
        const std::size_t k = v % c;
        for (std::size_t w = 0; w < cfg.words_per_node; ++w) {
            const std::size_t word = rng.uniform01() < cfg.feature_signal ? k * block + rng.below(block)
                                                                          : rng.below(cfg.n_features);
            ds.features(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(word)) = 1.0;
        }
    }

    const auto n_edges = static_cast<std::size_t>(cfg.avg_degree * static_cast<double>(n) / 2.0);
    std::vector<Edge> edges;
    edges.reserve(n_edges);
    while (edges.size() < n_edges) {
        const auto u = static_cast<NodeId>(rng.below(n));
        NodeId v;
        if (rng.uniform01() < cfg.homophily) {
            const auto& same = members[u % c];
            v = same[rng.below(same.size())];
        } else {
            v = static_cast<NodeId>(rng.below(n));
        }
        if (u != v) edges.emplace_back(u, v);
    }
    ds.graph = from_edge_list(edges, n);
    return ds;
}

} // namespace gsmooth
