#pragma once

#include <gsmooth/autodiff.hpp>
#include <gsmooth/graph.hpp>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace gsmooth {

enum class ModelKind { mlp, gcn, gat, appnp };

std::string_view to_string(ModelKind kind);
/// Accepts "mlp", "gcn", "gat", "appnp" (case-insensitive); throws InputError otherwise.
ModelKind parse_model_kind(std::string_view name);

struct ModelConfig {
    ModelKind kind = ModelKind::gcn;
    std::size_t n_layers = 2;   // weight layers; n_layers - 1 hidden representations
    std::size_t hidden_dim = 64;
    double dropout = 0.5;
    double appnp_alpha = 0.1;
    std::size_t appnp_k = 10;
    double leaky_slope = 0.2;

    void validate() const;
};

struct LayerParams {
    ad::Tensor weight;  // d_in x d_out
    ad::Tensor bias;    // 1 x d_out, zero-initialized
    ad::Tensor attn;    // 2 d_out x 1, attention layers only
};

/// Node features held as a constant sparse matrix; bag-of-words inputs are
/// mostly zeros and the first layer multiplies them directly.
class NodeFeatures {
public:
    NodeFeatures() = default;
    static NodeFeatures from_dense(const Matrix& dense);

    Eigen::Index rows() const { return sparse_->rows(); }
    Eigen::Index cols() const { return sparse_->cols(); }
    const std::shared_ptr<const ad::SparseMatrix>& sparse() const { return sparse_; }

    /// Inverted dropout on the stored entries. Returns the shared matrix
    /// unchanged when !training or rate == 0.
    std::shared_ptr<const ad::SparseMatrix> dropout(double rate, bool training, std::uint64_t seed) const;

private:
    std::shared_ptr<const ad::SparseMatrix> sparse_;
};

/// Graph views a forward pass may need. Both must outlive any tensors built
/// from them.
struct GraphContext {
    const Graph* self_looped = nullptr;              // attention pattern, Ã
    const NormalizedAdjacency* a_hat = nullptr;      // D^{-1/2} Ã D^{-1/2}
};

/// Glorot/Xavier uniform in [-sqrt(6/(d_in+d_out)), +sqrt(6/(d_in+d_out))].
ad::Tensor glorot_init(std::size_t d_in, std::size_t d_out, std::uint64_t seed);

class Model {
public:
    Model() = default;
    /// Builds layers in_dim -> hidden_dim -> ... -> n_classes with Glorot weights.
    static Model create(const ModelConfig& config, std::size_t in_dim, std::size_t n_classes, std::uint64_t seed);
    /// Wraps explicit parameters; shapes are checked against the config.
    static Model from_params(const ModelConfig& config, std::vector<LayerParams> layers);

    const ModelConfig& config() const { return config_; }
    const std::vector<LayerParams>& layers() const { return layers_; }
    std::vector<LayerParams>& layers() { return layers_; }
    std::size_t in_dim() const { return static_cast<std::size_t>(layers_.front().weight.rows()); }
    std::size_t n_classes() const { return static_cast<std::size_t>(layers_.back().weight.cols()); }

    struct ParamRef {
        ad::Tensor tensor;
        bool is_weight;  // false for biases
    };
    /// Every trainable tensor in a fixed order.
    std::vector<ParamRef> parameters() const;

    std::vector<Matrix> snapshot() const;
    void restore(const std::vector<Matrix>& values);

private:
    ModelConfig config_;
    std::vector<LayerParams> layers_;
};

// Layer building blocks. `last` suppresses the ReLU.
ad::Tensor linear(const ad::Tensor& h, const LayerParams& p);
ad::Tensor linear(std::shared_ptr<const ad::SparseMatrix> x, const LayerParams& p);
/// Â (H W) + b, optionally followed by ReLU.
ad::Tensor gcn_layer(const NormalizedAdjacency& a_hat, const ad::Tensor& hw, const LayerParams& p, bool last);
/// Σ_u α_vu (H W)_u + b with single-head attention, optionally followed by ReLU.
ad::Tensor gat_layer(const Graph& pattern, const ad::Tensor& hw, const LayerParams& p, double slope, bool last);
/// Z⁰ = H, Zᵏ = (1-α) Â Zᵏ⁻¹ + α H, returns Z^K.
ad::Tensor appnp_propagate(const NormalizedAdjacency& a_hat, const ad::Tensor& h, double alpha, std::size_t k);

/// Raw logits (n x n_classes). `seed` drives dropout when `training`.
ad::Tensor mlp_forward(const NodeFeatures& x, const Model& model, bool training, std::uint64_t seed = 0);
ad::Tensor gcn_forward(const NodeFeatures& x, const NormalizedAdjacency& a_hat, const Model& model, bool training,
                       std::uint64_t seed = 0);
ad::Tensor gat_forward(const NodeFeatures& x, const Graph& self_looped, const Model& model, bool training,
                       std::uint64_t seed = 0);
ad::Tensor appnp_forward(const NodeFeatures& x, const NormalizedAdjacency& a_hat, const Model& model, bool training,
                         std::uint64_t seed = 0);

/// Dispatches on model.config().kind. Throws InputError if the context lacks
/// the graph view that kind needs.
ad::Tensor forward(const Model& model, const NodeFeatures& x, const GraphContext& ctx, bool training,
                   std::uint64_t seed = 0);

/// Activations of the last hidden layer (n x hidden_dim), dropout off.
/// Throws InputError when n_layers < 2.
Matrix hidden_embedding(const Model& model, const NodeFeatures& x, const GraphContext& ctx);

/// CSV with header "node,dim0,...,dimH-1".
void write_embedding_csv(std::ostream& out, const Matrix& embedding);

/// JSON checkpoint holding the config and every parameter matrix.
void save_checkpoint(std::ostream& out, const Model& model);
Model load_checkpoint(std::istream& in);

} // namespace gsmooth
