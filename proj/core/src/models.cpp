#include <gsmooth/errors.hpp>
#include <gsmooth/models.hpp>
#include <gsmooth/rng.hpp>

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

namespace gsmooth {

using ad::Tensor;

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::mlp: return "mlp";
        case ModelKind::gcn: return "gcn";
        case ModelKind::gat: return "gat";
        case ModelKind::appnp: return "appnp";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "mlp") return ModelKind::mlp;
    if (lower == "gcn") return ModelKind::gcn;
    if (lower == "gat") return ModelKind::gat;
    if (lower == "appnp") return ModelKind::appnp;
    throw InputError("unknown model kind '" + std::string(name) + "' (expected mlp, gcn, gat or appnp)");
}

void ModelConfig::validate() const {
    if (n_layers < 1) throw InputError("model config: n_layers must be >= 1");
    if (hidden_dim < 1) throw InputError("model config: hidden_dim must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("model config: dropout must lie in [0, 1)");
    if (!(appnp_alpha >= 0.0 && appnp_alpha <= 1.0)) throw InputError("model config: appnp_alpha must lie in [0, 1]");
    if (!std::isfinite(leaky_slope)) throw InputError("model config: leaky_slope must be finite");
}

NodeFeatures NodeFeatures::from_dense(const Matrix& dense) {
    if (!dense.allFinite()) throw InputError("node features contain non-finite values");
    NodeFeatures f;
    f.sparse_ = std::make_shared<const ad::SparseMatrix>(dense.sparseView(0.0, 0.0));
    return f;
}

std::shared_ptr<const ad::SparseMatrix> NodeFeatures::dropout(double rate, bool training, std::uint64_t seed) const {
    if (!(rate >= 0.0 && rate < 1.0)) throw InputError("feature dropout: rate must lie in [0, 1)");
    if (!training || rate == 0.0) return sparse_;
    auto dropped = std::make_shared<ad::SparseMatrix>(*sparse_);
    Rng rng(seed);
    const double keep_scale = 1.0 / (1.0 - rate);
    double* values = dropped->valuePtr();
    for (Eigen::Index k = 0; k < dropped->nonZeros(); ++k) {
        values[k] = rng.uniform01() < rate ? 0.0 : values[k] * keep_scale;
    }
    return dropped;
}

Tensor glorot_init(std::size_t d_in, std::size_t d_out, std::uint64_t seed) {
    if (d_in < 1 || d_out < 1) throw InputError("glorot_init: dimensions must be >= 1");
    const double bound = std::sqrt(6.0 / static_cast<double>(d_in + d_out));
    Rng rng(seed);
    Matrix w(static_cast<Eigen::Index>(d_in), static_cast<Eigen::Index>(d_out));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
    return Tensor::parameter(std::move(w));
}

Model Model::create(const ModelConfig& config, std::size_t in_dim, std::size_t n_classes, std::uint64_t seed) {
    config.validate();
    if (in_dim < 1 || n_classes < 1) throw InputError("model: input and class dimensions must be >= 1");
    std::vector<LayerParams> layers;
    std::size_t d_in = in_dim;
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        const std::size_t d_out = l + 1 == config.n_layers ? n_classes : config.hidden_dim;
        LayerParams p;
        p.weight = glorot_init(d_in, d_out, derive_seed(seed, 2 * l));
        p.bias = Tensor::parameter(Matrix::Zero(1, static_cast<Eigen::Index>(d_out)));
        if (config.kind == ModelKind::gat) p.attn = glorot_init(2 * d_out, 1, derive_seed(seed, 2 * l + 1));
        layers.push_back(std::move(p));
        d_in = d_out;
    }
    return from_params(config, std::move(layers));
}

Model Model::from_params(const ModelConfig& config, std::vector<LayerParams> layers) {
    config.validate();
    if (layers.size() != config.n_layers) {
        throw InputError("model: expected " + std::to_string(config.n_layers) + " layers, got " +
                         std::to_string(layers.size()));
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& p = layers[l];
        const std::string where = "model layer " + std::to_string(l) + ": ";
        if (!p.weight.defined() || !p.bias.defined()) throw InputError(where + "missing weight or bias");
        if (p.bias.rows() != 1 || p.bias.cols() != p.weight.cols()) throw InputError(where + "bias must be 1 x d_out");
        if (l > 0 && p.weight.rows() != layers[l - 1].weight.cols()) throw InputError(where + "input width mismatch");
        if (config.kind == ModelKind::gat) {
            if (!p.attn.defined() || p.attn.rows() != 2 * p.weight.cols() || p.attn.cols() != 1) {
                throw InputError(where + "attention vector must be 2 d_out x 1");
            }
        }
    }
    Model m;
    m.config_ = config;
    m.layers_ = std::move(layers);
    return m;
}

std::vector<Model::ParamRef> Model::parameters() const {
    std::vector<ParamRef> params;
    for (const auto& p : layers_) {
        params.push_back({p.weight, true});
        params.push_back({p.bias, false});
        if (p.attn.defined()) params.push_back({p.attn, true});
    }
    return params;
}

std::vector<Matrix> Model::snapshot() const {
    std::vector<Matrix> values;
    for (const auto& p : parameters()) values.push_back(p.tensor.value());
    return values;
}

void Model::restore(const std::vector<Matrix>& values) {
    auto params = parameters();
    if (values.size() != params.size()) throw InputError("model restore: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (values[i].rows() != params[i].tensor.rows() || values[i].cols() != params[i].tensor.cols()) {
            throw InputError("model restore: shape mismatch for parameter " + std::to_string(i));
        }
        params[i].tensor.mutable_value() = values[i];
    }
}

Tensor linear(const Tensor& h, const LayerParams& p) { return ad::add(ad::matmul(h, p.weight), p.bias); }

Tensor linear(std::shared_ptr<const ad::SparseMatrix> x, const LayerParams& p) {
    return ad::add(ad::sparse_matmul(std::move(x), p.weight), p.bias);
}

Tensor gcn_layer(const NormalizedAdjacency& a_hat, const Tensor& hw, const LayerParams& p, bool last) {
    Tensor out = ad::add(ad::spmm(a_hat, hw), p.bias);
    return last ? out : ad::relu(out);
}

Tensor gat_layer(const Graph& pattern, const Tensor& hw, const LayerParams& p, double slope, bool last) {
    Tensor out = ad::add(ad::graph_attention(pattern, hw, p.attn, slope), p.bias);
    return last ? out : ad::relu(out);
}

Tensor appnp_propagate(const NormalizedAdjacency& a_hat, const Tensor& h, double alpha, std::size_t k) {
    const Tensor restart = ad::scale(h, alpha);
    Tensor z = h;
    for (std::size_t step = 0; step < k; ++step) {
        z = ad::add(ad::scale(ad::spmm(a_hat, z), 1.0 - alpha), restart);
    }
    return z;
}

namespace {

void check_input(const NodeFeatures& x, const Model& model) {
    if (!x.sparse()) throw InputError("forward: node features are empty");
    if (static_cast<std::size_t>(x.cols()) != model.in_dim()) {
        throw InputError("forward: features have " + std::to_string(x.cols()) + " columns but the model expects " +
                         std::to_string(model.in_dim()));
    }
}

// XW (no bias) for layer l, with dropout on its input.
Tensor transform(const NodeFeatures& x, const Tensor& h, std::size_t l, const Model& model, bool training,
                 std::uint64_t seed) {
    const auto& p = model.layers()[l];
    const double rate = model.config().dropout;
    const std::uint64_t layer_seed = derive_seed(seed, l);
    if (l == 0) return ad::sparse_matmul(x.dropout(rate, training, layer_seed), p.weight);
    return ad::matmul(ad::dropout(h, rate, training, layer_seed), p.weight);
}

// Runs layers [0, stop); returns the activation feeding layer `stop`.
template <typename Aggregate>
Tensor run_layers(const NodeFeatures& x, const Model& model, bool training, std::uint64_t seed, std::size_t stop,
                  Aggregate aggregate) {
    check_input(x, model);
    Tensor h;
    const std::size_t n_layers = model.layers().size();
    for (std::size_t l = 0; l < stop; ++l) {
        const bool last = l + 1 == n_layers;
        h = aggregate(transform(x, h, l, model, training, seed), model.layers()[l], last);
    }
    return h;
}

auto dense_aggregate() {
    return [](const Tensor& hw, const LayerParams& p, bool last) {
        Tensor out = ad::add(hw, p.bias);
        return last ? out : ad::relu(out);
    };
}

auto gcn_aggregate(const NormalizedAdjacency& a_hat) {
    return [&a_hat](const Tensor& hw, const LayerParams& p, bool last) { return gcn_layer(a_hat, hw, p, last); };
}

auto gat_aggregate(const Graph& pattern, double slope) {
    return [&pattern, slope](const Tensor& hw, const LayerParams& p, bool last) {
        return gat_layer(pattern, hw, p, slope, last);
    };
}

void require_kind(const Model& model, ModelKind kind) {
    if (model.config().kind != kind) {
        throw InputError(std::string(to_string(kind)) + "_forward called with a " +
                         std::string(to_string(model.config().kind)) + " model");
    }
}

} // namespace

Tensor mlp_forward(const NodeFeatures& x, const Model& model, bool training, std::uint64_t seed) {
    return run_layers(x, model, training, seed, model.layers().size(), dense_aggregate());
}

Tensor gcn_forward(const NodeFeatures& x, const NormalizedAdjacency& a_hat, const Model& model, bool training,
                   std::uint64_t seed) {
    require_kind(model, ModelKind::gcn);
    return run_layers(x, model, training, seed, model.layers().size(), gcn_aggregate(a_hat));
}

Tensor gat_forward(const NodeFeatures& x, const Graph& self_looped, const Model& model, bool training,
                   std::uint64_t seed) {
    require_kind(model, ModelKind::gat);
    return run_layers(x, model, training, seed, model.layers().size(),
                      gat_aggregate(self_looped, model.config().leaky_slope));
}

Tensor appnp_forward(const NodeFeatures& x, const NormalizedAdjacency& a_hat, const Model& model, bool training,
                     std::uint64_t seed) {
    require_kind(model, ModelKind::appnp);
    const Tensor h = mlp_forward(x, model, training, seed);
    return appnp_propagate(a_hat, h, model.config().appnp_alpha, model.config().appnp_k);
}

namespace {

const NormalizedAdjacency& need_adjacency(const GraphContext& ctx) {
    if (ctx.a_hat == nullptr) throw InputError("forward: model needs a normalized adjacency");
    return *ctx.a_hat;
}

const Graph& need_pattern(const GraphContext& ctx) {
    if (ctx.self_looped == nullptr) throw InputError("forward: attention model needs the self-looped graph");
    return *ctx.self_looped;
}

} // namespace

Tensor forward(const Model& model, const NodeFeatures& x, const GraphContext& ctx, bool training, std::uint64_t seed) {
    switch (model.config().kind) {
        case ModelKind::mlp: return mlp_forward(x, model, training, seed);
        case ModelKind::gcn: return gcn_forward(x, need_adjacency(ctx), model, training, seed);
        case ModelKind::gat: return gat_forward(x, need_pattern(ctx), model, training, seed);
        case ModelKind::appnp: return appnp_forward(x, need_adjacency(ctx), model, training, seed);
    }
    throw InputError("forward: unknown model kind");
}

Matrix hidden_embedding(const Model& model, const NodeFeatures& x, const GraphContext& ctx) {
    const std::size_t n_layers = model.layers().size();
    if (n_layers < 2) throw InputError("hidden_embedding: model has no hidden layer (n_layers < 2)");
    const std::size_t stop = n_layers - 1;
    switch (model.config().kind) {
        case ModelKind::mlp:
        case ModelKind::appnp: return run_layers(x, model, false, 0, stop, dense_aggregate()).value();
        case ModelKind::gcn: return run_layers(x, model, false, 0, stop, gcn_aggregate(need_adjacency(ctx))).value();
        case ModelKind::gat:
            return run_layers(x, model, false, 0, stop, gat_aggregate(need_pattern(ctx), model.config().leaky_slope))
                .value();
    }
    throw InputError("hidden_embedding: unknown model kind");
}

void write_embedding_csv(std::ostream& out, const Matrix& embedding) {
    out << "node";
    for (Eigen::Index j = 0; j < embedding.cols(); ++j) out << ",dim" << j;
    out << '\n';
    char buf[32];
    for (Eigen::Index i = 0; i < embedding.rows(); ++i) {
        out << i;
        for (Eigen::Index j = 0; j < embedding.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", embedding(i, j));
            out << ',' << buf;
        }
        out << '\n';
    }
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
        throw InputError("checkpoint: matrix data does not match its shape");
    }
    return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

} // namespace

void save_checkpoint(std::ostream& out, const Model& model) {
    const auto& c = model.config();
    nlohmann::json j;
    j["format"] = "gsmooth-checkpoint-v1";
    j["config"] = {{"kind", to_string(c.kind)},     {"n_layers", c.n_layers},       {"hidden_dim", c.hidden_dim},
                   {"dropout", c.dropout},          {"appnp_alpha", c.appnp_alpha}, {"appnp_k", c.appnp_k},
                   {"leaky_slope", c.leaky_slope}};
    j["layers"] = nlohmann::json::array();
    for (const auto& p : model.layers()) {
        nlohmann::json layer = {{"weight", matrix_to_json(p.weight.value())}, {"bias", matrix_to_json(p.bias.value())}};
        if (p.attn.defined()) layer["attn"] = matrix_to_json(p.attn.value());
        j["layers"].push_back(std::move(layer));
    }
    out << j.dump() << '\n';
}

Model load_checkpoint(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
        if (j.value("format", "") != "gsmooth-checkpoint-v1") throw InputError("checkpoint: unrecognized format");
        const auto& jc = j.at("config");
        ModelConfig c;
        c.kind = parse_model_kind(jc.at("kind").get<std::string>());
        c.n_layers = jc.at("n_layers").get<std::size_t>();
        c.hidden_dim = jc.at("hidden_dim").get<std::size_t>();
        c.dropout = jc.at("dropout").get<double>();
        c.appnp_alpha = jc.at("appnp_alpha").get<double>();
        c.appnp_k = jc.at("appnp_k").get<std::size_t>();
        c.leaky_slope = jc.at("leaky_slope").get<double>();
        std::vector<LayerParams> layers;
        for (const auto& jl : j.at("layers")) {
            LayerParams p;
            p.weight = Tensor::parameter(matrix_from_json(jl.at("weight")));
            p.bias = Tensor::parameter(matrix_from_json(jl.at("bias")));
            if (jl.contains("attn")) p.attn = Tensor::parameter(matrix_from_json(jl.at("attn")));
            layers.push_back(std::move(p));
        }
        return Model::from_params(c, std::move(layers));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("checkpoint: ") + e.what());
    }
}

} // namespace gsmooth
