#pragma once

#include <gsmooth/graph.hpp>

#include <Eigen/SparseCore>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace gsmooth::ad {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(const Matrix& grad_out, std::span<const NodePtr> inputs)>;

struct Node {
    Matrix value;
    Matrix grad;  // empty until something flows into it
    bool requires_grad = false;
    std::vector<NodePtr> inputs;
    BackwardFn backward;
    std::string_view op = "leaf";

    void accumulate(const Matrix& g);
};

} // namespace detail

/// Handle to a node of the computation graph. Copies share the node.
class Tensor {
public:
    Tensor() = default;

    static Tensor constant(Matrix value);
    static Tensor parameter(Matrix value);

    bool defined() const { return node_ != nullptr; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    bool requires_grad() const { return node_->requires_grad; }
    std::string_view op() const { return node_->op; }

    const Matrix& value() const { return node_->value; }
    /// Direct write access for optimizers; only meaningful on leaves.
    Matrix& mutable_value() { return node_->value; }
    /// Scalar value of a 1x1 tensor.
    double item() const;

    bool has_grad() const { return node_->grad.size() != 0; }
    /// Accumulated gradient, or zeros of matching shape when none has flowed.
    Matrix grad() const;
    void zero_grad() { node_->grad.resize(0, 0); }

    const detail::NodePtr& node() const { return node_; }

private:
    friend Tensor make_result(Matrix value, std::string_view op, std::vector<Tensor> inputs,
                              detail::BackwardFn backward);
    detail::NodePtr node_;
};

/// Creates an op output; requires_grad is inherited from any input that has it.
/// Throws NumericError naming `op` if `value` has a non-finite entry.
Tensor make_result(Matrix value, std::string_view op, std::vector<Tensor> inputs, detail::BackwardFn backward);

/// Reverse topological order of the nodes reachable from a root.
class Tape {
public:
    static Tape record(const Tensor& root);
    std::span<const detail::Node* const> order() const { return order_; }
    std::size_t size() const { return order_.size(); }

private:
    std::vector<const detail::Node*> order_;  // root first
};

Tensor matmul(const Tensor& a, const Tensor& b);
/// a + b; b may be a 1 x cols row vector, broadcast over the rows of a.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor elementwise_mul(const Tensor& a, const Tensor& b);
Tensor row_softmax(const Tensor& a);
inline constexpr double kLogClamp = 1e-12;
/// log(max(x, 1e-12)); the gradient is zero where the clamp is active.
Tensor log_clamped(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& a);
/// Inverted dropout. Identity when !training or rate == 0.
Tensor dropout(const Tensor& a, double rate, bool training, std::uint64_t seed);

/// Â · b with Â symmetric. `a_hat` must outlive any backward pass through the result.
Tensor spmm(const NormalizedAdjacency& a_hat, const Tensor& b);
/// x · w for a constant sparse left operand (input features).
Tensor sparse_matmul(std::shared_ptr<const SparseMatrix> x, const Tensor& w);

/// Single-head graph attention over the stored entries of `pattern` (which
/// should contain self-loops). For each row v:
///   s_vu = a_dstᵀ wh_v + a_srcᵀ wh_u, e_vu = LeakyReLU(s_vu),
///   α_v· = softmax over u ∈ N(v) of e_v·,  out_v = Σ_u α_vu wh_u,
/// where attn = [a_dst; a_src] is (2d x 1). `pattern` must outlive backward.
Tensor graph_attention(const Graph& pattern, const Tensor& wh, const Tensor& attn, double slope);

/// Attention coefficients in CSR value order of `pattern`.
std::vector<double> attention_coefficients(const Graph& pattern, const Matrix& wh, const Matrix& attn, double slope);

/// Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable from
/// `loss`. Throws InputError unless loss is 1x1.
void backward(const Tensor& loss);

/// Max over entries of |analytic - numeric| / (|numeric| + 1e-8), with the
/// numeric gradient from central differences of step `step`.
double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, const Matrix& x, double step = 1e-5);

} // namespace gsmooth::ad
