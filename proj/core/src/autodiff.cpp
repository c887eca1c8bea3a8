#include <gsmooth/autodiff.hpp>
#include <gsmooth/errors.hpp>
#include <gsmooth/rng.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

namespace gsmooth::ad {

using detail::Node;
using detail::NodePtr;

void Node::accumulate(const Matrix& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
        grad = g;
    } else {
        grad += g;
    }
}

namespace {

std::string shape_of(const Tensor& t) { return std::to_string(t.rows()) + "x" + std::to_string(t.cols()); }

void require(bool ok, std::string_view op, const std::string& what) {
    if (!ok) throw InputError(std::string(op) + ": " + what);
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), op,
            "shape mismatch " + shape_of(a) + " vs " + shape_of(b));
}

Tensor leaf(Matrix value, bool requires_grad) {
    if (!value.allFinite()) throw NumericError("leaf tensor contains non-finite values");
    Tensor t = make_result(std::move(value), "leaf", {}, nullptr);
    t.node()->requires_grad = requires_grad;
    return t;
}

} // namespace

Tensor Tensor::constant(Matrix value) { return leaf(std::move(value), false); }

Tensor Tensor::parameter(Matrix value) { return leaf(std::move(value), true); }

double Tensor::item() const {
    if (rows() != 1 || cols() != 1) throw InputError("item: tensor is " + shape_of(*this) + ", not 1x1");
    return node_->value(0, 0);
}

Matrix Tensor::grad() const {
    if (has_grad()) return node_->grad;
    return Matrix::Zero(rows(), cols());
}

Tensor make_result(Matrix value, std::string_view op, std::vector<Tensor> inputs, detail::BackwardFn backward) {
    if (!value.allFinite()) throw NumericError(std::string(op) + ": produced a non-finite value");
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = op;
    for (auto& in : inputs) {
        node->requires_grad = node->requires_grad || in.requires_grad();
        node->inputs.push_back(in.node());
    }
    if (node->requires_grad) {
        node->backward = std::move(backward);
    } else {
        node->inputs.clear();
    }
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

Tape Tape::record(const Tensor& root) {
    Tape tape;
    if (!root.defined() || !root.requires_grad()) return tape;
    std::vector<const Node*> post_order;
    std::unordered_set<const Node*> visited;
    std::vector<std::pair<const Node*, std::size_t>> stack{{root.node().get(), 0}};
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            const Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            post_order.push_back(node);
            stack.pop_back();
        }
    }
    tape.order_.assign(post_order.rbegin(), post_order.rend());
    return tape;
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
        throw InputError("backward: loss must be a 1x1 tensor");
    }
    if (!loss.requires_grad()) return;
    const Tape tape = Tape::record(loss);
    loss.node()->accumulate(Matrix::Ones(1, 1));
    for (const Node* cnode : tape.order()) {
        // Nodes on the tape are owned by live tensors reachable from `loss`.
        Node* node = const_cast<Node*>(cnode);
        if (!node->backward || node->grad.size() == 0) continue;
        node->backward(node->grad, node->inputs);
        node->grad.resize(0, 0);
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.cols() == b.rows(), "matmul", "cannot multiply " + shape_of(a) + " by " + shape_of(b));
    Matrix out = a.value() * b.value();
    return make_result(std::move(out), "matmul", {a, b}, [](const Matrix& g, std::span<const NodePtr> in) {
        if (in[0]->requires_grad) in[0]->accumulate(g * in[1]->value.transpose());
        if (in[1]->requires_grad) in[1]->accumulate(in[0]->value.transpose() * g);
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    const bool broadcast = b.rows() == 1 && a.rows() != 1 && a.cols() == b.cols();
    if (!broadcast) require_same_shape(a, b, "add");
    Matrix out = a.value();
    if (broadcast) {
        out.rowwise() += b.value().row(0);
    } else {
        out += b.value();
    }
    return make_result(std::move(out), "add", {a, b}, [broadcast](const Matrix& g, std::span<const NodePtr> in) {
        in[0]->accumulate(g);
        if (!in[1]->requires_grad) return;
        if (broadcast) {
            in[1]->accumulate(g.colwise().sum());
        } else {
            in[1]->accumulate(g);
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    return make_result(a.value() - b.value(), "sub", {a, b}, [](const Matrix& g, std::span<const NodePtr> in) {
        in[0]->accumulate(g);
        if (in[1]->requires_grad) in[1]->accumulate(-g);
    });
}

Tensor scale(const Tensor& a, double s) {
    return make_result(s * a.value(), "scale", {a},
                       [s](const Matrix& g, std::span<const NodePtr> in) { in[0]->accumulate(s * g); });
}

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "elementwise_mul");
    Matrix out = a.value().cwiseProduct(b.value());
    return make_result(std::move(out), "elementwise_mul", {a, b}, [](const Matrix& g, std::span<const NodePtr> in) {
        if (in[0]->requires_grad) in[0]->accumulate(g.cwiseProduct(in[1]->value));
        if (in[1]->requires_grad) in[1]->accumulate(g.cwiseProduct(in[0]->value));
    });
}

Tensor row_softmax(const Tensor& a) {
    Matrix out = a.value();
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        row.array() -= row.maxCoeff();
        row = row.array().exp().matrix();
        row /= row.sum();
    }
    Matrix y = out;
    return make_result(std::move(out), "row_softmax", {a},
                       [y = std::move(y)](const Matrix& g, std::span<const NodePtr> in) {
                           const Vector dots = g.cwiseProduct(y).rowwise().sum();
                           Matrix dx = g;
                           dx.colwise() -= dots;
                           in[0]->accumulate(dx.cwiseProduct(y));
                       });
}

Tensor log_clamped(const Tensor& a) {
    Matrix out = a.value().unaryExpr([](double x) { return std::log(std::max(x, kLogClamp)); });
    return make_result(std::move(out), "log_clamped", {a}, [](const Matrix& g, std::span<const NodePtr> in) {
        const Matrix& x = in[0]->value;
        Matrix dx = Matrix::Zero(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (x.data()[i] > kLogClamp) dx.data()[i] = g.data()[i] / x.data()[i];
        }
        in[0]->accumulate(dx);
    });
}

Tensor relu(const Tensor& a) {
    return leaky_relu(a, 0.0);
}

Tensor leaky_relu(const Tensor& a, double slope) {
    const std::string_view op = slope == 0.0 ? "relu" : "leaky_relu";
    Matrix out = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : (slope == 0.0 ? 0.0 : slope * x); });
    return make_result(std::move(out), op, {a}, [slope](const Matrix& g, std::span<const NodePtr> in) {
        const Matrix& x = in[0]->value;
        Matrix dx(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            dx.data()[i] = x.data()[i] > 0.0 ? g.data()[i] : slope * g.data()[i];
        }
        in[0]->accumulate(dx);
    });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    require(a.rows() == b.rows(), "concat_cols", "row counts differ: " + shape_of(a) + " vs " + shape_of(b));
    Matrix out(a.rows(), a.cols() + b.cols());
    out << a.value(), b.value();
    const Eigen::Index split = a.cols();
    return make_result(std::move(out), "concat_cols", {a, b},
                       [split](const Matrix& g, std::span<const NodePtr> in) {
                           if (in[0]->requires_grad) in[0]->accumulate(g.leftCols(split));
                           if (in[1]->requires_grad) in[1]->accumulate(g.rightCols(g.cols() - split));
                       });
}

Tensor sum(const Tensor& a) {
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return make_result(std::move(out), "sum", {a}, [](const Matrix& g, std::span<const NodePtr> in) {
        in[0]->accumulate(Matrix::Constant(in[0]->value.rows(), in[0]->value.cols(), g(0, 0)));
    });
}

Tensor dropout(const Tensor& a, double rate, bool training, std::uint64_t seed) {
    require(rate >= 0.0 && rate < 1.0, "dropout", "rate must lie in [0, 1), got " + std::to_string(rate));
    if (!training || rate == 0.0) return a;
    Rng rng(seed);
    const double keep_scale = 1.0 / (1.0 - rate);
    Matrix mask(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = rng.uniform01() < rate ? 0.0 : keep_scale;
    }
    Matrix out = a.value().cwiseProduct(mask);
    return make_result(std::move(out), "dropout", {a},
                       [mask = std::move(mask)](const Matrix& g, std::span<const NodePtr> in) {
                           in[0]->accumulate(g.cwiseProduct(mask));
                       });
}

Tensor spmm(const NormalizedAdjacency& a_hat, const Tensor& b) {
    require(static_cast<Eigen::Index>(a_hat.n_nodes()) == b.rows(), "spmm",
            "adjacency is " + std::to_string(a_hat.n_nodes()) + "x" + std::to_string(a_hat.n_nodes()) +
                " but operand is " + shape_of(b));
    const NormalizedAdjacency* adj = &a_hat;
    return make_result(a_hat.multiply(b.value()), "spmm", {b},
                       [adj](const Matrix& g, std::span<const NodePtr> in) { in[0]->accumulate(adj->multiply(g)); });
}

Tensor sparse_matmul(std::shared_ptr<const SparseMatrix> x, const Tensor& w) {
    require(x != nullptr, "sparse_matmul", "null sparse operand");
    require(x->cols() == w.rows(), "sparse_matmul",
            "cannot multiply " + std::to_string(x->rows()) + "x" + std::to_string(x->cols()) + " by " + shape_of(w));
    Matrix out = *x * w.value();
    return make_result(std::move(out), "sparse_matmul", {w},
                       [x = std::move(x)](const Matrix& g, std::span<const NodePtr> in) {
                           in[0]->accumulate(Matrix(x->transpose() * g));
                       });
}

namespace {

struct AttentionForward {
    std::vector<double> score;  // pre-activation s per stored entry
    std::vector<double> alpha;
};

AttentionForward attention_forward(const Graph& pattern, const Matrix& wh, const Matrix& attn, double slope) {
    const Eigen::Index d = wh.cols();
    const Vector dst = wh * attn.topRows(d).col(0);
    const Vector src = wh * attn.bottomRows(d).col(0);
    const auto& csr = pattern.storage();
    AttentionForward fw;
    fw.score.resize(csr.nnz());
    fw.alpha.resize(csr.nnz());
    for (std::size_t v = 0; v < csr.n; ++v) {
        const std::size_t begin = csr.row_offsets[v];
        const std::size_t end = csr.row_offsets[v + 1];
        if (begin == end) continue;
        double max_e = -std::numeric_limits<double>::infinity();
        for (std::size_t k = begin; k < end; ++k) {
            const double s = dst(static_cast<Eigen::Index>(v)) + src(csr.columns[k]);
            fw.score[k] = s;
            fw.alpha[k] = s > 0.0 ? s : slope * s;
            max_e = std::max(max_e, fw.alpha[k]);
        }
        double total = 0.0;
        for (std::size_t k = begin; k < end; ++k) {
            fw.alpha[k] = std::exp(fw.alpha[k] - max_e);
            total += fw.alpha[k];
        }
        for (std::size_t k = begin; k < end; ++k) fw.alpha[k] /= total;
    }
    return fw;
}

void check_attention_shapes(const Graph& pattern, const Matrix& wh, const Matrix& attn) {
    require(static_cast<Eigen::Index>(pattern.n_nodes()) == wh.rows(), "graph_attention",
            "graph has " + std::to_string(pattern.n_nodes()) + " nodes but features have " +
                std::to_string(wh.rows()) + " rows");
    require(attn.rows() == 2 * wh.cols() && attn.cols() == 1, "graph_attention",
            "attention vector must be " + std::to_string(2 * wh.cols()) + "x1");
}

} // namespace

std::vector<double> attention_coefficients(const Graph& pattern, const Matrix& wh, const Matrix& attn, double slope) {
    check_attention_shapes(pattern, wh, attn);
    return attention_forward(pattern, wh, attn, slope).alpha;
}

Tensor graph_attention(const Graph& pattern, const Tensor& wh, const Tensor& attn, double slope) {
    check_attention_shapes(pattern, wh.value(), attn.value());
    AttentionForward fw = attention_forward(pattern, wh.value(), attn.value(), slope);
    const auto& csr = pattern.storage();
    Matrix out = Matrix::Zero(wh.rows(), wh.cols());
    for (std::size_t v = 0; v < csr.n; ++v) {
        auto row = out.row(static_cast<Eigen::Index>(v));
        for (std::size_t k = csr.row_offsets[v]; k < csr.row_offsets[v + 1]; ++k) {
            row.noalias() += fw.alpha[k] * wh.value().row(csr.columns[k]);
        }
    }
    const Graph* pat = &pattern;
    return make_result(
        std::move(out), "graph_attention", {wh, attn},
        [pat, slope, fw = std::move(fw)](const Matrix& g, std::span<const NodePtr> in) {
            const Matrix& h = in[0]->value;
            const Matrix& a = in[1]->value;
            const Eigen::Index d = h.cols();
            const auto& csr = pat->storage();
            Matrix dh = Matrix::Zero(h.rows(), d);
            Vector d_dst = Vector::Zero(h.rows());
            Vector d_src = Vector::Zero(h.rows());
            std::vector<double> d_alpha;
            for (std::size_t v = 0; v < csr.n; ++v) {
                const std::size_t begin = csr.row_offsets[v];
                const std::size_t end = csr.row_offsets[v + 1];
                const auto gv = g.row(static_cast<Eigen::Index>(v));
                d_alpha.resize(end - begin);
                double weighted = 0.0;
                for (std::size_t k = begin; k < end; ++k) {
                    const NodeId u = csr.columns[k];
                    d_alpha[k - begin] = gv.dot(h.row(u));
                    weighted += fw.alpha[k] * d_alpha[k - begin];
                    dh.row(u).noalias() += fw.alpha[k] * gv;
                }
                for (std::size_t k = begin; k < end; ++k) {
                    const double de = fw.alpha[k] * (d_alpha[k - begin] - weighted);
                    const double ds = fw.score[k] > 0.0 ? de : slope * de;
                    d_dst(static_cast<Eigen::Index>(v)) += ds;
                    d_src(csr.columns[k]) += ds;
                }
            }
            if (in[0]->requires_grad) {
                dh.noalias() += d_dst * a.topRows(d).transpose();
                dh.noalias() += d_src * a.bottomRows(d).transpose();
                in[0]->accumulate(dh);
            }
            if (in[1]->requires_grad) {
                Matrix da(2 * d, 1);
                da.topRows(d) = h.transpose() * d_dst;
                da.bottomRows(d) = h.transpose() * d_src;
                in[1]->accumulate(da);
            }
        });
}

double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, const Matrix& x, double step) {
    Tensor param = Tensor::parameter(x);
    const Tensor out = f(param);
    backward(out);
    const Matrix analytic = param.grad();

    double worst = 0.0;
    Matrix probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double original = x.data()[i];
        probe.data()[i] = original + step;
        const double hi_arg = probe.data()[i];
        const double hi = f(Tensor::constant(probe)).item();
        probe.data()[i] = original - step;
        const double lo_arg = probe.data()[i];
        const double lo = f(Tensor::constant(probe)).item();
        probe.data()[i] = original;
        const double numeric = (hi - lo) / (hi_arg - lo_arg);
        worst = std::max(worst, std::abs(analytic.data()[i] - numeric) / (std::abs(numeric) + 1e-8));
    }
    return worst;
}

} // namespace gsmooth::ad
