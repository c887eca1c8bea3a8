#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace gsmooth {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Row-major dense matrix used for node-by-feature data throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Square compressed-sparse-row storage shared by Graph and NormalizedAdjacency.
/// Columns are sorted and unique within each row.
struct CsrStorage {
    std::size_t n = 0;
    std::vector<std::size_t> row_offsets{0};
    std::vector<NodeId> columns;
    std::vector<double> values;

    std::size_t nnz() const { return columns.size(); }
    std::span<const NodeId> row_columns(std::size_t row) const {
        return {columns.data() + row_offsets[row], row_offsets[row + 1] - row_offsets[row]};
    }
    std::span<const double> row_values(std::size_t row) const {
        return {values.data() + row_offsets[row], row_offsets[row + 1] - row_offsets[row]};
    }
    /// Stored value at (row, col), or 0 when absent.
    double at(std::size_t row, std::size_t col) const;
    Matrix to_dense() const;
};

/// Immutable undirected graph. Every stored entry (u,v) has a mirror (v,u)
/// of equal value; values are finite and non-negative.
class Graph {
public:
    Graph() = default;

    /// Validates the structural invariants; throws InputError on violation.
    static Graph from_csr(CsrStorage storage, bool binary_input);

    std::size_t n_nodes() const { return csr_.n; }
    std::size_t nnz() const { return csr_.nnz(); }
    bool binary_input() const { return binary_input_; }
    const CsrStorage& storage() const { return csr_; }

    std::span<const NodeId> neighbors(NodeId v) const { return csr_.row_columns(v); }
    std::span<const double> weights(NodeId v) const { return csr_.row_values(v); }

    bool has_self_loop(NodeId v) const;
    std::size_t self_loop_count() const;
    /// Unordered edge count: each {u,v} with u != v once, each self-loop once.
    std::size_t undirected_edge_count() const;

    Matrix to_dense() const { return csr_.to_dense(); }

private:
    CsrStorage csr_;
    bool binary_input_ = true;
};

/// D^{-1/2} Ã D^{-1/2} for a self-looped graph Ã. Symmetric with spectral
/// radius at most one. Built once and shared read-only.
class NormalizedAdjacency {
public:
    NormalizedAdjacency() = default;
    explicit NormalizedAdjacency(CsrStorage storage) : csr_(std::move(storage)) {}

    std::size_t n_nodes() const { return csr_.n; }
    std::size_t nnz() const { return csr_.nnz(); }
    const CsrStorage& storage() const { return csr_; }

    /// out = Â · in. Since Â is symmetric this is also Âᵀ · in.
    Matrix multiply(const Matrix& in) const;
    void multiply_into(const Matrix& in, Matrix& out) const;

    /// Row sums of Â (not all ones; Â is not stochastic).
    Vector row_sums() const;
    Vector diagonal() const;
    Matrix to_dense() const { return csr_.to_dense(); }

private:
    CsrStorage csr_;
};

/// Symmetrized, deduplicated binary graph from an undirected pair list.
/// Throws InputError for ids outside [0, n_nodes).
Graph from_edge_list(std::span<const Edge> pairs, std::size_t n_nodes);

/// Ã = A + I. Existing self-loops keep value 1.
Graph add_self_loops(const Graph& g);

/// Throws PreconditionError when a row of g_tilde has zero degree.
NormalizedAdjacency sym_normalize(const Graph& g_tilde);

/// Row sums of the stored values.
std::vector<double> degrees(const Graph& g);

/// Parses "u v" lines; '#' lines and blank lines are skipped. Line numbers in
/// errors are 1-based.
std::vector<Edge> read_edge_list(std::istream& in);
void write_edge_list(std::ostream& out, const Graph& g);

} // namespace gsmooth
