#include <gsmooth/errors.hpp>
#include <gsmooth/graph.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace gsmooth {

double CsrStorage::at(std::size_t row, std::size_t col) const {
    const auto cols = row_columns(row);
    const auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<NodeId>(col));
    if (it == cols.end() || *it != col) return 0.0;
    return values[row_offsets[row] + static_cast<std::size_t>(it - cols.begin())];
}

Matrix CsrStorage::to_dense() const {
    Matrix dense = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
            dense(static_cast<Eigen::Index>(r), columns[k]) = values[k];
        }
    }
    return dense;
}

namespace {

// Builds CSR from a list of directed (row, col) entries; duplicates collapse.
CsrStorage build_binary_csr(std::vector<Edge> entries, std::size_t n) {
    std::sort(entries.begin(), entries.end());
    entries.erase(std::unique(entries.begin(), entries.end()), entries.end());

    CsrStorage csr;
    csr.n = n;
    csr.row_offsets.assign(n + 1, 0);
    csr.columns.reserve(entries.size());
    csr.values.assign(entries.size(), 1.0);
    for (const auto& [u, v] : entries) {
        ++csr.row_offsets[u + 1];
        csr.columns.push_back(v);
    }
    for (std::size_t r = 0; r < n; ++r) csr.row_offsets[r + 1] += csr.row_offsets[r];
    return csr;
}

} // namespace

Graph Graph::from_csr(CsrStorage storage, bool binary_input) {
    const std::size_t n = storage.n;
    if (storage.row_offsets.size() != n + 1 || storage.row_offsets.front() != 0 ||
        storage.row_offsets.back() != storage.columns.size() ||
        storage.columns.size() != storage.values.size()) {
        throw InputError("graph: inconsistent CSR layout");
    }
    for (std::size_t r = 0; r < n; ++r) {
        if (storage.row_offsets[r] > storage.row_offsets[r + 1]) {
            throw InputError("graph: row offsets must be non-decreasing");
        }
        const auto cols = storage.row_columns(r);
        const auto vals = storage.row_values(r);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] >= n) throw InputError("graph: column index out of range in row " + std::to_string(r));
            if (k > 0 && cols[k] <= cols[k - 1]) {
                throw InputError("graph: columns must be sorted and unique in row " + std::to_string(r));
            }
            if (!std::isfinite(vals[k]) || vals[k] < 0.0) {
                throw InputError("graph: edge values must be finite and non-negative");
            }
        }
    }
    for (std::size_t r = 0; r < n; ++r) {
        const auto cols = storage.row_columns(r);
        const auto vals = storage.row_values(r);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const auto mirror_cols = storage.row_columns(cols[k]);
            const auto it = std::lower_bound(mirror_cols.begin(), mirror_cols.end(), static_cast<NodeId>(r));
            if (it == mirror_cols.end() || *it != r ||
                storage.values[storage.row_offsets[cols[k]] + static_cast<std::size_t>(it - mirror_cols.begin())] !=
                    vals[k]) {
                throw InputError("graph: structure is not symmetric at (" + std::to_string(r) + "," +
                                 std::to_string(cols[k]) + ")");
            }
        }
    }
    Graph g;
    g.csr_ = std::move(storage);
    g.binary_input_ = binary_input;
    return g;
}

bool Graph::has_self_loop(NodeId v) const {
    const auto cols = neighbors(v);
    return std::binary_search(cols.begin(), cols.end(), v);
}

std::size_t Graph::self_loop_count() const {
    std::size_t count = 0;
    for (NodeId v = 0; v < n_nodes(); ++v) count += has_self_loop(v) ? 1 : 0;
    return count;
}

std::size_t Graph::undirected_edge_count() const {
    const std::size_t loops = self_loop_count();
    return (nnz() - loops) / 2 + loops;
}

Matrix NormalizedAdjacency::multiply(const Matrix& in) const {
    Matrix out(in.rows(), in.cols());
    multiply_into(in, out);
    return out;
}

void NormalizedAdjacency::multiply_into(const Matrix& in, Matrix& out) const {
    if (static_cast<std::size_t>(in.rows()) != csr_.n) {
        throw InputError("spmm: adjacency is " + std::to_string(csr_.n) + "x" + std::to_string(csr_.n) +
                         " but operand has " + std::to_string(in.rows()) + " rows");
    }
    out.resize(in.rows(), in.cols());
    for (std::size_t r = 0; r < csr_.n; ++r) {
        auto row = out.row(static_cast<Eigen::Index>(r));
        row.setZero();
        for (std::size_t k = csr_.row_offsets[r]; k < csr_.row_offsets[r + 1]; ++k) {
            row.noalias() += csr_.values[k] * in.row(csr_.columns[k]);
        }
    }
}

Vector NormalizedAdjacency::row_sums() const {
    Vector sums = Vector::Zero(static_cast<Eigen::Index>(csr_.n));
    for (std::size_t r = 0; r < csr_.n; ++r) {
        for (double v : csr_.row_values(r)) sums(static_cast<Eigen::Index>(r)) += v;
    }
    return sums;
}

Vector NormalizedAdjacency::diagonal() const {
    Vector diag(static_cast<Eigen::Index>(csr_.n));
    for (std::size_t r = 0; r < csr_.n; ++r) diag(static_cast<Eigen::Index>(r)) = csr_.at(r, r);
    return diag;
}

Graph from_edge_list(std::span<const Edge> pairs, std::size_t n_nodes) {
    std::vector<Edge> entries;
    entries.reserve(pairs.size() * 2);
    for (const auto& [u, v] : pairs) {
        if (u >= n_nodes || v >= n_nodes) {
            throw InputError("edge (" + std::to_string(u) + "," + std::to_string(v) + ") references a node outside [0, " +
                             std::to_string(n_nodes) + ")");
        }
        entries.emplace_back(u, v);
        if (u != v) entries.emplace_back(v, u);
    }
    return Graph::from_csr(build_binary_csr(std::move(entries), n_nodes), true);
}

Graph add_self_loops(const Graph& g) {
    const auto& src = g.storage();
    CsrStorage out;
    out.n = src.n;
    out.row_offsets.assign(src.n + 1, 0);
    out.columns.reserve(src.nnz() + src.n);
    out.values.reserve(src.nnz() + src.n);
    for (std::size_t r = 0; r < src.n; ++r) {
        const auto cols = src.row_columns(r);
        const auto vals = src.row_values(r);
        bool placed = false;
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (!placed && cols[k] >= r) {
                out.columns.push_back(static_cast<NodeId>(r));
                out.values.push_back(1.0);
                placed = true;
                if (cols[k] == r) continue;
            }
            out.columns.push_back(cols[k]);
            out.values.push_back(vals[k]);
        }
        if (!placed) {
            out.columns.push_back(static_cast<NodeId>(r));
            out.values.push_back(1.0);
        }
        out.row_offsets[r + 1] = out.columns.size();
    }
    return Graph::from_csr(std::move(out), g.binary_input());
}

NormalizedAdjacency sym_normalize(const Graph& g_tilde) {
    const auto deg = degrees(g_tilde);
    std::vector<double> inv_sqrt(deg.size());
    for (std::size_t v = 0; v < deg.size(); ++v) {
        if (!(deg[v] > 0.0)) {
            throw PreconditionError("sym_normalize: node " + std::to_string(v) +
                                    " has zero degree; add self-loops first");
        }
        inv_sqrt[v] = 1.0 / std::sqrt(deg[v]);
    }
    CsrStorage out = g_tilde.storage();
    for (std::size_t r = 0; r < out.n; ++r) {
        for (std::size_t k = out.row_offsets[r]; k < out.row_offsets[r + 1]; ++k) {
            out.values[k] *= inv_sqrt[r] * inv_sqrt[out.columns[k]];
        }
    }
    return NormalizedAdjacency(std::move(out));
}

std::vector<double> degrees(const Graph& g) {
    std::vector<double> deg(g.n_nodes(), 0.0);
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        for (double w : g.weights(v)) deg[v] += w;
    }
    return deg;
}

std::vector<Edge> read_edge_list(std::istream& in) {
    std::vector<Edge> edges;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        long long u = -1;
        long long v = -1;
        std::string extra;
        if (!(fields >> u >> v) || (fields >> extra) || u < 0 || v < 0 || u > UINT32_MAX || v > UINT32_MAX) {
            throw InputError("edge list line " + std::to_string(line_no) + ": expected two non-negative node ids, got '" +
                             line + "'");
        }
        edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }
    return edges;
}

void write_edge_list(std::ostream& out, const Graph& g) {
    for (NodeId u = 0; u < g.n_nodes(); ++u) {
        for (NodeId v : g.neighbors(u)) {
            if (u <= v) out << u << ' ' << v << '\n';
        }
    }
}

} // namespace gsmooth
