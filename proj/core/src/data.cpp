#include <gsmooth/data.hpp>
#include <gsmooth/errors.hpp>
#include <gsmooth/rng.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

namespace gsmooth {

namespace fs = std::filesystem;

namespace {

std::string at_line(const std::string& source, std::size_t line_no) {
    return source + " line " + std::to_string(line_no) + ": ";
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

bool parse_double(std::string_view token, double& value) {
    token = trim(token);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    return ec == std::errc() && ptr == token.data() + token.size() && std::isfinite(value);
}

template <typename Int>
bool parse_int(std::string_view token, Int& value) {
    token = trim(token);
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    return !token.empty() && ec == std::errc() && ptr == token.data() + token.size();
}

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return in;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void LabeledDataset::validate() const {
    const std::size_t n = labels.size();
    if (graph.n_nodes() != n) {
        throw InputError("dataset: graph has " + std::to_string(graph.n_nodes()) + " nodes but there are " +
                         std::to_string(n) + " labels");
    }
    if (static_cast<std::size_t>(features.rows()) != n) {
        throw InputError("dataset: features have " + std::to_string(features.rows()) + " rows but there are " +
                         std::to_string(n) + " labels");
    }
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
            throw InputError("dataset: node " + std::to_string(i) + " has class " + std::to_string(labels[i]) +
                             " outside [0, " + std::to_string(n_classes) + ")");
        }
        ++counts[static_cast<std::size_t>(labels[i])];
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (counts[c] == 0) throw InputError("dataset: class " + std::to_string(c) + " has no nodes");
    }
    if (!features.allFinite()) throw InputError("dataset: features contain non-finite values");
}

Matrix read_features(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::vector<std::pair<std::size_t, double>>> sparse_rows;
    std::vector<std::vector<double>> dense_rows;
    bool sparse = false;
    std::size_t d = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.rfind("#sparse", 0) == 0) {
            const auto pos = line.find("d=");
            if (pos == std::string::npos || !parse_int(std::string_view(line).substr(pos + 2), d) || d == 0) {
                throw InputError(at_line(source, line_no) + "sparse header must read '#sparse d=<dimension>'");
            }
            sparse = true;
            continue;
        }
        const std::string_view body = trim(line);
        if (sparse) {
            std::vector<std::pair<std::size_t, double>> row;
            std::istringstream tokens{std::string(body)};
            std::string token;
            while (tokens >> token) {
                const auto colon = token.find(':');
                std::size_t idx = 0;
                double value = 0.0;
                if (colon == std::string::npos || !parse_int(std::string_view(token).substr(0, colon), idx) ||
                    !parse_double(std::string_view(token).substr(colon + 1), value)) {
                    throw InputError(at_line(source, line_no) + "malformed sparse entry '" + token + "'");
                }
                if (idx >= d) {
                    throw InputError(at_line(source, line_no) + "feature index " + std::to_string(idx) +
                                     " is outside [0, " + std::to_string(d) + ")");
                }
                row.emplace_back(idx, value);
            }
            sparse_rows.push_back(std::move(row));
        } else {
            if (body.empty()) throw InputError(at_line(source, line_no) + "empty feature row");
            std::vector<double> row;
            std::size_t start = 0;
            while (true) {
                const auto comma = body.find(',', start);
                const auto field = body.substr(start, comma == std::string_view::npos ? body.npos : comma - start);
                double value = 0.0;
                if (!parse_double(field, value)) {
                    throw InputError(at_line(source, line_no) + "malformed value '" + std::string(field) + "'");
                }
                row.push_back(value);
                if (comma == std::string_view::npos) break;
                start = comma + 1;
            }
            if (dense_rows.empty()) d = row.size();
            if (row.size() != d) {
                throw InputError(at_line(source, line_no) + "expected " + std::to_string(d) + " values, got " +
                                 std::to_string(row.size()));
            }
            dense_rows.push_back(std::move(row));
        }
    }

    const std::size_t n = sparse ? sparse_rows.size() : dense_rows.size();
    Matrix features = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        if (sparse) {
            for (const auto& [j, v] : sparse_rows[i]) features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        } else {
            for (std::size_t j = 0; j < d; ++j) features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = dense_rows[i][j];
        }
    }
    return features;
}

void write_features(std::ostream& out, const Matrix& features) {
    const auto nonzeros = (features.array() != 0.0).count();
    const bool sparse = 2 * nonzeros < features.size();
    if (sparse) {
        out << "#sparse d=" << features.cols() << '\n';
        for (Eigen::Index i = 0; i < features.rows(); ++i) {
            bool first = true;
            for (Eigen::Index j = 0; j < features.cols(); ++j) {
                if (features(i, j) == 0.0) continue;
                out << (first ? "" : " ") << j << ':' << format_double(features(i, j));
                first = false;
            }
            out << '\n';
        }
        return;
    }
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        for (Eigen::Index j = 0; j < features.cols(); ++j) {
            out << (j == 0 ? "" : ",") << format_double(features(i, j));
        }
        out << '\n';
    }
}

std::vector<int> read_labels(std::istream& in, const std::string& source) {
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        int c = 0;
        if (!parse_int(line, c) || c < 0) {
            throw InputError(at_line(source, line_no) + "expected a non-negative class id, got '" + line + "'");
        }
        labels.push_back(c);
    }
    return labels;
}

namespace {

std::size_t class_count(const std::vector<int>& labels, const std::string& source) {
    if (labels.empty()) throw InputError(source + ": no labels");
    const int max_label = *std::max_element(labels.begin(), labels.end());
    const auto c = static_cast<std::size_t>(max_label) + 1;
    std::vector<bool> seen(c, false);
    for (int l : labels) seen[static_cast<std::size_t>(l)] = true;
    for (std::size_t k = 0; k < c; ++k) {
        if (!seen[k]) {
            const auto it = std::find(labels.begin(), labels.end(), max_label);
            throw InputError(source + " line " + std::to_string(it - labels.begin() + 1) + ": unknown class id " +
                             std::to_string(max_label) + " (class " + std::to_string(k) +
                             " never occurs, so ids are not contiguous)");
        }
    }
    return c;
}

} // namespace

LabeledDataset load_dataset(const fs::path& dir) {
    LabeledDataset ds;
    ds.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();

    const std::string labels_src = (dir / "labels.txt").string();
    auto labels_in = open_input(dir / "labels.txt");
    ds.labels = read_labels(labels_in, labels_src);
    ds.n_classes = class_count(ds.labels, labels_src);

    const std::string features_src = (dir / "features.csv").string();
    auto features_in = open_input(dir / "features.csv");
    ds.features = read_features(features_in, features_src);
    if (static_cast<std::size_t>(ds.features.rows()) != ds.labels.size()) {
        throw InputError(features_src + ": has " + std::to_string(ds.features.rows()) + " rows but " + labels_src +
                         " has " + std::to_string(ds.labels.size()));
    }

    auto edges_in = open_input(dir / "graph.edges");
    try {
        ds.graph = from_edge_list(read_edge_list(edges_in), ds.labels.size());
    } catch (const InputError& e) {
        throw InputError((dir / "graph.edges").string() + ": " + e.what());
    }
    ds.validate();
    return ds;
}

void save_dataset(const LabeledDataset& ds, const fs::path& dir) {
    ds.validate();
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "graph.edges");
        write_edge_list(out, ds.graph);
    }
    {
        std::ofstream out(dir / "features.csv");
        write_features(out, ds.features);
    }
    std::ofstream out(dir / "labels.txt");
    for (int l : ds.labels) out << l << '\n';
    if (!out) throw InputError("failed writing dataset to " + dir.string());
}

LabeledDataset row_normalize_features(LabeledDataset ds) {
    for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
        const double norm = ds.features.row(i).cwiseAbs().sum();
        if (norm > 0.0) ds.features.row(i) /= norm;
    }
    return ds;
}

Split make_split(const LabeledDataset& ds, std::size_t ell, std::uint64_t seed, SplitSizes sizes) {
    const std::size_t n = ds.n_nodes();
    std::vector<std::vector<NodeId>> by_class(ds.n_classes);
    for (NodeId v = 0; v < n; ++v) by_class[static_cast<std::size_t>(ds.labels[v])].push_back(v);
    for (std::size_t c = 0; c < ds.n_classes; ++c) {
        if (by_class[c].size() < ell) {
            throw InputError("make_splits: class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                             " nodes, fewer than ell = " + std::to_string(ell));
        }
    }
    if (n < ell * ds.n_classes + sizes.val + sizes.test) {
        throw InputError("make_splits: " + std::to_string(n) + " nodes cannot hold " + std::to_string(ell) +
                         " per class plus " + std::to_string(sizes.val) + " validation and " +
                         std::to_string(sizes.test) + " test nodes");
    }

    Rng rng(seed);
    auto partial_shuffle = [&rng](std::vector<NodeId>& pool, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
    };

    Split split;
    split.seed = seed;
    split.ell = ell;
    std::vector<bool> taken(n, false);
    for (auto& members : by_class) {
        partial_shuffle(members, ell);
        for (std::size_t i = 0; i < ell; ++i) {
            split.train.push_back(members[i]);
            taken[members[i]] = true;
        }
    }
    std::vector<NodeId> rest;
    rest.reserve(n - split.train.size());
    for (NodeId v = 0; v < n; ++v) {
        if (!taken[v]) rest.push_back(v);
    }
    partial_shuffle(rest, sizes.val + sizes.test);
    split.val.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(sizes.val));
    split.test.assign(rest.begin() + static_cast<std::ptrdiff_t>(sizes.val),
                      rest.begin() + static_cast<std::ptrdiff_t>(sizes.val + sizes.test));
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

std::vector<Split> make_splits(const LabeledDataset& ds, std::size_t ell, std::size_t n_splits,
                               std::uint64_t base_seed, SplitSizes sizes) {
    std::vector<Split> splits;
    splits.reserve(n_splits);
    for (std::size_t k = 0; k < n_splits; ++k) splits.push_back(make_split(ds, ell, base_seed + k, sizes));
    return splits;
}

std::string split_to_json(const Split& split) {
    const nlohmann::ordered_json j = {
        {"seed", split.seed}, {"ell", split.ell}, {"train", split.train}, {"val", split.val}, {"test", split.test}};
    return j.dump();
}

Split split_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        Split s;
        s.seed = j.at("seed").get<std::uint64_t>();
        s.ell = j.at("ell").get<std::size_t>();
        s.train = j.at("train").get<std::vector<NodeId>>();
        s.val = j.at("val").get<std::vector<NodeId>>();
        s.test = j.at("test").get<std::vector<NodeId>>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("split json: ") + e.what());
    }
}

std::span<const KnownDataset> known_datasets() {
    static constexpr std::array<KnownDataset, 3> table{{
        {"cora", 2708, 5429, 7, 1433},
        {"citeseer", 3327, 4732, 6, 3703},
        {"pubmed", 19717, 44338, 3, 500},
    }};
    return table;
}

std::string DatasetReport::summary() const {
    std::ostringstream out;
    out << nodes << " nodes, " << edges << " edges, " << classes << " classes, " << features
        << " features: " << (ok() ? "OK" : "FAILED");
    return out.str();
}

DatasetReport validate_dataset(const fs::path& dir) {
    DatasetReport report;
    std::vector<int> labels;
    Matrix features;
    std::vector<Edge> edges;
    bool have_labels = false;
    bool have_features = false;
    bool have_edges = false;

    auto attempt = [&report](auto&& body) {
        try {
            body();
            return true;
        } catch (const std::exception& e) {
            report.errors.emplace_back(e.what());
            return false;
        }
    };

    have_labels = attempt([&] {
        auto in = open_input(dir / "labels.txt");
        labels = read_labels(in, (dir / "labels.txt").string());
        report.nodes = labels.size();
        report.classes = class_count(labels, (dir / "labels.txt").string());
    });
    have_features = attempt([&] {
        auto in = open_input(dir / "features.csv");
        features = read_features(in, (dir / "features.csv").string());
        report.features = static_cast<std::size_t>(features.cols());
    });
    have_edges = attempt([&] {
        auto in = open_input(dir / "graph.edges");
        edges = read_edge_list(in);
    });

    if (have_labels && have_features && static_cast<std::size_t>(features.rows()) != labels.size()) {
        report.errors.push_back("features.csv has " + std::to_string(features.rows()) + " rows but labels.txt has " +
                                std::to_string(labels.size()));
    }
    if (have_labels && have_edges) {
        attempt([&] {
            const Graph g = from_edge_list(edges, labels.size());
            report.edges = g.undirected_edge_count();
            std::size_t isolated = 0;
            for (NodeId v = 0; v < g.n_nodes(); ++v) isolated += g.neighbors(v).empty() ? 1 : 0;
            if (isolated > 0) report.notes.push_back(std::to_string(isolated) + " isolated nodes");
            if (g.self_loop_count() > 0) {
                report.notes.push_back(std::to_string(g.self_loop_count()) + " self-loops in the edge list");
            }
            const std::size_t raw = edges.size();
            if (raw != report.edges) {
                report.notes.push_back(std::to_string(raw) + " edge lines collapse to " + std::to_string(report.edges) +
                                       " undirected edges after symmetrization and deduplication");
            }
        });
    }
    if (report.ok()) {
        for (const auto& known : known_datasets()) {
            if (known.nodes == report.nodes && known.classes == report.classes && known.features == report.features) {
                std::string note = "matches the " + std::string(known.name) + " reference sizes";
                if (known.edges != report.edges) {
                    note += "; reference edge count is " + std::to_string(known.edges);
                }
                report.notes.push_back(note);
            }
        }
    }
    return report;
}

} // namespace gsmooth
