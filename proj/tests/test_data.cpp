#include "oracles.hpp"

#include <gsmooth/data.hpp>
#include <gsmooth/errors.hpp>
#include <gsmooth/synthetic.hpp>

#include <doctest.h>

#include <filesystem>
#include <functional>
#include <unistd.h>
#include <fstream>
#include <set>
#include <sstream>

using namespace gsmooth;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("gsmooth_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

LabeledDataset small_dataset() {
    SyntheticConfig cfg;
    cfg.n_nodes = 60;
    cfg.n_classes = 3;
    cfg.n_features = 12;
    cfg.words_per_node = 3;
    cfg.seed = 4;
    return make_synthetic_dataset(cfg, "tiny");
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const InputError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("feature parsing") {
    std::istringstream dense("1,2,3\n0,0.5,-1\n");
    const Matrix m = read_features(dense);
    CHECK(m.rows() == 2);
    CHECK(m(1, 2) == -1.0);

    std::istringstream sparse("#sparse d=4\n0:1 3:2.5\n\n1:1\n");
    const Matrix s = read_features(sparse);
    CHECK(s.rows() == 3);
    CHECK(s.cols() == 4);
    CHECK(s(0, 3) == 2.5);
    CHECK(s.row(1).sum() == 0.0);

    std::istringstream ragged("1,2\n1,2,3\n");
    CHECK(message_of([&] { read_features(ragged, "f.csv"); }).find("f.csv line 2") != std::string::npos);
    std::istringstream junk("1,abc\n");
    CHECK(message_of([&] { read_features(junk, "f.csv"); }).find("line 1") != std::string::npos);
    std::istringstream out_of_range("#sparse d=2\n5:1\n");
    CHECK(message_of([&] { read_features(out_of_range, "f.csv"); }).find("line 2") != std::string::npos);
}

TEST_CASE("label parsing") {
    std::istringstream good("0\n2\n1\n");
    CHECK(read_labels(good) == std::vector<int>{0, 2, 1});
    std::istringstream bad("0\n1\nx\n");
    CHECK(message_of([&] { read_labels(bad, "labels.txt"); }).find("labels.txt line 3") != std::string::npos);
    std::istringstream neg("0\n-1\n");
    CHECK_THROWS_AS(read_labels(neg), InputError);
}

TEST_CASE("row_normalize_features") {
    LabeledDataset ds = small_dataset();
    ds.features.row(0) << 2, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0;
    ds.features.row(1).setZero();
    const LabeledDataset n = row_normalize_features(ds);
    CHECK(n.features(0, 0) == 0.5);
    CHECK(n.features(0, 1) == 0.5);
    CHECK(n.features.row(1).sum() == 0.0);
    for (Eigen::Index i = 0; i < n.features.rows(); ++i) {
        const double s = n.features.row(i).sum();
        CHECK((s == 0.0 || std::abs(s - 1.0) < 1e-15));
    }
}

TEST_CASE("dataset save/load round trip is bit exact") {
    TempDir dir("roundtrip");
    LabeledDataset ds = small_dataset();
    ds.features = row_normalize_features(ds).features;  // awkward decimals
    save_dataset(ds, dir.path / "tiny");
    const LabeledDataset back = load_dataset(dir.path / "tiny");
    CHECK(back.name == "tiny");
    CHECK(back.n_classes == 3);
    CHECK(back.labels == ds.labels);
    CHECK(back.features == ds.features);
    CHECK(back.graph.storage().columns == ds.graph.storage().columns);

    const std::string first = read_file(dir.path / "tiny" / "features.csv");
    save_dataset(back, dir.path / "again");
    CHECK(read_file(dir.path / "again" / "features.csv") == first);
    CHECK(read_file(dir.path / "again" / "graph.edges") == read_file(dir.path / "tiny" / "graph.edges"));

    ds.features = Matrix::Constant(60, 12, 0.25);  // dense layout path
    save_dataset(ds, dir.path / "dense");
    CHECK(read_file(dir.path / "dense" / "features.csv").rfind("#sparse", 0) != 0);
    CHECK(load_dataset(dir.path / "dense").features == ds.features);
}

TEST_CASE("load_dataset reports the offending file and line") {
    TempDir dir("corrupt");
    save_dataset(small_dataset(), dir.path / "d");
    const fs::path d = dir.path / "d";

    SUBCASE("bad label line") {
        std::string labels = read_file(d / "labels.txt");
        labels.replace(labels.find('\n') + 1, 1, "q");
        write_file(d / "labels.txt", labels);
        const std::string msg = message_of([&] { load_dataset(d); });
        CHECK(msg.find("labels.txt line 2") != std::string::npos);
    }
    SUBCASE("non-contiguous class ids") {
        std::string labels = read_file(d / "labels.txt");
        for (char& c : labels) {
            if (c == '2') c = '5';
        }
        write_file(d / "labels.txt", labels);
        CHECK(message_of([&] { load_dataset(d); }).find("unknown class id 5") != std::string::npos);
    }
    SUBCASE("row count mismatch") {
        write_file(d / "labels.txt", read_file(d / "labels.txt") + "0\n");
        CHECK(message_of([&] { load_dataset(d); }).find("rows") != std::string::npos);
    }
    SUBCASE("edge out of range") {
        write_file(d / "graph.edges", read_file(d / "graph.edges") + "0 600\n");
        CHECK(message_of([&] { load_dataset(d); }).find("graph.edges") != std::string::npos);
    }
    SUBCASE("malformed edge") {
        write_file(d / "graph.edges", "0 1\n2\n");
        CHECK(message_of([&] { load_dataset(d); }).find("line 2") != std::string::npos);
    }
    SUBCASE("missing file") {
        fs::remove(d / "features.csv");
        CHECK(message_of([&] { load_dataset(d); }).find("features.csv") != std::string::npos);
    }
}

TEST_CASE("make_splits") {
    SyntheticConfig cfg;
    cfg.n_nodes = 2000;
    cfg.n_classes = 7;
    cfg.n_features = 50;
    const LabeledDataset ds = make_synthetic_dataset(cfg);
    const auto splits = make_splits(ds, 20, 3, 10);
    REQUIRE(splits.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        const Split& s = splits[k];
        CHECK(s.seed == 10 + k);
        CHECK(s.ell == 20);
        CHECK(s.train.size() == 140);
        CHECK(s.val.size() == 500);
        CHECK(s.test.size() == 1000);
        std::set<NodeId> all(s.train.begin(), s.train.end());
        all.insert(s.val.begin(), s.val.end());
        all.insert(s.test.begin(), s.test.end());
        CHECK(all.size() == 1640);
        std::vector<int> per_class(7, 0);
        for (NodeId v : s.train) ++per_class[static_cast<std::size_t>(ds.labels[v])];
        CHECK(per_class == std::vector<int>(7, 20));
    }
    CHECK(splits[0].train != splits[1].train);

    const Split again = make_split(ds, 20, 11);
    CHECK(again.train == splits[1].train);
    CHECK(again.val == splits[1].val);
    CHECK(again.test == splits[1].test);

    cfg.n_classes = 6;
    const LabeledDataset six = make_synthetic_dataset(cfg);
    CHECK(make_split(six, 5, 0).train.size() == 30);

    CHECK_THROWS_AS(make_split(ds, 20, 0, SplitSizes{1500, 1000}), InputError);
    CHECK_THROWS_AS(make_split(small_dataset(), 30, 0, SplitSizes{0, 0}), InputError);
}

TEST_CASE("split JSON round trip") {
    const Split s = make_split(small_dataset(), 3, 7, SplitSizes{10, 20});
    const std::string text = split_to_json(s);
    CHECK(text.rfind("{\"seed\":7,\"ell\":3,\"train\":[", 0) == 0);
    const Split back = split_from_json(text);
    CHECK(back.seed == 7);
    CHECK(back.train == s.train);
    CHECK(back.val == s.val);
    CHECK(back.test == s.test);
    CHECK_THROWS_AS(split_from_json("{\"seed\":1}"), InputError);
}

TEST_CASE("validate_dataset") {
    TempDir dir("validate");
    LabeledDataset ds = small_dataset();
    save_dataset(ds, dir.path / "ok");
    const DatasetReport ok = validate_dataset(dir.path / "ok");
    CHECK(ok.ok());
    CHECK(ok.nodes == 60);
    CHECK(ok.classes == 3);
    CHECK(ok.features == 12);
    CHECK(ok.edges == ds.graph.undirected_edge_count());
    CHECK(ok.summary() == "60 nodes, " + std::to_string(ok.edges) + " edges, 3 classes, 12 features: OK");

    save_dataset(ds, dir.path / "bad");
    write_file(dir.path / "bad" / "labels.txt", "0\n1\nzz\n");
    const DatasetReport bad = validate_dataset(dir.path / "bad");
    CHECK_FALSE(bad.ok());
    REQUIRE_FALSE(bad.errors.empty());
    CHECK(bad.errors.front().find("line 3") != std::string::npos);
    CHECK(bad.summary().find("FAILED") != std::string::npos);

    CHECK_FALSE(validate_dataset(dir.path / "missing").ok());
}

TEST_CASE("known dataset table") {
    const auto known = known_datasets();
    REQUIRE(known.size() == 3);
    CHECK(std::string(known[0].name) == "cora");
    CHECK(known[0].nodes == 2708);
    CHECK(known[0].edges == 5429);
    CHECK(known[2].nodes == 19717);
    CHECK(known[2].features == 500);
}

TEST_CASE("synthetic generator") {
    const LabeledDataset a = small_dataset();
    const LabeledDataset b = small_dataset();
    CHECK(a.features == b.features);
    CHECK(a.graph.storage().columns == b.graph.storage().columns);
    CHECK_NOTHROW(a.validate());
    SyntheticConfig bad;
    bad.n_classes = 1;
    CHECK_THROWS_AS(make_synthetic_dataset(bad), InputError);
}
