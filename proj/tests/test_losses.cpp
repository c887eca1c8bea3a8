#include "oracles.hpp"

#include <gsmooth/errors.hpp>
#include <gsmooth/losses.hpp>

#include <doctest.h>

#include <cmath>

using namespace gsmooth;
using ad::Tensor;

namespace {

struct SmallGraph {
    std::size_t n;
    std::vector<Edge> edges;
    NormalizedAdjacency a_hat;
    Matrix dense;

    SmallGraph(std::size_t n_nodes, std::uint64_t seed, bool connected = true)
        : n(n_nodes),
          edges(oracle::random_edges(n_nodes, 2.5, seed, connected)),
          a_hat(sym_normalize(add_self_loops(from_edge_list(edges, n_nodes)))),
          dense(oracle::dense_normalized(oracle::dense_adjacency(edges, n_nodes))) {}
};

std::vector<NodeId> first_k(std::size_t k) {
    std::vector<NodeId> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = static_cast<NodeId>(i);
    return out;
}

} // namespace

TEST_CASE("softmax_predictions") {
    const Matrix u = softmax_predictions(Tensor::constant(Matrix::Zero(1, 3))).value();
    for (int j = 0; j < 3; ++j) CHECK(u(0, j) == doctest::Approx(1.0 / 3.0));
    const Matrix logits = oracle::random_matrix(40, 5, 1, -5, 5);
    const Matrix z = softmax_predictions(Tensor::constant(logits)).value();
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        CHECK(std::abs(z.row(i).sum() - 1.0) < 1e-10);
        CHECK(z.row(i).minCoeff() >= 0.0);
        CHECK(oracle::argmax_row(z, i) == oracle::argmax_row(logits, i));
    }
}

TEST_CASE("ce_fit") {
    const Matrix y = one_hot(std::vector<int>{0, 2, 1}, 3);
    CHECK(ce_fit(Tensor::constant(y), y, first_k(3)).item() == 0.0);

    const Tensor uniform = Tensor::constant(Matrix::Constant(3, 4, 0.25));
    const std::vector<NodeId> one{1};
    CHECK(ce_fit(uniform, one_hot(std::vector<int>{0, 3, 1}, 4), one).item() == doctest::Approx(std::log(4.0)));
    CHECK(ce_fit(uniform, one_hot(std::vector<int>{0, 3, 1}, 4), {}).item() == 0.0);

    const std::vector<NodeId> bad{5};
    CHECK_THROWS_AS(ce_fit(uniform, one_hot(std::vector<int>{0, 3, 1}, 4), bad), InputError);
}

TEST_CASE("l2 fit and smoothness") {
    const Matrix y = one_hot(std::vector<int>{1, 0, 1, 1}, 2);
    CHECK(l2_fit(Tensor::constant(y), y, first_k(4)).item() == 0.0);

    SmallGraph g(15, 2);
    const Matrix constant = Matrix::Constant(15, 3, 0.3);
    CHECK(std::abs(l2_smooth(Tensor::constant(constant), g.a_hat).item()) < 1e-14);

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SmallGraph h(10 + 4 * seed, 10 + seed, seed % 2 == 0);
        const Matrix z = oracle::random_distributions(static_cast<Eigen::Index>(h.n), 4, seed);
        const double value = l2_smooth(Tensor::constant(z), h.a_hat).item();
        const Matrix laplacian = Matrix(h.dense.rowwise().sum().asDiagonal()) - h.dense;
        const double trace_form = 2.0 * (z.transpose() * laplacian * z).trace();
        CHECK(value == doctest::Approx(trace_form).epsilon(1e-12));
        CHECK(value == doctest::Approx(oracle::l2_smooth_loops(z, h.dense)).epsilon(1e-12));
        CHECK(value >= 0.0);
        // The diagonal never contributes to the L2 variant.
        CHECK(l2_smooth(Tensor::constant(z), h.a_hat, false).item() == doctest::Approx(value).epsilon(1e-12));
    }
}

TEST_CASE("l2 smoothness vanishes exactly on component-constant functions") {
    // Two components: {0..4} path and {5..9} path.
    std::vector<Edge> edges;
    for (NodeId i = 0; i < 4; ++i) edges.emplace_back(i, i + 1);
    for (NodeId i = 5; i < 9; ++i) edges.emplace_back(i, i + 1);
    const NormalizedAdjacency a = sym_normalize(add_self_loops(from_edge_list(edges, 10)));
    Matrix z(10, 2);
    for (int i = 0; i < 10; ++i) z.row(i) << (i < 5 ? 0.2 : 0.9), (i < 5 ? 0.8 : 0.1);
    CHECK(l2_smooth(Tensor::constant(z), a).item() == 0.0);
    z(3, 0) += 1e-3;
    CHECK(l2_smooth(Tensor::constant(z), a).item() > 0.0);
}

TEST_CASE("one_hot_argmax") {
    Matrix z(3, 3);
    z << 0.1, 0.7, 0.2,  //
        0.5, 0.5, 0.0,   //
        0.3, 0.3, 0.4;
    Matrix expected(3, 3);
    expected << 0, 1, 0,  //
        1, 0, 0,          //
        0, 0, 1;
    CHECK(one_hot_argmax(z) == expected);
    CHECK(one_hot_argmax(z.array().exp().matrix() * 3.0) == expected);

    const Matrix r = one_hot_argmax(oracle::random_matrix(30, 6, 3));
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        CHECK(r.row(i).sum() == 1.0);
        for (Eigen::Index j = 0; j < r.cols(); ++j) CHECK((r(i, j) == 0.0 || r(i, j) == 1.0));
    }
}

TEST_CASE("ce_smooth against scalar-loop oracles") {
    SUBCASE("two connected nodes") {
        const std::vector<Edge> e{{0, 1}};
        const NormalizedAdjacency a = sym_normalize(add_self_loops(from_edge_list(e, 2)));
        Matrix z(2, 2);
        z << 0.9, 0.1, 0.1, 0.9;
        const double off_diagonal = -0.5 * std::log(0.1) - 0.5 * std::log(0.1);
        const double diagonal = -0.5 * std::log(0.9) - 0.5 * std::log(0.9);
        CHECK(ce_smooth(Tensor::constant(z), a, false).item() == doctest::Approx(off_diagonal).epsilon(1e-14));
        CHECK(ce_smooth(Tensor::constant(z), a, true).item() == doctest::Approx(off_diagonal + diagonal).epsilon(1e-14));
    }
    SUBCASE("empty graph") {
        const NormalizedAdjacency eye = sym_normalize(add_self_loops(from_edge_list({}, 6)));
        const Matrix z = oracle::random_distributions(6, 3, 4);
        double expected = 0.0;
        for (Eigen::Index i = 0; i < 6; ++i) expected -= std::log(z.row(i).maxCoeff());
        CHECK(ce_smooth(Tensor::constant(z), eye).item() == doctest::Approx(expected).epsilon(1e-14));
        CHECK(ce_smooth(Tensor::constant(z), eye, false).item() == 0.0);
    }
    SUBCASE("random graphs") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            SmallGraph g(12 + 3 * seed, 20 + seed);
            const Matrix z = oracle::random_distributions(static_cast<Eigen::Index>(g.n), 4, 30 + seed);
            for (bool diag : {true, false}) {
                const double v = ce_smooth(Tensor::constant(z), g.a_hat, diag).item();
                CHECK(v == doctest::Approx(oracle::ce_smooth_loops(z, g.dense, diag)).epsilon(1e-12));
                CHECK(v >= 0.0);
            }
        }
    }
    SUBCASE("saturated identical rows give zero") {
        SmallGraph g(8, 40);
        Matrix z = Matrix::Zero(8, 3);
        z.col(1).setOnes();
        CHECK(ce_smooth(Tensor::constant(z), g.a_hat).item() == 0.0);
    }
}

TEST_CASE("combined_loss") {
    SmallGraph g(16, 50);
    const Matrix z = oracle::random_distributions(16, 3, 51);
    std::vector<int> labels(16);
    for (int i = 0; i < 16; ++i) labels[i] = i % 3;
    const Matrix y = one_hot(labels, 3);
    const auto labeled = first_k(6);
    const Tensor zt = Tensor::constant(z);

    LossConfig cfg;
    cfg.mu = 0.0;
    CHECK(combined_loss(zt, y, labeled, g.a_hat, cfg).item() == ce_fit(zt, y, labeled).item());
    cfg.variant = SmoothVariant::l2;
    CHECK(combined_loss(zt, y, labeled, g.a_hat, cfg).item() == l2_fit(zt, y, labeled).item());

    // Normalized objective with mu = 1 by explicit loops.
    cfg.mu = 1.0;
    double expected = oracle::l2_smooth_loops(z, g.dense);
    for (NodeId i : labeled) expected += (z.row(i) - y.row(i)).squaredNorm();
    CHECK(combined_loss(zt, y, labeled, g.a_hat, cfg).item() == doctest::Approx(expected).epsilon(1e-12));

    // Strictly increasing and continuous in mu.
    cfg.variant = SmoothVariant::cross_entropy;
    double prev = -1.0;
    for (double mu : {0.0, 0.1, 0.5, 1.0, 2.0}) {
        cfg.mu = mu;
        const double v = combined_loss(zt, y, labeled, g.a_hat, cfg).item();
        CHECK(v > prev);
        prev = v;
    }
    cfg.mu = 1.0;
    const double at1 = combined_loss(zt, y, labeled, g.a_hat, cfg).item();
    cfg.mu = 1.0 + 1e-9;
    CHECK(std::abs(combined_loss(zt, y, labeled, g.a_hat, cfg).item() - at1) < 1e-6);

    cfg.mu = -1.0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
}

TEST_CASE("loss gradients pass finite differences with phi frozen") {
    SmallGraph g(10, 60);
    const Matrix logits = oracle::random_matrix(10, 3, 61, -2, 2);
    std::vector<int> labels(10);
    for (int i = 0; i < 10; ++i) labels[i] = (i * 7) % 3;
    const Matrix y = one_hot(labels, 3);
    const auto labeled = first_k(4);
    const Matrix targets = one_hot_argmax(oracle::softmax_rows(logits));
    const double tol = 1e-4;

    auto through_softmax = [&](auto&& loss) {
        return [&, loss](const Tensor& t) { return loss(softmax_predictions(t)); };
    };
    CHECK(ad::finite_difference_check(through_softmax([&](const Tensor& z) { return ce_fit(z, y, labeled); }), logits) < tol);
    CHECK(ad::finite_difference_check(through_softmax([&](const Tensor& z) { return l2_fit(z, y, labeled); }), logits) < tol);
    CHECK(ad::finite_difference_check(through_softmax([&](const Tensor& z) { return l2_smooth(z, g.a_hat); }), logits) < tol);
    CHECK(ad::finite_difference_check(through_softmax([&](const Tensor& z) { return ce_smooth_with_targets(z, targets, g.a_hat); }), logits) < tol);
    CHECK(ad::finite_difference_check(through_softmax([&](const Tensor& z) { return ce_smooth_with_targets(z, targets, g.a_hat, false); }), logits) < tol);
    CHECK(ad::finite_difference_check(through_softmax([&](const Tensor& z) { return normalized_l2_objective(z, y, g.a_hat, 0.7); }), logits) < tol);
    for (SmoothVariant v : {SmoothVariant::l2, SmoothVariant::cross_entropy}) {
        LossConfig cfg;
        cfg.variant = v;
        cfg.mu = 0.8;
        // For the cross-entropy variant φ is recomputed inside but is locally
        // constant, since small perturbations do not change any argmax here.
        CHECK(ad::finite_difference_check(through_softmax([&](const Tensor& z) { return combined_loss(z, y, labeled, g.a_hat, cfg); }), logits) < tol);
    }

    // ce_smooth on random z directly (no softmax in front).
    const Matrix z = oracle::random_distributions(10, 3, 62);
    CHECK(ad::finite_difference_check([&](const Tensor& t) { return ce_smooth(t, g.a_hat); }, z) < tol);
}

TEST_CASE("normalized smoothness equals its edge form") {
    SmallGraph g(14, 70);
    const Matrix z = oracle::random_matrix(14, 3, 71);
    Matrix a = oracle::dense_adjacency(g.edges, g.n);
    a.diagonal().setOnes();
    const Eigen::VectorXd d = a.rowwise().sum();
    double edge_form = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (a(i, j) == 0.0) continue;
            edge_form += 0.5 * a(i, j) * (z.row(i) / std::sqrt(d(i)) - z.row(j) / std::sqrt(d(j))).squaredNorm();
        }
    }
    CHECK(normalized_l2_smooth(Tensor::constant(z), g.a_hat).item() == doctest::Approx(edge_form).epsilon(1e-12));
}
