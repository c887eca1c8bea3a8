#include "oracles.hpp"

#include <gsmooth/autodiff.hpp>
#include <gsmooth/errors.hpp>

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace gsmooth;
using namespace gsmooth::ad;

namespace {

constexpr double kFdTol = 1e-4;

/// sum(t ⊙ R) for a fixed random R, so every output entry gets a distinct weight.
Tensor weighted_sum(const Tensor& t, std::uint64_t seed) {
    return sum(elementwise_mul(t, Tensor::constant(oracle::random_matrix(t.rows(), t.cols(), seed))));
}

Matrix away_from_zero(Matrix m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (std::abs(m.data()[i]) < 0.05) m.data()[i] = 0.3;
    }
    return m;
}

} // namespace

TEST_CASE("forward values of primitives") {
    Matrix m(1, 2);
    m << -1, 2;
    const Matrix r = relu(Tensor::constant(m)).value();
    CHECK(r(0, 0) == 0.0);
    CHECK(r(0, 1) == 2.0);
    CHECK_FALSE(std::signbit(r(0, 0)));

    const Matrix s = row_softmax(Tensor::constant(Matrix::Zero(1, 2))).value();
    CHECK(s(0, 0) == doctest::Approx(0.5));
    CHECK(s(0, 1) == doctest::Approx(0.5));

    const Matrix lr = leaky_relu(Tensor::constant(m), 0.2).value();
    CHECK(lr(0, 0) == doctest::Approx(-0.2));

    Matrix z(1, 2);
    z << 0.0, 1.0;
    const Matrix lc = log_clamped(Tensor::constant(z)).value();
    CHECK(lc(0, 0) == doctest::Approx(std::log(1e-12)));
    CHECK(lc(0, 1) == 0.0);

    const Matrix cat = concat_cols(Tensor::constant(Matrix::Ones(2, 1)), Tensor::constant(Matrix::Zero(2, 3))).value();
    CHECK(cat.cols() == 4);
    CHECK(cat(1, 0) == 1.0);

    Matrix b(1, 2);
    b << 10, 20;
    const Matrix added = add(Tensor::constant(Matrix::Ones(3, 2)), Tensor::constant(b)).value();
    CHECK(added(2, 1) == 21.0);
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
    const Matrix x = oracle::random_matrix(50, 7, 4, -30.0, 30.0);
    const Matrix s = row_softmax(Tensor::constant(x)).value();
    for (Eigen::Index i = 0; i < s.rows(); ++i) CHECK(std::abs(s.row(i).sum() - 1.0) < 1e-10);
    const Matrix shifted = row_softmax(Tensor::constant((x.array() + 123.0).matrix())).value();
    CHECK((s - shifted).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s - oracle::softmax_rows(x)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("dropout") {
    const Tensor x = Tensor::constant(oracle::random_matrix(20, 30, 1));
    CHECK(dropout(x, 0.0, true, 7).value() == x.value());
    CHECK(dropout(x, 0.5, false, 7).value() == x.value());

    const Matrix a = dropout(x, 0.5, true, 7).value();
    const Matrix b = dropout(x, 0.5, true, 7).value();
    CHECK(a == b);
    CHECK(a != dropout(x, 0.5, true, 8).value());
    std::size_t kept = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a.data()[i] != 0.0) {
            ++kept;
            CHECK(a.data()[i] == doctest::Approx(2.0 * x.value().data()[i]));
        }
    }
    CHECK(kept > 200);
    CHECK(kept < 400);
    CHECK_THROWS_AS(dropout(x, 1.0, true, 0), InputError);
    CHECK_THROWS_AS(dropout(x, -0.1, true, 0), InputError);
}

TEST_CASE("backward on simple graphs") {
    Tensor w = Tensor::parameter(oracle::random_matrix(2, 2, 3));
    backward(sum(w));
    CHECK(w.grad() == Matrix::Ones(2, 2));

    w.zero_grad();
    backward(sum(elementwise_mul(w, w)));
    CHECK((w.grad() - 2.0 * w.value()).cwiseAbs().maxCoeff() < 1e-15);

    // Grads from several uses of one tensor add up.
    w.zero_grad();
    backward(add(sum(w), sum(scale(w, 3.0))));
    CHECK(w.grad() == Matrix::Constant(2, 2, 4.0));

    CHECK_THROWS_AS(backward(w), InputError);
}

TEST_CASE("shape and numeric errors") {
    const Tensor a = Tensor::constant(Matrix::Ones(2, 3));
    const Tensor b = Tensor::constant(Matrix::Ones(2, 3));
    CHECK_THROWS_AS(matmul(a, b), InputError);
    CHECK_THROWS_AS(add(a, Tensor::constant(Matrix::Ones(3, 3))), InputError);
    CHECK_THROWS_AS(elementwise_mul(a, Tensor::constant(Matrix::Ones(3, 2))), InputError);
    CHECK_THROWS_AS(concat_cols(a, Tensor::constant(Matrix::Ones(3, 1))), InputError);
    try {
        scale(a, std::numeric_limits<double>::quiet_NaN());
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("scale") != std::string::npos);
    }
}

TEST_CASE("finite_difference_check of sum is exact") {
    const double err = finite_difference_check([](const Tensor& x) { return sum(x); }, oracle::random_matrix(4, 3, 2));
    CHECK(err < 1e-10);
}

TEST_CASE("every primitive passes a finite-difference check on 5x7 inputs") {
    const Matrix x = away_from_zero(oracle::random_matrix(5, 7, 21));
    const Matrix positive = oracle::random_matrix(5, 7, 22, 0.1, 2.0);
    const Tensor other = Tensor::constant(oracle::random_matrix(5, 7, 23));
    const Tensor right = Tensor::constant(oracle::random_matrix(7, 4, 24));
    const Tensor row = Tensor::constant(oracle::random_matrix(1, 7, 25));

    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(matmul(t, right), 1); }, x) < kFdTol);
    const Tensor left = Tensor::constant(oracle::random_matrix(3, 5, 26));
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(matmul(left, t), 2); }, x) < kFdTol);
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(add(t, other), 3); }, x) < kFdTol);
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(add(other, t), 4); },
                                  oracle::random_matrix(1, 7, 5)) < kFdTol);  // broadcast row
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(add(t, row), 5); }, x) < kFdTol);
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(sub(other, t), 6); }, x) < kFdTol);
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(scale(t, -2.5), 7); }, x) < kFdTol);
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(elementwise_mul(t, other), 8); }, x) < kFdTol);
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(row_softmax(t), 9); }, x) < kFdTol);
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(log_clamped(t), 10); }, positive) < kFdTol);
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(relu(t), 11); }, x) < kFdTol);
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(leaky_relu(t, 0.2), 12); }, x) < kFdTol);
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(concat_cols(t, other), 13); }, x) < kFdTol);
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(concat_cols(other, t), 14); }, x) < kFdTol);
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(dropout(t, 0.4, true, 99), 15); }, x) < kFdTol);
}

TEST_CASE("composite graph passes a finite-difference check") {
    const Tensor w2 = Tensor::constant(oracle::random_matrix(4, 3, 31));
    auto f = [&](const Tensor& w1) {
        const Tensor x = Tensor::constant(oracle::random_matrix(6, 5, 30));
        const Tensor h = leaky_relu(matmul(x, w1), 0.1);
        const Tensor z = row_softmax(matmul(h, w2));
        return scale(sum(elementwise_mul(log_clamped(z), z)), -1.0);
    };
    CHECK(finite_difference_check(f, oracle::random_matrix(5, 4, 32)) < kFdTol);
}

TEST_CASE("backward is linear") {
    const Matrix w0 = oracle::random_matrix(4, 3, 40);
    const Tensor x = Tensor::constant(oracle::random_matrix(5, 4, 41));
    auto f = [&](const Tensor& w) { return sum(row_softmax(matmul(x, w))); };
    auto g = [&](const Tensor& w) { return sum(elementwise_mul(relu(matmul(x, w)), matmul(x, w))); };

    auto grad_of = [&](auto&& fn) {
        Tensor w = Tensor::parameter(w0);
        backward(fn(w));
        return w.grad();
    };
    const double a = 1.7, b = -0.3;
    const Matrix combined = grad_of([&](const Tensor& w) { return add(scale(f(w), a), scale(g(w), b)); });
    const Matrix separate = a * grad_of(f) + b * grad_of(g);
    CHECK((combined - separate).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("spmm against the dense product and its gradient") {
    const std::size_t n = 40;
    const auto edges = oracle::random_edges(n, 3.0, 50);
    const NormalizedAdjacency a_hat = sym_normalize(add_self_loops(from_edge_list(edges, n)));
    const Matrix dense = a_hat.to_dense();
    const Matrix b = oracle::random_matrix(static_cast<Eigen::Index>(n), 5, 51);
    CHECK((spmm(a_hat, Tensor::constant(b)).value() - dense * b).cwiseAbs().maxCoeff() < 1e-12);

    Tensor p = Tensor::parameter(b);
    backward(sum(spmm(a_hat, p)));
    const Matrix expected = dense.transpose() * Matrix::Ones(static_cast<Eigen::Index>(n), 5);
    CHECK((p.grad() - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(spmm(a_hat, t), 52); }, b) < kFdTol);

    const NormalizedAdjacency eye = sym_normalize(add_self_loops(from_edge_list({}, 4)));
    const Matrix small = oracle::random_matrix(4, 2, 53);
    CHECK(spmm(eye, Tensor::constant(small)).value() == small);
    CHECK_THROWS_AS(spmm(eye, Tensor::constant(b)), InputError);
}

TEST_CASE("sparse_matmul matches dense and has the right gradient") {
    Matrix xd = oracle::random_matrix(8, 6, 60);
    for (Eigen::Index i = 0; i < xd.size(); ++i) {
        if (i % 3) xd.data()[i] = 0.0;
    }
    auto xs = std::make_shared<SparseMatrix>(xd.sparseView());
    const Matrix w = oracle::random_matrix(6, 3, 61);
    CHECK((sparse_matmul(xs, Tensor::constant(w)).value() - xd * w).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(sparse_matmul(xs, t), 62); }, w) < kFdTol);
}

TEST_CASE("graph attention") {
    const std::size_t n = 15;
    const Graph pattern = add_self_loops(from_edge_list(oracle::random_edges(n, 3.0, 70), n));
    const Matrix wh = oracle::random_matrix(static_cast<Eigen::Index>(n), 4, 71);
    const Matrix attn = oracle::random_matrix(8, 1, 72);

    SUBCASE("coefficients sum to one per row") {
        const auto alpha = attention_coefficients(pattern, wh, attn, 0.2);
        const auto& csr = pattern.storage();
        for (std::size_t v = 0; v < n; ++v) {
            double s = 0.0;
            for (std::size_t k = csr.row_offsets[v]; k < csr.row_offsets[v + 1]; ++k) {
                CHECK(alpha[k] > 0.0);
                s += alpha[k];
            }
            CHECK(std::abs(s - 1.0) < 1e-10);
        }
    }
    SUBCASE("matches a dense loop oracle") {
        const Matrix out = graph_attention(pattern, Tensor::constant(wh), Tensor::constant(attn), 0.2).value();
        const Matrix adj = pattern.to_dense();
        for (Eigen::Index v = 0; v < static_cast<Eigen::Index>(n); ++v) {
            std::vector<double> e;
            std::vector<Eigen::Index> nb;
            for (Eigen::Index u = 0; u < adj.cols(); ++u) {
                if (adj(v, u) == 0.0) continue;
                const double s = attn.topRows(4).col(0).dot(wh.row(v).transpose()) +
                                 attn.bottomRows(4).col(0).dot(wh.row(u).transpose());
                e.push_back(s > 0 ? s : 0.2 * s);
                nb.push_back(u);
            }
            const double mx = *std::max_element(e.begin(), e.end());
            double z = 0.0;
            for (double& x : e) z += (x = std::exp(x - mx));
            Eigen::RowVectorXd expected = Eigen::RowVectorXd::Zero(4);
            for (std::size_t k = 0; k < nb.size(); ++k) expected += (e[k] / z) * wh.row(nb[k]);
            CHECK((out.row(v) - expected).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
    SUBCASE("zero attention vector averages neighbours") {
        const Matrix out = graph_attention(pattern, Tensor::constant(wh), Tensor::constant(Matrix::Zero(8, 1)), 0.2).value();
        for (NodeId v = 0; v < n; ++v) {
            Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(4);
            for (NodeId u : pattern.neighbors(v)) mean += wh.row(u);
            mean /= static_cast<double>(pattern.neighbors(v).size());
            CHECK((out.row(v) - mean).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
    SUBCASE("gradients") {
        const Tensor attn_c = Tensor::constant(attn);
        const Tensor wh_c = Tensor::constant(wh);
        CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(graph_attention(pattern, t, attn_c, 0.2), 73); }, wh) < kFdTol);
        CHECK(finite_difference_check([&](const Tensor& t) { return weighted_sum(graph_attention(pattern, wh_c, t, 0.2), 74); }, attn) < kFdTol);
    }
}

TEST_CASE("tape order is topological") {
    const Tensor w = Tensor::parameter(oracle::random_matrix(3, 3, 80));
    const Tensor h = relu(w);
    const Tensor loss = sum(add(h, scale(h, 2.0)));
    const Tape tape = Tape::record(loss);
    CHECK(tape.order().front() == loss.node().get());
    auto pos = [&](const detail::Node* n) {
        return std::find(tape.order().begin(), tape.order().end(), n) - tape.order().begin();
    };
    CHECK(pos(h.node().get()) > pos(loss.node().get()));
    CHECK(pos(w.node().get()) > pos(h.node().get()));
    CHECK(tape.size() == 5);
}
