#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "ttcore.hpp"

using namespace ttasgfem;
using namespace ttasgfem::tt;

namespace {

std::vector<Index> V(std::initializer_list<Index> l) { return l; }

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

TTOperator random_operator(const std::vector<Index>& rows, const std::vector<Index>& cols,
                           const std::vector<Index>& ranks, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    std::vector<OpCore> cores;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        OpCore c(ranks[k], rows[k], cols[k], ranks[k + 1]);
        for (Index a = 0; a < ranks[k]; ++a)
            for (Index i = 0; i < rows[k]; ++i)
                for (Index j = 0; j < cols[k]; ++j)
                    for (Index b = 0; b < ranks[k + 1]; ++b) c(a, i, j, b) = n(rng);
        cores.push_back(std::move(c));
    }
    return TTOperator(std::move(cores));
}

} // namespace

TEST_CASE("eval and to_dense agree with explicit slice products") {
    std::mt19937_64 rng(3);
    const auto dims = V({5, 4, 6, 3});
    const auto x = TTTensor::random(dims, V({1, 3, 4, 2, 1}), rng);
    const Vector ref = oracle::tt_dense(x);
    CHECK(rel(x.to_dense(), ref) < 1e-13);
    CHECK(x.full_size() == 360);
    std::uniform_int_distribution<int> u(0, 1000);
    for (int s = 0; s < 50; ++s) {
        std::vector<Index> idx{u(rng) % 5, u(rng) % 4, u(rng) % 6, u(rng) % 3};
        const Index lin = idx[0] + 5 * (idx[1] + 4 * (idx[2] + 6 * idx[3]));
        CHECK(x.eval(idx) == doctest::Approx(ref(lin)).epsilon(1e-13));
    }
    CHECK_THROWS_AS((void)x.eval(V({5, 0, 0, 0})), DimensionError);
}

TEST_CASE("rank one tensors") {
    Vector u(3), v(2);
    u << 1, 2, 3;
    v << -1, 4;
    const auto x = TTTensor::rank_one({u, v});
    CHECK(x.eval(V({2, 1})) == doctest::Approx(12.0));
    CHECK(x.ranks() == V({1, 1, 1}));
    Vector e0 = Vector::Zero(3), e1 = Vector::Zero(3);
    e0(0) = 1;
    e1(1) = 1;
    CHECK(dot(TTTensor::rank_one({e0, e0}), TTTensor::rank_one({e0, e0})) == 1.0);
    CHECK(dot(TTTensor::rank_one({e0, e0}), TTTensor::rank_one({e1, e0})) == 0.0);
}

TEST_CASE("linear algebra matches dense oracle") {
    std::mt19937_64 rng(11);
    const auto dims = V({7, 3, 5, 4});
    const auto x = TTTensor::random(dims, V({1, 3, 2, 4, 1}), rng);
    const auto y = TTTensor::random(dims, V({1, 2, 5, 3, 1}), rng);
    const Vector dx = oracle::tt_dense(x), dy = oracle::tt_dense(y);
    CHECK(rel(oracle::tt_dense(add(x, y)), dx + dy) < 1e-11);
    CHECK(add(x, y).ranks() == V({1, 5, 7, 7, 1}));
    CHECK(rel(oracle::tt_dense(subtract(x, y)), dx - dy) < 1e-11);
    CHECK(rel(oracle::tt_dense(scale(x, -2.5)), -2.5 * dx) < 1e-11);
    CHECK(dot(x, y) == doctest::Approx(dx.dot(dy)).epsilon(1e-11));
    CHECK(norm(x) == doctest::Approx(dx.norm()).epsilon(1e-11));
    CHECK(norm(subtract(x, x)) <= 1e-12 * dx.norm());
    CHECK(norm(add(x, scale(x, -1.0))) <= 1e-12 * dx.norm());
    const auto z = TTTensor::random(V({7, 3, 5, 5}), V({1, 2, 2, 2, 1}), rng);
    CHECK_THROWS_AS(add(x, z), DimensionError);
    CHECK_THROWS_AS((void)dot(x, z), DimensionError);
}

TEST_CASE("orthogonalisation keeps the tensor and orthonormalises cores") {
    std::mt19937_64 rng(5);
    const auto x = TTTensor::random(V({4, 5, 3, 6}), V({1, 4, 3, 3, 1}), rng);
    const Vector dx = oracle::tt_dense(x);
    const auto r = right_orthogonalize(x);
    CHECK(rel(oracle::tt_dense(r), dx) < 1e-12);
    for (std::size_t k = 1; k < r.order(); ++k) {
        const auto R = r.core(k).right_unfolding();
        CHECK((R * R.transpose() - Matrix::Identity(R.rows(), R.rows())).norm() < 1e-12);
    }
    CHECK(Eigen::Map<const Vector>(r.core(0).data().data(), r.core(0).size()).norm() ==
          doctest::Approx(dx.norm()).epsilon(1e-12));
    const auto l = left_orthogonalize(x);
    CHECK(rel(oracle::tt_dense(l), dx) < 1e-12);
    for (std::size_t k = 0; k + 1 < l.order(); ++k) {
        const auto Lm = l.core(k).left_unfolding();
        CHECK((Lm.transpose() * Lm - Matrix::Identity(Lm.cols(), Lm.cols())).norm() < 1e-12);
    }
}

TEST_CASE("rounding") {
    std::mt19937_64 rng(7);
    SUBCASE("tol 0 keeps the tensor") {
        const auto x = TTTensor::random(V({4, 5, 3, 6}), V({1, 4, 3, 3, 1}), rng);
        CHECK(rel(oracle::tt_dense(round(x, 0.0)), oracle::tt_dense(x)) < 1e-13);
    }
    SUBCASE("exact rank one collapses") {
        Vector u = Vector::LinSpaced(6, 1.0, 2.0), v = Vector::LinSpaced(5, -1.0, 3.0), w = Vector::LinSpaced(4, 0.5, 0.8);
        const auto x1 = TTTensor::rank_one({u, v, w});
        const auto noise = TTTensor::random(V({6, 5, 4}), V({1, 2, 2, 1}), rng);
        const auto x = add(x1, scale(noise, 0.0));
        CHECK(x.max_rank() == 3);
        const auto r = round(x, 1e-12);
        CHECK(r.max_rank() == 1);
        CHECK(norm(subtract(r, x1)) <= 1e-12 * norm(x1));
    }
    SUBCASE("full-rank HSVD of a dense tensor is exact") {
        std::normal_distribution<double> n;
        Vector d(2 * 3 * 4 * 3);
        for (auto& v : d) v = n(rng);
        const auto x = TTTensor::from_dense(d, V({2, 3, 4, 3}));
        CHECK(rel(oracle::tt_dense(x), d) < 1e-12);
    }
    SUBCASE("truncation error bound and rank cap") {
        // Sum of rank-one terms with geometrically decaying weights.
        auto x = TTTensor::rank_one({Vector::Random(6), Vector::Random(5), Vector::Random(7), Vector::Random(4)});
        for (int k = 1; k < 8; ++k) {
            auto t = TTTensor::rank_one({Vector::Random(6), Vector::Random(5), Vector::Random(7), Vector::Random(4)});
            x = add(x, scale(t, std::pow(10.0, -k)));
        }
        for (double tol : {1e-4, 1e-8}) {
            const auto r = round(x, tol);
            CHECK(norm(subtract(x, r)) <= tol * norm(x) * std::sqrt(4.0));
            if (tol > 1e-6) CHECK(r.max_rank() < x.max_rank()); // drops the terms below 1e-4
        }
        CHECK(round(x, 0.0, 2).max_rank() <= 2);
    }
}

TEST_CASE("mask_hadamard") {
    std::mt19937_64 rng(13);
    const auto x = TTTensor::random(V({4, 3}), V({1, 3, 1}), rng);
    const auto m = mask_hadamard(x, {{1, 1, 0, 0}, {}});
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 3; ++j) CHECK(m.eval(V({i, j})) == (i < 2 ? x.eval(V({i, j})) : 0.0));
    CHECK(m.ranks() == x.ranks());
    CHECK(norm(mask_hadamard(x, {{0, 0, 0, 0}, {1, 1, 1}})) == 0.0);
    CHECK(rel(mask_hadamard(x, {{}, {}}).to_dense(), x.to_dense()) == 0.0);
    const auto w = mask_hadamard(x, {{0.5, 2, 0, 1}, {1, 0, 3}});
    const std::vector<double> w0{0.5, 2, 0, 1}, w1{1, 0, 3};
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 3; ++j)
            CHECK(w.eval(V({i, j})) == doctest::Approx(w0[i] * w1[j] * x.eval(V({i, j}))));
}

TEST_CASE("degrees of freedom") {
    CHECK(tt_dofs(V({10}), V({1, 1})) == 10);
    CHECK(tt_dofs(V({10, 4, 4}), V({1, 2, 2, 1})) == 40);
    CHECK(op_dofs(V({10, 4}), V({1, 2, 1})) == 228);
    std::mt19937_64 rng(1);
    const auto x = TTTensor::random(V({10, 4, 4}), V({1, 2, 2, 1}), rng);
    CHECK(tt_dofs(x) == 40);
}

TEST_CASE("operators") {
    std::mt19937_64 rng(17);
    SUBCASE("identity") {
        const auto x = TTTensor::random(V({3, 4, 2}), V({1, 2, 2, 1}), rng);
        const auto y = mpo_apply(TTOperator::identity(V({3, 4, 2})), x);
        CHECK(rel(y.to_dense(), x.to_dense()) < 1e-15);
    }
    SUBCASE("kronecker action") {
        const Matrix B0 = random_matrix(3, 4, rng), B1 = random_matrix(2, 5, rng);
        const Vector u = Vector::Random(4), v = Vector::Random(5);
        const auto y = mpo_apply(TTOperator::rank_one({B0, B1}), TTTensor::rank_one({u, v}));
        const auto ref = TTTensor::rank_one({B0 * u, B1 * v});
        CHECK(rel(y.to_dense(), ref.to_dense()) < 1e-13);
    }
    SUBCASE("random operator against dense matvec") {
        const auto rows = V({5, 3, 4}), cols = V({4, 3, 2});
        const auto A = random_operator(rows, cols, V({1, 3, 2, 1}), rng);
        const auto x = TTTensor::random(cols, V({1, 2, 3, 1}), rng);
        const Matrix Ad = oracle::op_dense(A);
        CHECK((A.to_dense() - Ad).norm() <= 1e-13 * Ad.norm());
        const auto y = mpo_apply(A, x);
        CHECK(y.ranks() == V({1, 6, 6, 1}));
        CHECK(rel(oracle::tt_dense(y), Ad * oracle::tt_dense(x)) < 1e-11);
        CHECK(op_dofs(A) == op_dofs(rows, A.ranks()));
        const auto bad = TTTensor::random(rows, V({1, 2, 2, 1}), rng);
        CHECK_THROWS_AS(mpo_apply(A, bad), DimensionError);
    }
    SUBCASE("sparse bank first core") {
        std::vector<SparseMatrix> bank;
        for (int a = 0; a < 2; ++a) bank.push_back(random_matrix(4, 4, rng).sparseView());
        OpCore c0(1, 2, bank);
        OpCore c1(2, 3, 3, 1);
        for (Index a = 0; a < 2; ++a)
            for (Index i = 0; i < 3; ++i)
                for (Index j = 0; j < 3; ++j) c1(a, i, j, 0) = static_cast<double>(a + i * j + 1);
        const TTOperator A({c0, c1});
        const Matrix Ad = oracle::op_dense(A);
        CHECK(Ad.rows() == 12);
        const auto x = TTTensor::random(V({4, 3}), V({1, 2, 1}), rng);
        CHECK(rel(mpo_apply(A, x).to_dense(), Ad * x.to_dense()) < 1e-12);
    }
}

TEST_CASE("serialisation round trips") {
    std::mt19937_64 rng(23);
    const auto x = TTTensor::random(V({3, 4, 2}), V({1, 2, 2, 1}), rng);
    const auto j = tensor_from_json(to_json(x));
    CHECK(j.ranks() == x.ranks());
    CHECK(rel(j.to_dense(), x.to_dense()) == 0.0);
    std::stringstream ss;
    write_binary(ss, x);
    const auto b = read_binary(ss);
    CHECK(rel(b.to_dense(), x.to_dense()) == 0.0);
    std::stringstream bad("garbage");
    CHECK_THROWS_AS(read_binary(bad), Error);
    CHECK_THROWS_AS(tensor_from_json("{\"cores\": 3}"), Error);
}
