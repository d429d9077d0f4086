#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "galerkin.hpp"
#include "oracles.hpp"

using namespace ttasgfem;
using namespace ttasgfem::galerkin;

namespace {

lognormal::CoeffTT small_coeff(int L, const std::vector<int>& q, Index smax = 20) {
    lognormal::FieldSpec s;
    s.L = L;
    s.quad_cells = 10;
    s.quad_order = 3;
    return lognormal::split_coefficient(s, q, smax);
}

const fem::ScalarField one = [](double, double) { return 1.0; };

} // namespace

TEST_CASE("operator matches brute-force stochastic Galerkin assembly") {
    const auto mesh = fem::initial_mesh(4);
    for (const auto& degrees : {std::vector<int>{2, 2}, std::vector<int>{3, 1}, std::vector<int>{2}}) {
        const auto c = small_coeff(3, {5, 3, 3});
        const auto op = assemble_operator(c, mesh, degrees);
        const Matrix A = oracle::op_dense(op);
        const Matrix ref = oracle::galerkin_dense(c, mesh, degrees);
        CHECK((A - ref).norm() <= 1e-10 * ref.norm());
        CHECK((A - A.transpose()).norm() <= 1e-12 * A.norm());
    }
}

TEST_CASE("assembly preconditions") {
    const auto mesh = fem::initial_mesh(2);
    const auto c = small_coeff(2, {3, 3});
    CHECK_THROWS_AS(assemble_operator(c, mesh, {3, 2}), DimensionError); // q_1 = 3 < 2*3-1
    CHECK_THROWS_AS(assemble_operator(c, mesh, {2, 2, 2}), DimensionError);
    CHECK_NOTHROW(assemble_operator(c, mesh, {2, 2}));
}

TEST_CASE("right-hand side and mean preconditioner") {
    const auto mesh = fem::initial_mesh(4);
    const auto c = small_coeff(2, {3, 3});
    const auto F = assemble_rhs(mesh, one, {2, 2});
    CHECK(F.max_rank() == 1);
    CHECK((F.to_dense() - oracle::rhs_dense(mesh, {2, 2})).norm() < 1e-15);
    const auto P = mean_preconditioner(c, mesh);
    // mean stiffness equals the expectation of the stiffness, i.e. the
    // (0,0) stochastic block of the Galerkin matrix
    const Matrix A = oracle::galerkin_dense(c, mesh, {2, 2});
    const Index N = mesh.n_free();
    CHECK((Matrix(P.matrix()) - A.topLeftCorner(N, N)).norm() <= 1e-10 * A.norm());
    const Matrix b = Matrix::Random(N, 2);
    CHECK((P.matrix() * P.solve(b) - b).norm() < 1e-10 * b.norm());
}

TEST_CASE("ALS at full rank reproduces the dense Galerkin solution") {
    const auto mesh = fem::initial_mesh(6); // 25 free vertices
    const std::vector<int> degrees{2, 2};
    const auto c = small_coeff(3, {3, 3, 3});
    const auto p = build_problem(c, mesh, degrees, one);
    CHECK(mesh.n_free() == 25);
    const Matrix A = oracle::galerkin_dense(c, mesh, degrees);
    const Vector F = oracle::rhs_dense(mesh, degrees);
    const Vector u = A.llt().solve(F);

    AlsOptions opts;
    opts.tol = 1e-12;
    opts.max_sweeps = 100;
    std::ostringstream trace;
    opts.trace = &trace;
    const auto w0 = random_start(p.dims(), 4, 7);
    const auto res = als_solve(p, w0, opts);
    CHECK(res.converged);
    CHECK((res.w.to_dense() - u).norm() <= 1e-8 * u.norm());
    REQUIRE(res.energies.size() > 2);
    for (std::size_t k = 1; k < res.energies.size(); ++k)
        CHECK(res.energies[k] <= res.energies[k - 1] + 1e-12 * std::abs(res.energies[k - 1]));
    CHECK(energy(p, res.w) == doctest::Approx(0.5 * u.dot(A * u) - F.dot(u)).epsilon(1e-10));
    CHECK(trace.str().find("sweep,core,size,energy,update") != std::string::npos);

    // the iterative local solver reaches the same solution
    AlsOptions cg = opts;
    cg.trace = nullptr;
    cg.dense_threshold = 0;
    cg.cg_rel_tol = 1e-12;
    const auto res_cg = als_solve(p, w0, cg);
    CHECK((res_cg.w.to_dense() - u).norm() <= 1e-7 * u.norm());
}

TEST_CASE("low-rank ALS lowers the energy below the starting value") {
    const auto mesh = fem::initial_mesh(5);
    const std::vector<int> degrees{3, 2, 2};
    const auto c = small_coeff(4, {5, 3, 3, 3});
    const auto p = build_problem(c, mesh, degrees, one);
    const auto w0 = random_start(p.dims(), 2, 1);
    AlsOptions o;
    o.max_sweeps = 10;
    const auto r = als_solve(p, w0, o);
    CHECK(r.w.max_rank() <= 2);
    CHECK(energy(p, r.w) < energy(p, w0));
    CHECK(r.sweeps >= 1);
    CHECK_THROWS_AS(als_solve(p, random_start({3, 3, 2, 2}, 2, 1), o), DimensionError);
}

TEST_CASE("random start") {
    const auto w = random_start({9, 3, 2}, 5, 3);
    CHECK(w.ranks() == std::vector<Index>{1, 5, 2, 1});
    CHECK(tt::norm(w) == doctest::Approx(1.0));
    const auto w2 = random_start({9, 3, 2}, 5, 3);
    CHECK((w.to_dense() - w2.to_dense()).norm() == 0.0);
}
