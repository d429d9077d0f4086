#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "bench.hpp"
#include "oracles.hpp"

using namespace ttasgfem;
using namespace ttasgfem::bench;

TEST_CASE("config parsing") {
    const auto cfg = parse_config(
        "# comment line\n"
        "amp = 0.5\n"
        "  decay=4  \n"
        "\n"
        "max_iterations = 7\n"
        "refine_rule = bisec1\n"
        "seed = 18446744073709551615\n"
        "mc = off\n"
        "coeff_study = 10:5, 20:8\n"
        "f_value = 2\n");
    CHECK(cfg.adapt.field.amp == 0.5);
    CHECK(cfg.adapt.field.decay == 4.0);
    CHECK(cfg.adapt.max_iterations == 7);
    CHECK(cfg.adapt.mark_rule == fem::MarkRule::Bisect1);
    CHECK(cfg.adapt.seed == 18446744073709551615ULL);
    CHECK_FALSE(cfg.mc);
    REQUIRE(cfg.coeff_study.size() == 2);
    CHECK(cfg.coeff_study[1].L == 20);
    CHECK(cfg.coeff_study[1].s_max == 8);
    CHECK(cfg.adapt.f(0.3, 0.7) == 2.0);
    CHECK(parse_config("coeff_study = none\n").coeff_study.empty());

    // defaults
    const auto d = parse_config("");
    CHECK(d.adapt.field.amp == 0.9);
    CHECK(d.adapt.mark_rule == fem::MarkRule::Bisect3);
    CHECK(d.coeff_study.size() == 3);

    CHECK_THROWS_AS(parse_config("unknown_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("amp = 1\namp = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("amp =\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("amp\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("amp = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("max_iterations = 2.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("mc = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("refine_rule = red\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("coeff_study = 10\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("n_mc = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("mark_theta = 2\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/path.cfg"), ConfigError);
    for (const char* k : {"amp", "decay", "seed", "eps", "max_tt_dofs", "n_mc", "coeff_study"})
        CHECK(std::find(config_keys().begin(), config_keys().end(), k) != config_keys().end());
}

TEST_CASE("sampling a TT solution matches the dense expansion") {
    lognormal::FieldSpec s;
    const auto measure = s.measure(3);
    std::mt19937_64 rng(11);
    const auto W = tt::TTTensor::random(std::vector<Index>{7, 3, 2, 4}, std::vector<Index>{1, 3, 2, 2, 1}, rng);
    const Vector dense = W.to_dense();
    const std::vector<double> y{0.4, -1.3, 2.1, 9.9};
    const Vector v = sample_solution(W, measure, y);
    Vector ref = Vector::Zero(7);
    oracle::MultiIndex mu({3, 2, 4});
    do {
        double h = 1.0;
        for (std::size_t m = 0; m < 3; ++m) h *= oracle::hermite_explicit(mu.idx[m], y[m] / measure.sigma(m));
        ref += h * dense.segment(7 * mu.linear(), 7);
    } while (mu.next());
    CHECK((v - ref).norm() <= 1e-13 * ref.norm());
    CHECK_THROWS_AS(sample_solution(W, measure, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("reference solver") {
    lognormal::FieldSpec s;
    s.amp = 0.0;
    const fem::ScalarField one = [](double, double) { return 1.0; };
    ReferenceSolver ref(s, fem::refine_uniform(fem::initial_mesh(4), 6), one);
    const std::vector<double> y(static_cast<std::size_t>(s.M_trunc), 0.7);
    const Vector u = ref.solve(y);
    CHECK(std::abs(u.maxCoeff() - 0.0736713532815) < 2e-4);
    CHECK_THROWS_AS((void)ref.solve(std::vector<double>{1.0}), DimensionError);

    // lognormal sample agrees with direct assembly of the exact coefficient
    lognormal::FieldSpec s2;
    s2.M_trunc = 12;
    const auto mesh = fem::refine(fem::initial_mesh(4), {1, 5});
    ReferenceSolver ref2(s2, mesh, one);
    std::vector<double> y2(12);
    for (std::size_t k = 0; k < y2.size(); ++k) y2[k] = std::sin(1.0 + static_cast<double>(k));
    const auto q = fem::element_quadrature(mesh);
    Matrix aq(mesh.n_triangles(), 3);
    for (Index t = 0; t < mesh.n_triangles(); ++t)
        for (Index j = 0; j < 3; ++j)
            aq(t, j) = lognormal::a_exact(s2, q.x1[static_cast<std::size_t>(3 * t + j)],
                                         q.x2[static_cast<std::size_t>(3 * t + j)], y2, 12);
    Eigen::SimplicialLLT<SparseMatrix> llt(fem::assemble_stiffness(mesh, aq));
    const Vector uref = llt.solve(fem::assemble_load(mesh, one));
    CHECK((ref2.solve(y2) - uref).norm() <= 1e-12 * uref.norm());
}

TEST_CASE("Monte Carlo error of trivial and exact snapshots") {
    lognormal::FieldSpec s;
    s.amp = 0.0;
    s.L = 4;
    s.M_trunc = 4;
    const fem::ScalarField one = [](double, double) { return 1.0; };
    const auto mesh = fem::initial_mesh(4);
    ReferenceSolver ref(s, mesh, one);

    adapt::Snapshot zero{mesh, {2}, tt::TTTensor::rank_one({Vector::Zero(mesh.n_free()), Vector::Zero(2)})};
    // with the Poisson solution in the mean mode, the error vanishes on the same mesh
    Eigen::SimplicialLLT<SparseMatrix> llt(fem::laplace_stiffness(mesh));
    const Vector u = llt.solve(fem::assemble_load(mesh, one));
    Vector e0 = Vector::Zero(2);
    e0(0) = 1.0;
    adapt::Snapshot exact{mesh, {2}, tt::TTTensor::rank_one({u, e0})};
    const auto rep = mc_errors({zero, exact}, ref, s, 5, 42);
    CHECK(rep.rrms[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(rep.rrms[1] < 1e-12);
    CHECK(mc_error(zero, ref, s, 3, 1) == doctest::Approx(1.0));
    CHECK_THROWS_AS(mc_errors({zero}, ref, s, 0, 1), ConfigError);
}

TEST_CASE("CSV output") {
    adapt::IterationRecord r;
    r.iteration = 3;
    r.tag = adapt::Branch::Param;
    r.M = 2;
    r.d_max = 3;
    r.r_max = 4;
    r.m_dofs = 25;
    r.tt_dofs = 300;
    r.op_dofs = 900;
    r.eta_det = 0.5;
    r.eta_param = 0.25;
    r.eta_disc = 0.125;
    r.eta_all = 1.0;
    std::ostringstream os;
    write_convergence_csv(os, {{r, std::nullopt}, {r, 0.0625}}, 7);
    CHECK(os.str() == convergence_header() + "\n" +
                          "3,PARAM,2,3,4,25,300,900,5.0000000000e-01,2.5000000000e-01,1.2500000000e-01,"
                          "1.0000000000e+00,,7\n"
                          "3,PARAM,2,3,4,25,300,900,5.0000000000e-01,2.5000000000e-01,1.2500000000e-01,"
                          "1.0000000000e+00,6.2500000000e-02,7\n");
    CoeffStudyRow c;
    c.L = 10;
    c.q = 3;
    c.s_max = 5;
    c.rank = 5;
    c.rrms = 1e-3;
    c.tt_dofs = 123;
    c.seconds = 0.25;
    std::ostringstream oc;
    write_coefficient_csv(oc, {c}, 9);
    CHECK(oc.str() == coefficient_header() + "\n10,3,5,5,1.0000000000e-03,123,0.250,9\n");
}

TEST_CASE("coefficient study case") {
    lognormal::FieldSpec s;
    s.quad_cells = 10;
    s.quad_order = 3;
    const auto row = run_coefficient_case(s, {4, 3}, 2, 50, 5);
    CHECK(row.L == 4);
    CHECK(row.q == 3);
    CHECK(row.rank <= 3);
    CHECK(row.rrms > 0.0);
    CHECK(row.rrms < 1.0);
    CHECK(row.tt_dofs > 0);
    const auto again = run_coefficient_case(s, {4, 3}, 2, 50, 5);
    CHECK(again.rrms == row.rrms);
}

TEST_CASE("Monte Carlo seed derivation") {
    CHECK(mc_seed(1) == mc_seed(1));
    CHECK(mc_seed(1) != mc_seed(2));
    CHECK(mc_seed(1) != 1);
}
