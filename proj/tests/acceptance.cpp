// Acceptance checks 1 to 11. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails. Tolerances are fixed below.
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "bench.hpp"
#include "oracles.hpp"

using namespace ttasgfem;

namespace {

namespace tol {
constexpr double kappa_abs = 1e-10;
constexpr double kappa_seconds = 5.0;
constexpr double parseval_abs = 1e-10;
constexpr double tt_rel = 1e-11;
constexpr double hsvd_rank_one = 1e-12;
constexpr double coeff_l10_lo = 2.4e-4;
constexpr double coeff_l10_hi = 6.1e-3;
constexpr double coeff_l50_hi = 3e-4;
constexpr double coeff_seconds = 300.0;
constexpr double mpo_rel = 1e-10;
constexpr double als_rel = 1e-8;
constexpr double estimator_rel = 1e-8;
constexpr double disc_scale = 1e-8;
constexpr double mc_reduction = 5.0;
constexpr double adaptive_seconds = 1800.0;
constexpr std::int64_t budget = 20000;
constexpr int budget_iteration_cap = 40;
} // namespace tol

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    std::printf("criterion %2d %s: %s (%s)\n", id, ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

void guarded(int id, const std::string& name, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, name, false, std::string("exception: ") + e.what());
    }
}

const fem::ScalarField one = [](double, double) { return 1.0; };

// Gauss-Hermite rule for the standard normal in extended precision:
// Golub-Welsch start, Newton polishing on the orthonormal recurrence,
// Christoffel weights.
using Real = long double;

std::vector<Real> hermite_column(int n_max, Real x) {
    std::vector<Real> h(static_cast<std::size_t>(n_max) + 1);
    h[0] = 1.0L;
    if (n_max >= 1) h[1] = x;
    for (int k = 1; k < n_max; ++k)
        h[static_cast<std::size_t>(k) + 1] =
            (x * h[static_cast<std::size_t>(k)] - std::sqrt(static_cast<Real>(k)) * h[static_cast<std::size_t>(k) - 1]) /
            std::sqrt(static_cast<Real>(k) + 1.0L);
    return h;
}

void gauss_hermite_rule(int n, std::vector<Real>& x, std::vector<Real>& w) {
    Matrix J = Matrix::Zero(n, n);
    for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Matrix> es(J);
    x.assign(static_cast<std::size_t>(n), 0.0L);
    w.assign(static_cast<std::size_t>(n), 0.0L);
    for (int i = 0; i < n; ++i) {
        Real xi = es.eigenvalues()(i);
        for (int it = 0; it < 8; ++it) {
            const auto h = hermite_column(n, xi);
            // d/dx H_n = sqrt(n) H_{n-1} for the orthonormal family
            xi -= h[static_cast<std::size_t>(n)] / (std::sqrt(static_cast<Real>(n)) * h[static_cast<std::size_t>(n) - 1]);
        }
        const auto h = hermite_column(n - 1, xi);
        Real s = 0.0L;
        for (Real v : h) s += v * v;
        x[static_cast<std::size_t>(i)] = xi;
        w[static_cast<std::size_t>(i)] = 1.0L / s;
    }
}

void criterion1() {
    const auto t0 = Clock::now();
    std::vector<Real> x, w;
    gauss_hermite_rule(30, x, w);
    std::vector<std::vector<Real>> H;
    for (Real xi : x) H.push_back(hermite_column(16, xi));
    double err = 0.0, rel_err = 0.0, kmax = 0.0;
    for (int a = 0; a <= 16; ++a)
        for (int b = 0; b <= 16; ++b)
            for (int c = 0; c <= 16; ++c) {
                Real q = 0.0L;
                for (std::size_t i = 0; i < x.size(); ++i)
                    q += w[i] * H[i][static_cast<std::size_t>(a)] * H[i][static_cast<std::size_t>(b)] *
                         H[i][static_cast<std::size_t>(c)];
                const double k = chaos::triple_product(a, b, c);
                const double e = static_cast<double>(std::abs(static_cast<Real>(k) - q));
                err = std::max(err, e);
                kmax = std::max(kmax, std::abs(k));
                if (k != 0.0) rel_err = std::max(rel_err, e / std::abs(k));
            }
    const double dt = seconds_since(t0);
    report(1, "Hermite triple products vs 30-point Gauss-Hermite", err <= tol::kappa_abs && dt < tol::kappa_seconds,
           fmt("max abs err %.2e, max rel err %.2e, ", err, rel_err) + fmt("max |kappa| %.3e, ", kmax) +
               fmt("%.3f s", dt));
}

void criterion2() {
    double err = 0.0;
    for (double t : {0.1, 0.5, 1.0}) {
        const auto c = chaos::exp_coeffs(t, 40);
        double s = 0.0;
        for (std::size_t n = 0; n <= 40 && n < c.size(); ++n) s += c[n] * c[n];
        err = std::max(err, std::abs(s - std::exp(2.0 * t * t)));
    }
    report(2, "exponential expansion Parseval identity", err <= tol::parseval_abs, fmt("max abs err %.2e", err));
}

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

void criterion3() {
    std::mt19937_64 rng(2024);
    const std::vector<Index> dims{6, 5, 4, 3, 5};
    const auto x = tt::TTTensor::random(dims, std::vector<Index>{1, 3, 4, 3, 2, 1}, rng);
    const auto y = tt::TTTensor::random(dims, std::vector<Index>{1, 2, 2, 4, 3, 1}, rng);
    const Vector xd = oracle::tt_dense(x), yd = oracle::tt_dense(y);
    double err = 0.0;
    err = std::max(err, rel(x.to_dense(), xd));
    err = std::max(err, rel(oracle::tt_dense(tt::add(x, y)), xd + yd));
    err = std::max(err, rel(oracle::tt_dense(tt::subtract(x, y)), xd - yd));
    err = std::max(err, rel(oracle::tt_dense(tt::scale(x, -2.5)), -2.5 * xd));
    err = std::max(err, std::abs(tt::dot(x, y) - xd.dot(yd)) / (xd.norm() * yd.norm()));
    err = std::max(err, std::abs(tt::norm(x) - xd.norm()) / xd.norm());
    err = std::max(err, rel(oracle::tt_dense(tt::left_orthogonalize(x)), xd));
    err = std::max(err, rel(oracle::tt_dense(tt::right_orthogonalize(x)), xd));
    err = std::max(err, rel(oracle::tt_dense(tt::round(tt::add(x, y), 0.0)), xd + yd));
    {
        oracle::MultiIndex mi({6, 5, 4, 3, 5});
        double e = 0.0;
        do {
            std::vector<Index> idx(mi.idx.begin(), mi.idx.end());
            e = std::max(e, std::abs(x.eval(idx) - xd(mi.linear())));
        } while (mi.next());
        err = std::max(err, e / xd.cwiseAbs().maxCoeff());
    }
    {
        std::vector<std::vector<double>> wts;
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (Index n : dims) {
            std::vector<double> v(static_cast<std::size_t>(n));
            for (auto& e : v) e = u(rng);
            wts.push_back(v);
        }
        Vector ref = xd;
        oracle::MultiIndex mi({6, 5, 4, 3, 5});
        do {
            double s = 1.0;
            for (std::size_t k = 0; k < dims.size(); ++k) s *= wts[k][static_cast<std::size_t>(mi.idx[k])];
            ref(mi.linear()) *= s;
        } while (mi.next());
        err = std::max(err, rel(oracle::tt_dense(tt::mask_hadamard(x, wts)), ref));
    }
    {
        const std::vector<Index> rows{4, 3, 5}, cols{5, 4, 3}, ranks{1, 3, 2, 1};
        std::normal_distribution<double> n;
        std::vector<tt::OpCore> cores;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            tt::OpCore c(ranks[k], rows[k], cols[k], ranks[k + 1]);
            for (Index a = 0; a < ranks[k]; ++a)
                for (Index i = 0; i < rows[k]; ++i)
                    for (Index j = 0; j < cols[k]; ++j)
                        for (Index b = 0; b < ranks[k + 1]; ++b) c(a, i, j, b) = n(rng);
            cores.push_back(std::move(c));
        }
        const tt::TTOperator A(std::move(cores));
        const auto v = tt::TTTensor::random(cols, std::vector<Index>{1, 2, 3, 1}, rng);
        err = std::max(err, rel(oracle::tt_dense(tt::mpo_apply(A, v)), oracle::op_dense(A) * oracle::tt_dense(v)));
    }
    // an exactly rank-one tensor stored with redundant ranks
    std::vector<Vector> f;
    for (Index n : dims) f.push_back(Vector::Random(n));
    const auto r1 = tt::TTTensor::rank_one(f);
    const auto r3 = tt::add(tt::add(r1, tt::scale(r1, 2.0)), tt::scale(r1, -0.5));
    const auto h = tt::round(r3, 1e-14);
    const double herr = rel(oracle::tt_dense(h), 2.5 * oracle::tt_dense(r1));
    const bool rank1 = h.max_rank() == 1;
    report(3, "TT operations vs dense oracle and rank-one HSVD",
           err <= tol::tt_rel && rank1 && herr <= tol::hsvd_rank_one,
           fmt("max rel err %.2e, rank-one recovery err %.2e", err, herr) + (rank1 ? ", rank 1" : ", rank > 1"));
}

void criterion4() {
    const bench::ExperimentConfig cfg;
    const auto a = bench::run_coefficient_case(cfg.adapt.field, {10, 10}, 15, cfg.coeff_samples,
                                               bench::mc_seed(cfg.adapt.seed));
    const auto b = bench::run_coefficient_case(cfg.adapt.field, {50, 50}, 15, cfg.coeff_samples,
                                               bench::mc_seed(cfg.adapt.seed));
    const bool ok = a.rrms >= tol::coeff_l10_lo && a.rrms <= tol::coeff_l10_hi && b.rrms <= tol::coeff_l50_hi &&
                    a.seconds < tol::coeff_seconds && b.seconds < tol::coeff_seconds;
    report(4, "coefficient splitting error magnitudes", ok,
           fmt("L=10 s=10 rrms %.3e, ", a.rrms) + fmt("L=50 s=50 rrms %.3e, ", b.rrms) +
               fmt("times %.1f s / %.1f s", a.seconds, b.seconds));
}

lognormal::CoeffTT tiny_coefficient() {
    lognormal::FieldSpec s;
    s.L = 3;
    return lognormal::split_coefficient(s, {3, 3, 3}, 20);
}

void criterion5() {
    const auto mesh = fem::initial_mesh(6);
    const auto c = tiny_coefficient();
    const std::vector<int> degrees{2, 2};
    const Matrix A = oracle::op_dense(galerkin::assemble_operator(c, mesh, degrees));
    const Matrix ref = oracle::galerkin_dense(c, mesh, degrees);
    const double err = (A - ref).norm() / ref.norm();
    report(5, "operator assembly vs brute-force Galerkin matrix", mesh.n_free() <= 25 && err <= tol::mpo_rel,
           fmt("N = %.0f, rel err %.2e", static_cast<double>(mesh.n_free()), err));
}

void criterion6() {
    const auto mesh = fem::initial_mesh(6);
    const auto c = tiny_coefficient();
    const std::vector<int> degrees{2, 2};
    const auto p = galerkin::build_problem(c, mesh, degrees, one);
    const Matrix A = oracle::galerkin_dense(c, mesh, degrees);
    const Vector F = oracle::rhs_dense(mesh, degrees);
    const Vector u = A.llt().solve(F);
    galerkin::AlsOptions o;
    o.tol = 1e-12;
    o.max_sweeps = 200;
    const auto res = galerkin::als_solve(p, galerkin::random_start(p.dims(), 4, 7), o);
    const double err = (oracle::tt_dense(res.w) - u).norm() / u.norm();
    double worst_increase = 0.0;
    for (std::size_t k = 1; k < res.energies.size(); ++k)
        worst_increase = std::max(worst_increase, (res.energies[k] - res.energies[k - 1]) / std::abs(res.energies[0]));
    report(6, "ALS vs dense solve with monotone energy", err <= tol::als_rel && worst_increase <= 1e-13,
           fmt("rel err %.2e, largest relative energy increase %.1e", err, worst_increase));
}

void criterion7() {
    const auto mesh = fem::refine(fem::initial_mesh(3), {0, 4, 11}, fem::MarkRule::Bisect3);
    double worst = 0.0;
    double full_size = 0.0;
    for (const auto& degrees : {std::vector<int>{2, 3}, std::vector<int>{3}}) {
        std::vector<int> q;
        for (int d : degrees) q.push_back(2 * d - 1);
        q.push_back(3);
        lognormal::FieldSpec s;
        s.L = static_cast<int>(q.size());
        const auto c = lognormal::split_coefficient(s, q, 8);
        const auto p = galerkin::build_problem(c, mesh, degrees, one);
        const auto W = galerkin::random_start(p.dims(), 2, 5);
        const auto rep = estimate::estimate_all(p, W, c, mesh, one);
        const auto ref = oracle::estimators_dense(W, c, mesh, degrees);
        worst = std::max({worst, std::abs(rep.eta_det - ref.det) / ref.det, std::abs(rep.eta_param - ref.param) / ref.param,
                          std::abs(rep.eta_disc - ref.disc) / ref.disc});
        double sz = static_cast<double>(mesh.n_free());
        for (int d : degrees) sz *= 2 * d - 1 + d - 1;
        sz *= 3;
        full_size = std::max(full_size, sz);
    }

    // constant coefficient
    lognormal::FieldSpec s0;
    s0.amp = 0.0;
    s0.L = 2;
    const auto c0 = lognormal::split_coefficient(s0, {3, 3}, 8);
    const auto p0 = galerkin::build_problem(c0, mesh, {2}, one);
    const auto sol = galerkin::als_solve(p0, galerkin::random_start(p0.dims(), 1, 2));
    const auto rep0 = estimate::estimate_all(p0, sol.w, c0, mesh, one);
    Eigen::SimplicialLLT<SparseMatrix> llt(fem::laplace_stiffness(mesh));
    const Vector u = llt.solve(fem::assemble_load(mesh, one));
    const Matrix g = oracle::p1_gradients(mesh, fem::expand_free(mesh, u));
    double classical = 0.0;
    for (Index t = 0; t < mesh.n_triangles(); ++t) {
        const double h = mesh.diameter(static_cast<int>(t));
        classical += h * h * mesh.area(static_cast<int>(t));
    }
    for (const auto& f : mesh.facets()) {
        if (f.boundary()) continue;
        const auto& a = mesh.vertices()[static_cast<std::size_t>(f.v[0])];
        const auto& b = mesh.vertices()[static_cast<std::size_t>(f.v[1])];
        const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
        const double jump = ((g(f.t[0], 0) - g(f.t[1], 0)) * (b[1] - a[1]) - (g(f.t[0], 1) - g(f.t[1], 1)) * (b[0] - a[0])) / len;
        classical += len * len * jump * jump;
    }
    classical = std::sqrt(classical);
    const double cerr = std::abs(rep0.eta_det - classical) / classical;
    const bool ok = worst <= tol::estimator_rel && cerr <= tol::estimator_rel && rep0.eta_param == 0.0 &&
                    full_size <= 1e4;
    report(7, "estimators vs dense brute force and constant-coefficient limit", ok,
           fmt("max rel err %.2e, classical rel err %.2e", worst, cerr) + fmt(", eta_param(b=0) = %g", rep0.eta_param));
}

void criterion8() {
    const auto mesh = fem::initial_mesh(4);
    const std::vector<int> degrees{3, 2};
    lognormal::FieldSpec s;
    s.L = 3;
    const auto c = lognormal::split_coefficient(s, {5, 3, 3}, 8);
    const auto p = galerkin::build_problem(c, mesh, degrees, one);
    galerkin::AlsOptions o;
    o.tol = 1e-12;
    o.max_sweeps = 200;
    const auto sol = galerkin::als_solve(p, galerkin::random_start(p.dims(), 6, 3), o);
    const double scale = estimate::eta_disc(p, tt::scale(sol.w, 0.0), mesh, c.measure());
    const double disc = estimate::eta_disc(p, sol.w, mesh, c.measure());
    report(8, "algebraic estimator vanishes after ALS convergence", disc <= tol::disc_scale * scale,
           fmt("eta_disc %.2e, scale %.2e", disc, scale));
}

void criterion9() {
    const auto t0 = Clock::now();
    bench::ExperimentConfig cfg;
    cfg.adapt.max_iterations = 15;
    const auto res = bench::run_experiment(cfg);
    const double dt = seconds_since(t0);
    const auto& rows = res.rows;
    if (rows.size() < 2 || res.run.failed || res.mc_failed || !rows.front().mc_rrms || !rows.back().mc_rrms) {
        report(9, "default adaptive run", false, "run failed: " + res.message);
        return;
    }
    const auto& first = res.run.snapshots.front();
    const bool init_ok = first.mesh.n_triangles() == 32 && first.degrees == std::vector<int>{2} &&
                         first.W.max_rank() == 2;
    bool argmax_ok = true;
    for (const auto& r : rows)
        argmax_ok = argmax_ok && r.rec.tag == adapt::argmax_branch(r.rec.eta_det, r.rec.eta_param, r.rec.eta_disc);
    const double e0 = *rows.front().mc_rrms, e1 = *rows.back().mc_rrms;
    const double a0 = rows.front().rec.eta_all, a1 = rows.back().rec.eta_all;
    const bool ok = rows.size() == 15 && init_ok && e1 <= e0 / tol::mc_reduction && a1 < a0 && argmax_ok &&
                    dt < tol::adaptive_seconds;
    report(9, "default adaptive run", ok,
           fmt("%.0f iterations, ", static_cast<double>(rows.size())) + fmt("mc rrms %.3e -> %.3e, ", e0, e1) +
               fmt("ratio %.2f, ", e0 / e1) + fmt("eta_all %.3e -> %.3e, ", a0, a1) +
               (argmax_ok ? "tags follow argmax, " : "tag mismatch, ") + fmt("%.0f s", dt));
}

int active_dims_at_budget(double decay, std::int64_t& dofs) {
    adapt::AdaptConfig cfg;
    cfg.field.decay = decay;
    cfg.max_tt_dofs = tol::budget;
    cfg.max_iterations = tol::budget_iteration_cap;
    const auto r = adapt::run(cfg);
    int M = 0;
    dofs = 0;
    for (const auto& rec : r.log)
        if (rec.tt_dofs <= tol::budget) {
            M = rec.M;
            dofs = rec.tt_dofs;
        }
    return M;
}

void criterion10() {
    std::int64_t d2 = 0, d4 = 0;
    const int m2 = active_dims_at_budget(2.0, d2);
    const int m4 = active_dims_at_budget(4.0, d4);
    report(10, "fast decay activates fewer stochastic dimensions", m4 < m2,
           "decay 2: M = " + std::to_string(m2) + " at " + std::to_string(d2) + " tt-dofs, decay 4: M = " +
               std::to_string(m4) + " at " + std::to_string(d4) + " tt-dofs");
}

void criterion11() {
    bench::ExperimentConfig cfg;
    cfg.adapt.max_iterations = 8;
    cfg.n_mc = 20;
    cfg.adapt.seed = 12345;
    std::string out[2];
    for (auto& o : out) {
        const auto res = bench::run_experiment(cfg);
        std::ostringstream os;
        bench::write_convergence_csv(os, res.rows, cfg.adapt.seed);
        o = os.str();
    }
    report(11, "identical configuration gives identical CSV", out[0] == out[1] && !out[0].empty(),
           std::to_string(out[0].size()) + " bytes");
}

} // namespace

int main(int argc, char** argv) {
    // Optional arguments select criteria by number; default runs all.
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    const std::vector<std::pair<std::string, void (*)()>> all = {
        {"Hermite triple products", criterion1},
        {"exponential expansion Parseval identity", criterion2},
        {"TT operations", criterion3},
        {"coefficient splitting error magnitudes", criterion4},
        {"operator assembly", criterion5},
        {"ALS", criterion6},
        {"estimators", criterion7},
        {"algebraic estimator", criterion8},
        {"default adaptive run", criterion9},
        {"fast decay activates fewer stochastic dimensions", criterion10},
        {"determinism", criterion11},
    };
    for (std::size_t k = 0; k < all.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        guarded(id, all[k].first, all[k].second);
    }
    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
