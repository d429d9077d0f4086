#include "estimate.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>

namespace ttasgfem::estimate {

namespace {

std::vector<Matrix> all_slices(const tt::Core& c) {
    std::vector<Matrix> s;
    s.reserve(static_cast<std::size_t>(c.mode_size()));
    for (Index i = 0; i < c.mode_size(); ++i) s.push_back(c.slice(i));
    return s;
}

/// Gauss points of a facet in parameter form (two points, weights 1/2 each).
constexpr double kFacetGauss[2] = {0.5 - 0.5 / 1.7320508075688772, 0.5 + 0.5 / 1.7320508075688772};

} // namespace

ResidualTT build_residual(const tt::TTTensor& W, const lognormal::CoeffTT& c, const fem::Mesh& mesh,
                          const std::vector<int>& degrees) {
    const std::size_t M = degrees.size();
    const std::size_t L = c.length();
    if (W.order() != M + 1) throw DimensionError("build_residual: solution order differs from active modes + 1");
    if (W.core(0).mode_size() != mesh.n_free()) throw DimensionError("build_residual: physical dimension mismatch");
    if (M > L) throw DimensionError("build_residual: more active modes than coefficient modes");
    for (std::size_t m = 0; m < M; ++m)
        if (W.core(m + 1).mode_size() != degrees[m]) throw DimensionError("build_residual: degree mismatch");

    ResidualTT res;
    res.s1 = c.first_rank();
    res.r1 = W.core(0).right_rank();
    res.degrees = degrees;
    const Index s1 = res.s1, r1 = res.r1, t1 = res.t1();

    // Stochastic TT with identity first core.
    std::vector<tt::Core> cores;
    tt::Core id(1, t1, t1);
    for (Index k = 0; k < t1; ++k) id(0, k, k) = 1.0;
    cores.push_back(std::move(id));
    for (std::size_t m = 0; m < L; ++m) {
        const tt::Core& A = c.core(m);
        const Index q = A.mode_size();
        if (m < M) {
            const tt::Core& Wm = W.core(m + 1);
            const int d = degrees[m];
            const int z = static_cast<int>(q) + d - 1;
            const Index sl = A.left_rank(), sr = A.right_rank(), rl = Wm.left_rank(), rr = Wm.right_rank();
            tt::Core R(sl * rl, z, sr * rr);
            for (Index nu = 0; nu < q; ++nu) {
                for (int mu = 0; mu < d; ++mu) {
                    for (Index eta = std::abs(nu - mu); eta <= nu + mu; eta += 2) {
                        const double kappa = chaos::triple_product(static_cast<int>(nu), mu, static_cast<int>(eta));
                        if (kappa == 0.0) continue;
                        for (Index be = 0; be < rr; ++be)
                            for (Index b = 0; b < sr; ++b)
                                for (Index al = 0; al < rl; ++al) {
                                    const double wv = kappa * Wm(al, mu, be);
                                    if (wv == 0.0) continue;
                                    for (Index a = 0; a < sl; ++a) R(a + sl * al, eta, b + sr * be) += A(a, nu, b) * wv;
                                }
                    }
                }
            }
            res.z.push_back(z);
            cores.push_back(std::move(R));
        } else {
            res.z.push_back(static_cast<int>(q));
            cores.push_back(A);
        }
    }
    res.stochastic = tt::TTTensor(std::move(cores));
    for (std::size_t m = 0; m < L; ++m) res.ztilde.push_back(chaos::gramians(m, 1, res.z[m], c.measure()).Ztilde);

    // Physical data.
    const Index nt = mesh.n_triangles();
    const Matrix W0 = Eigen::Map<const Matrix>(W.core(0).data().data(), mesh.n_free(), r1);
    std::vector<Matrix> grad_w;
    for (Index k = 0; k < r1; ++k) grad_w.push_back(fem::element_gradients(mesh, fem::expand_free(mesh, W0.col(k))));

    std::vector<double> vx, vy;
    for (const auto& p : mesh.vertices()) {
        vx.push_back(p[0]);
        vy.push_back(p[1]);
    }
    const Matrix a0_vert = c.a0_at(vx, vy);
    std::vector<Matrix> grad_a;
    for (Index k = 0; k < s1; ++k) grad_a.push_back(fem::element_gradients(mesh, a0_vert.col(k)));

    res.D.resize(nt, t1);
    for (Index k = 0; k < r1; ++k)
        for (Index kp = 0; kp < s1; ++kp)
            res.D.col(kp + s1 * k) = (grad_a[static_cast<std::size_t>(kp)].array() * grad_w[static_cast<std::size_t>(k)].array()).rowwise().sum();

    const auto eq = fem::element_quadrature(mesh);
    const Matrix a0_qp = c.a0_at(eq.x1, eq.x2);
    Matrix V(6 * nt, t1);
    for (Index t = 0; t < nt; ++t)
        for (Index j = 0; j < 3; ++j) {
            const Index q = 3 * t + j;
            const double sw = std::sqrt(eq.w[static_cast<std::size_t>(q)]);
            for (Index k = 0; k < r1; ++k)
                for (Index kp = 0; kp < s1; ++kp) {
                    const double av = sw * a0_qp(q, kp);
                    V(2 * q, kp + s1 * k) = av * grad_w[static_cast<std::size_t>(k)](t, 0);
                    V(2 * q + 1, kp + s1 * k) = av * grad_w[static_cast<std::size_t>(k)](t, 1);
                }
        }
    res.P = V.transpose() * V;

    const auto nf = static_cast<Index>(mesh.facets().size());
    std::vector<Vector> jumps;
    for (Index k = 0; k < r1; ++k) jumps.push_back(fem::facet_jumps(mesh, grad_w[static_cast<std::size_t>(k)]));
    std::vector<double> fx, fy;
    std::vector<Index> interior;
    for (Index f = 0; f < nf; ++f) {
        const auto& fc = mesh.facets()[static_cast<std::size_t>(f)];
        if (fc.boundary()) continue;
        interior.push_back(f);
        const auto& a = mesh.vertices()[static_cast<std::size_t>(fc.v[0])];
        const auto& b = mesh.vertices()[static_cast<std::size_t>(fc.v[1])];
        for (double s : kFacetGauss) {
            fx.push_back(a[0] + s * (b[0] - a[0]));
            fy.push_back(a[1] + s * (b[1] - a[1]));
        }
    }
    const Matrix a0_f = c.a0_at(fx, fy);
    res.Vf = Matrix::Zero(2 * nf, t1);
    res.facet_w = Vector::Zero(2 * nf);
    for (std::size_t i = 0; i < interior.size(); ++i) {
        const Index f = interior[i];
        const double hF = mesh.facet_length(static_cast<int>(f));
        for (Index g = 0; g < 2; ++g) {
            const Index row = 2 * f + g;
            res.facet_w(row) = hF * 0.5 * hF;
            for (Index k = 0; k < r1; ++k)
                for (Index kp = 0; kp < s1; ++kp)
                    res.Vf(row, kp + s1 * k) = a0_f(static_cast<Index>(2 * i) + g, kp) * jumps[static_cast<std::size_t>(k)](f);
        }
    }
    return res;
}

tt::TTTensor mask_range(const tt::TTTensor& S, const std::vector<std::pair<int, int>>& ranges) {
    if (ranges.size() + 1 != S.order()) throw DimensionError("mask_range: one range per stochastic dimension required");
    std::vector<std::vector<double>> w(S.order());
    for (std::size_t m = 0; m < ranges.size(); ++m) {
        const Index n = S.core(m + 1).mode_size();
        auto& wm = w[m + 1];
        wm.assign(static_cast<std::size_t>(n), 0.0);
        const int lo = ranges[m].first;
        const int hi = ranges[m].second < 0 ? static_cast<int>(n) : std::min<int>(ranges[m].second, static_cast<int>(n));
        for (int i = std::max(lo, 0); i < hi; ++i) wm[static_cast<std::size_t>(i)] = 1.0;
    }
    return tt::mask_hadamard(S, w);
}

tt::TTTensor mask_active(const ResidualTT& res) {
    std::vector<std::pair<int, int>> ranges;
    for (std::size_t m = 0; m < res.length(); ++m)
        ranges.emplace_back(0, m < res.active() ? res.degrees[m] : 1);
    return mask_range(res.stochastic, ranges);
}

Matrix gram(const tt::TTTensor& S1, const tt::TTTensor& S2, const std::vector<Matrix>& ztilde) {
    if (S1.dims() != S2.dims()) throw DimensionError("gram: dimension mismatch");
    if (ztilde.size() + 1 != S1.order()) throw DimensionError("gram: one Gramian per stochastic dimension required");
    Matrix E = Matrix::Ones(1, 1);
    for (std::size_t m = S1.order(); m-- > 1;) {
        const auto a = all_slices(S1.core(m));
        const auto b = all_slices(S2.core(m));
        const Matrix& Z = ztilde[m - 1];
        const Index z = static_cast<Index>(a.size());
        std::vector<bool> a_zero(a.size()), b_zero(b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            a_zero[i] = a[i].isZero(0.0);
            b_zero[i] = b[i].isZero(0.0);
        }
        Matrix En = Matrix::Zero(S1.core(m).left_rank(), S2.core(m).left_rank());
        for (Index e = 0; e < z; ++e) {
            if (a_zero[static_cast<std::size_t>(e)]) continue;
            Matrix U = Matrix::Zero(b[0].rows(), b[0].cols());
            bool any = false;
            for (Index ep = 0; ep < z; ++ep) {
                if (b_zero[static_cast<std::size_t>(ep)] || Z(e, ep) == 0.0) continue;
                U += Z(e, ep) * b[static_cast<std::size_t>(ep)];
                any = true;
            }
            if (any) En.noalias() += a[static_cast<std::size_t>(e)] * (E * U.transpose());
        }
        E = std::move(En);
    }
    return E;
}

Vector gram_with_constant(const tt::TTTensor& S, const std::vector<Matrix>& ztilde) {
    if (ztilde.size() + 1 != S.order()) throw DimensionError("gram_with_constant: one Gramian per stochastic dimension required");
    Vector v = Vector::Ones(1);
    for (std::size_t m = S.order(); m-- > 1;) {
        const tt::Core& c = S.core(m);
        Vector nv = Vector::Zero(c.left_rank());
        for (Index e = 0; e < c.mode_size(); ++e) {
            const double zc = ztilde[m - 1](e, 0);
            if (zc != 0.0) nv += zc * (c.slice(e) * v);
        }
        v = std::move(nv);
    }
    return v;
}

DetResult eta_det(const ResidualTT& res, const fem::Mesh& mesh, const fem::ScalarField& f) {
    const tt::TTTensor SL = mask_active(res);
    const Matrix G = gram(SL, SL, res.ztilde);
    const Vector g0 = gram_with_constant(SL, res.ztilde);
    double cf = 1.0;
    for (const auto& Z : res.ztilde) cf *= Z(0, 0);

    const Index nt = mesh.n_triangles();
    const auto eq = fem::element_quadrature(mesh);
    DetResult out;
    out.eta_T2 = Vector::Zero(nt);
    const Matrix DG = res.D * G;
    const Vector Dg0 = res.D * g0;
    for (Index t = 0; t < nt; ++t) {
        double f1 = 0.0, f2 = 0.0;
        for (Index j = 0; j < 3; ++j) {
            const auto q = static_cast<std::size_t>(3 * t + j);
            const double fv = f(eq.x1[q], eq.x2[q]);
            f1 += eq.w[q] * fv;
            f2 += eq.w[q] * fv * fv;
        }
        const double hT = mesh.diameter(static_cast<int>(t));
        const double area = mesh.area(static_cast<int>(t));
        const double val = cf * f2 + 2.0 * f1 * Dg0(t) + area * DG.row(t).dot(res.D.row(t));
        out.eta_T2(t) = std::max(0.0, hT * hT * val);
    }
    const auto nf = static_cast<Index>(mesh.facets().size());
    out.eta_F2 = Vector::Zero(nf);
    const Matrix VG = res.Vf * G;
    for (Index f2 = 0; f2 < nf; ++f2) {
        double s = 0.0;
        for (Index g = 0; g < 2; ++g) {
            const Index row = 2 * f2 + g;
            if (res.facet_w(row) == 0.0) continue;
            s += res.facet_w(row) * VG.row(row).dot(res.Vf.row(row));
        }
        out.eta_F2(f2) = std::max(0.0, s);
    }
    out.mark2 = out.eta_T2;
    for (Index f2 = 0; f2 < nf; ++f2) {
        const auto& fc = mesh.facets()[static_cast<std::size_t>(f2)];
        if (fc.boundary()) continue;
        out.mark2(fc.t[0]) += 0.5 * out.eta_F2(f2);
        out.mark2(fc.t[1]) += 0.5 * out.eta_F2(f2);
    }
    out.total = std::sqrt(out.eta_T2.sum() + out.eta_F2.sum());
    return out;
}

ParamResult eta_param(const ResidualTT& res) {
    ParamResult out;
    const tt::TTTensor& S = res.stochastic;
    const tt::TTTensor SL = mask_active(res);
    const double q_full = (res.P.array() * gram(S, S, res.ztilde).array()).sum();
    const double b_mix = (res.P.array() * gram(S, SL, res.ztilde).array()).sum();
    const double q_act = (res.P.array() * gram(SL, SL, res.ztilde).array()).sum();
    double val = q_full - 2.0 * b_mix + q_act;
    if (val < 0.0) {
        out.clamped = val < -1e-12 * std::max(q_full, 1e-300);
        val = 0.0;
    }
    out.total = std::sqrt(val);

    const std::size_t M = res.active();
    const std::size_t L = res.length();
    for (std::size_t m = 0; m <= M; ++m) {
        if (m >= L) {
            out.per_dim.push_back(0.0);
            continue;
        }
        std::vector<std::pair<int, int>> ranges;
        for (std::size_t l = 0; l < L; ++l) {
            if (l == m) ranges.emplace_back(m < M ? res.degrees[m] : 1, -1);
            else if (l < M) ranges.emplace_back(0, res.degrees[l]);
            else ranges.emplace_back(0, 1);
        }
        const tt::TTTensor Sm = mask_range(S, ranges);
        const double v = (res.P.array() * gram(Sm, Sm, res.ztilde).array()).sum();
        out.per_dim.push_back(std::sqrt(std::max(0.0, v)));
    }
    return out;
}

double eta_disc(const galerkin::Problem& p, const tt::TTTensor& W, const fem::Mesh& mesh,
                const chaos::MeasureParams& measure) {
    tt::TTTensor R = tt::subtract(tt::mpo_apply(p.op, W), p.rhs);
    auto& cores = R.cores();

    const SparseMatrix Z0 = fem::laplace_stiffness(mesh);
    if (Z0.rows() != cores[0].mode_size()) throw DimensionError("eta_disc: mesh does not match the problem");
    if (Z0.rows() > 0) {
        Eigen::SimplicialLLT<SparseMatrix> llt(Z0);
        if (llt.info() != Eigen::Success) throw SolverError("eta_disc: Laplace stiffness is not SPD");
        tt::Core& c0 = cores[0];
        Eigen::Map<Matrix> X(c0.data().data(), c0.mode_size(), c0.right_rank());
        Matrix PX = llt.permutationP() * X;
        X = llt.matrixL().solve(PX);
    }
    for (std::size_t m = 1; m < cores.size(); ++m) {
        tt::Core& c = cores[m];
        const int d = static_cast<int>(c.mode_size());
        const Matrix Z = chaos::gramians(m - 1, d, d, measure).Z;
        Eigen::LLT<Matrix> llt(Z);
        if (llt.info() != Eigen::Success) throw SolverError("eta_disc: singular Gramian");
        const Matrix Linv = llt.matrixL().solve(Matrix::Identity(d, d));
        Vector v(d);
        for (Index b = 0; b < c.right_rank(); ++b)
            for (Index a = 0; a < c.left_rank(); ++a) {
                for (Index i = 0; i < d; ++i) v(i) = c(a, i, b);
                const Vector u = Linv * v;
                for (Index i = 0; i < d; ++i) c(a, i, b) = u(i);
            }
    }
    return tt::norm(R);
}

double eta_all(double det, double param, double disc) {
    if (det < 0.0 || param < 0.0 || disc < 0.0) throw DimensionError("eta_all: estimator parts must be non-negative");
    const double s = det + param + disc;
    return std::sqrt(s * s + disc * disc);
}

EstimatorReport estimate_all(const galerkin::Problem& p, const tt::TTTensor& W, const lognormal::CoeffTT& c,
                             const fem::Mesh& mesh, const fem::ScalarField& f) {
    const ResidualTT res = build_residual(W, c, mesh, p.degrees);
    EstimatorReport rep;
    rep.det = eta_det(res, mesh, f);
    rep.param = eta_param(res);
    rep.eta_det = rep.det.total;
    rep.eta_param = rep.param.total;
    rep.eta_disc = eta_disc(p, W, mesh, c.measure());
    rep.eta_all = eta_all(rep.eta_det, rep.eta_param, rep.eta_disc);
    return rep;
}

} // namespace ttasgfem::estimate
