#include "galerkin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "chaos.hpp"

namespace ttasgfem::galerkin {

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

MeanPreconditioner::MeanPreconditioner(SparseMatrix K)
    : K_(std::move(K)), llt_(std::make_shared<Eigen::SimplicialLLT<SparseMatrix>>()) {
    if (K_.rows() == 0) return;
    llt_->compute(K_);
    if (llt_->info() != Eigen::Success) throw SolverError("mean preconditioner: stiffness of the mean coefficient is not SPD");
}

Matrix MeanPreconditioner::solve(const Matrix& b) const {
    if (b.rows() != K_.rows()) throw DimensionError("MeanPreconditioner::solve: size mismatch");
    if (K_.rows() == 0) return b;
    Matrix x = llt_->solve(b);
    return x;
}

std::vector<Index> Problem::dims() const { return op.col_dims(); }

Matrix coefficient_at_quadrature(const lognormal::CoeffTT& c, const fem::Mesh& mesh) {
    const auto q = fem::element_quadrature(mesh);
    return c.a0_at(q.x1, q.x2);
}

namespace {

/// Per-element integrals of a field given at the element quadrature points.
Vector element_integrals(const fem::Mesh& mesh, const Eigen::Ref<const Vector>& vals) {
    Vector out(mesh.n_triangles());
    for (Index t = 0; t < mesh.n_triangles(); ++t)
        out(t) = mesh.area(static_cast<int>(t)) / 3.0 * (vals(3 * t) + vals(3 * t + 1) + vals(3 * t + 2));
    return out;
}

} // namespace

tt::TTOperator assemble_operator(const lognormal::CoeffTT& c, const fem::Mesh& mesh, const std::vector<int>& degrees) {
    return assemble_operator(c, mesh, degrees, coefficient_at_quadrature(c, mesh));
}

tt::TTOperator assemble_operator(const lognormal::CoeffTT& c, const fem::Mesh& mesh, const std::vector<int>& degrees,
                                 const Matrix& a0_qp) {
    const std::size_t M = degrees.size();
    const std::size_t L = c.length();
    if (M > L) throw DimensionError("assemble_operator: more active modes than coefficient modes");
    if (a0_qp.rows() != 3 * mesh.n_triangles() || a0_qp.cols() != c.first_rank())
        throw DimensionError("assemble_operator: coefficient table does not match mesh or rank");
    for (std::size_t m = 0; m < M; ++m) {
        if (degrees[m] < 1) throw DimensionError("assemble_operator: degrees must be >= 1");
        if (c.degrees()[m] < 2 * degrees[m] - 1)
            throw DimensionError("assemble_operator: coefficient degree q_" + std::to_string(m + 1) +
                                 " < 2 d - 1 truncates the triple products");
    }
    const Index s1 = c.first_rank();
    std::vector<SparseMatrix> bank;
    bank.reserve(static_cast<std::size_t>(s1));
    for (Index k = 0; k < s1; ++k) bank.push_back(fem::assemble_stiffness_integrals(mesh, element_integrals(mesh, a0_qp.col(k))));

    // Fold the trailing coefficient cores at nu = 0.
    Vector g = Vector::Ones(1);
    for (std::size_t l = L; l-- > M;) g = c.core(l).slice(0) * g;

    std::vector<tt::OpCore> cores;
    if (M == 0) {
        SparseMatrix K = g(0) * bank[0];
        for (Index k = 1; k < s1; ++k) K += g(k) * bank[static_cast<std::size_t>(k)];
        cores.emplace_back(1, 1, std::vector<SparseMatrix>{K});
        return tt::TTOperator(std::move(cores));
    }
    cores.emplace_back(1, s1, std::move(bank));
    for (std::size_t m = 0; m < M; ++m) {
        const tt::Core& A = c.core(m);
        const int d = degrees[m];
        const Index sl = A.left_rank();
        const bool last = m + 1 == M;
        const Index sr = last ? 1 : A.right_rank();
        // Coefficient slices with the right rank already contracted for the last core.
        std::vector<Matrix> slices;
        const int nu_max = std::min<int>(2 * d - 1, static_cast<int>(A.mode_size()));
        for (int nu = 0; nu < nu_max; ++nu) slices.push_back(last ? Matrix(A.slice(nu) * g) : A.slice(nu));
        tt::OpCore O(sl, d, d, sr);
        for (int mu = 0; mu < d; ++mu) {
            for (int mup = 0; mup < d; ++mup) {
                for (int nu = 0; nu < nu_max; ++nu) {
                    const double kappa = chaos::triple_product(mu, mup, nu);
                    if (kappa == 0.0) continue;
                    const Matrix& S = slices[static_cast<std::size_t>(nu)];
                    for (Index b = 0; b < sr; ++b)
                        for (Index a = 0; a < sl; ++a) O(a, mu, mup, b) += kappa * S(a, b);
                }
            }
        }
        cores.push_back(std::move(O));
    }
    return tt::TTOperator(std::move(cores));
}

tt::TTTensor assemble_rhs(const fem::Mesh& mesh, const fem::ScalarField& f, const std::vector<int>& degrees) {
    std::vector<Vector> factors;
    factors.push_back(fem::assemble_load(mesh, f));
    for (int d : degrees) {
        if (d < 1) throw DimensionError("assemble_rhs: degrees must be >= 1");
        Vector e = Vector::Zero(d);
        e(0) = 1.0;
        factors.push_back(e);
    }
    return tt::TTTensor::rank_one(factors);
}

MeanPreconditioner mean_preconditioner(const lognormal::CoeffTT& c, const fem::Mesh& mesh) {
    return mean_preconditioner(c, mesh, coefficient_at_quadrature(c, mesh));
}

MeanPreconditioner mean_preconditioner(const lognormal::CoeffTT& c, const fem::Mesh& mesh, const Matrix& a0_qp) {
    const Vector abar = a0_qp * c.mean_weights();
    if (abar.minCoeff() <= 0.0) throw SolverError("mean preconditioner: mean coefficient is not positive");
    return MeanPreconditioner(fem::assemble_stiffness_integrals(mesh, element_integrals(mesh, abar)));
}

Problem build_problem(const lognormal::CoeffTT& c, const fem::Mesh& mesh, const std::vector<int>& degrees,
                      const fem::ScalarField& f) {
    const Matrix a0_qp = coefficient_at_quadrature(c, mesh);
    Problem p;
    p.op = assemble_operator(c, mesh, degrees, a0_qp);
    p.rhs = assemble_rhs(mesh, f, degrees);
    p.degrees = degrees;
    p.precond = std::make_shared<MeanPreconditioner>(mean_preconditioner(c, mesh, a0_qp));
    return p;
}

double energy(const Problem& p, const tt::TTTensor& w) {
    return 0.5 * tt::dot(w, tt::mpo_apply(p.op, w)) - tt::dot(p.rhs, w);
}

tt::TTTensor random_start(const std::vector<Index>& dims, Index rank, std::uint64_t seed) {
    const std::size_t d = dims.size();
    std::vector<Index> ranks(d + 1, 1);
    for (std::size_t k = 1; k < d; ++k) {
        Index left = 1, right = 1;
        for (std::size_t j = 0; j < k && left < rank; ++j) left *= dims[j];
        for (std::size_t j = k; j < d && right < rank; ++j) right *= dims[j];
        ranks[k] = std::min({rank, left, right});
    }
    std::mt19937_64 rng(seed);
    auto t = tt::TTTensor::random(dims, ranks, rng);
    return tt::scale(t, 1.0 / tt::norm(t));
}

// ---------------------------------------------------------------------------
// ALS
// ---------------------------------------------------------------------------

namespace {

using EnvList = std::vector<Matrix>;

void thin_qr(const Matrix& m, Matrix& q, Matrix& r) {
    const Index k = std::min(m.rows(), m.cols());
    Eigen::HouseholderQR<Matrix> qr(m);
    q = qr.householderQ() * Matrix::Identity(m.rows(), k);
    r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
}

/// Slices of a core, X_i = X(:, i, :).
std::vector<Matrix> slices(const tt::Core& x) {
    std::vector<Matrix> s;
    s.reserve(static_cast<std::size_t>(x.mode_size()));
    for (Index i = 0; i < x.mode_size(); ++i) s.push_back(x.slice(i));
    return s;
}

/// Physical core (left rank 1) as an N x r matrix.
Matrix physical_matrix(const tt::Core& x) {
    return Eigen::Map<const Matrix>(x.data().data(), x.mode_size(), x.right_rank());
}

EnvList left_step(const tt::OpCore& O, const tt::Core& X, const EnvList& Lin) {
    EnvList out(static_cast<std::size_t>(O.right_rank()), Matrix::Zero(X.right_rank(), X.right_rank()));
    if (O.is_sparse()) {
        const Matrix P = physical_matrix(X);
        for (Index b = 0; b < O.right_rank(); ++b)
            for (Index a = 0; a < O.left_rank(); ++a)
                out[static_cast<std::size_t>(b)] += Lin[static_cast<std::size_t>(a)](0, 0) *
                                                    (P.transpose() * (O.sparse_block(a, b) * P));
        return out;
    }
    const auto xs = slices(X);
    // T[a][j] = L_a X_j
    std::vector<std::vector<Matrix>> T(static_cast<std::size_t>(O.left_rank()));
    for (Index a = 0; a < O.left_rank(); ++a)
        for (Index j = 0; j < O.cols(); ++j) T[static_cast<std::size_t>(a)].push_back(Lin[static_cast<std::size_t>(a)] * xs[static_cast<std::size_t>(j)]);
    for (Index b = 0; b < O.right_rank(); ++b) {
        for (Index i = 0; i < O.rows(); ++i) {
            Matrix Mi = Matrix::Zero(X.left_rank(), X.right_rank());
            bool any = false;
            for (Index a = 0; a < O.left_rank(); ++a)
                for (Index j = 0; j < O.cols(); ++j) {
                    const double o = O(a, i, j, b);
                    if (o == 0.0) continue;
                    Mi += o * T[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)];
                    any = true;
                }
            if (any) out[static_cast<std::size_t>(b)].noalias() += xs[static_cast<std::size_t>(i)].transpose() * Mi;
        }
    }
    return out;
}

EnvList right_step(const tt::OpCore& O, const tt::Core& X, const EnvList& Rin) {
    if (O.is_sparse()) throw DimensionError("ALS: right environment through the physical core is never needed");
    EnvList out(static_cast<std::size_t>(O.left_rank()), Matrix::Zero(X.left_rank(), X.left_rank()));
    const auto xs = slices(X);
    // U[b][j] = R_b X_j^T
    std::vector<std::vector<Matrix>> U(static_cast<std::size_t>(O.right_rank()));
    for (Index b = 0; b < O.right_rank(); ++b)
        for (Index j = 0; j < O.cols(); ++j)
            U[static_cast<std::size_t>(b)].push_back(Rin[static_cast<std::size_t>(b)] * xs[static_cast<std::size_t>(j)].transpose());
    for (Index a = 0; a < O.left_rank(); ++a) {
        for (Index i = 0; i < O.rows(); ++i) {
            Matrix Mi = Matrix::Zero(X.right_rank(), X.left_rank());
            bool any = false;
            for (Index b = 0; b < O.right_rank(); ++b)
                for (Index j = 0; j < O.cols(); ++j) {
                    const double o = O(a, i, j, b);
                    if (o == 0.0) continue;
                    Mi += o * U[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)];
                    any = true;
                }
            if (any) out[static_cast<std::size_t>(a)].noalias() += xs[static_cast<std::size_t>(i)] * Mi;
        }
    }
    return out;
}

Matrix rhs_left_step(const tt::Core& F, const tt::Core& X, const Matrix& fin) {
    Matrix out = Matrix::Zero(X.right_rank(), F.right_rank());
    for (Index i = 0; i < X.mode_size(); ++i) out.noalias() += X.slice(i).transpose() * fin * F.slice(i);
    return out;
}

Matrix rhs_right_step(const tt::Core& F, const tt::Core& X, const Matrix& fin) {
    Matrix out = Matrix::Zero(X.left_rank(), F.left_rank());
    for (Index i = 0; i < X.mode_size(); ++i) out.noalias() += X.slice(i) * fin * F.slice(i).transpose();
    return out;
}

/// Local system at one core: operator sum_{a,b} R_b (x) O_ab (x) L_a acting
/// on the core vectorised with the left rank fastest.
class LocalSystem {
public:
    LocalSystem(const tt::OpCore& O, const EnvList& Lenv, const EnvList& Renv, Index rl, Index n, Index rr)
        : O_(O), L_(Lenv), R_(Renv), rl_(rl), n_(n), rr_(rr) {}

    [[nodiscard]] Index size() const { return rl_ * n_ * rr_; }

    [[nodiscard]] Vector apply(const Vector& x) const {
        Vector y = Vector::Zero(size());
        if (O_.is_sparse()) {
            const Eigen::Map<const Matrix> X(x.data(), n_, rr_);
            Eigen::Map<Matrix> Y(y.data(), n_, rr_);
            for (Index b = 0; b < O_.right_rank(); ++b)
                for (Index a = 0; a < O_.left_rank(); ++a)
                    Y.noalias() += L_[static_cast<std::size_t>(a)](0, 0) *
                                   ((O_.sparse_block(a, b) * X) * R_[static_cast<std::size_t>(b)].transpose());
            return y;
        }
        // Y_i = sum O(a,i,j,b) L_a X_j R_b^T
        std::vector<Matrix> xs(static_cast<std::size_t>(n_));
        for (Index j = 0; j < n_; ++j) {
            xs[static_cast<std::size_t>(j)].resize(rl_, rr_);
            for (Index b = 0; b < rr_; ++b)
                for (Index a = 0; a < rl_; ++a) xs[static_cast<std::size_t>(j)](a, b) = x(a + rl_ * (j + n_ * b));
        }
        for (Index a = 0; a < O_.left_rank(); ++a) {
            for (Index b = 0; b < O_.right_rank(); ++b) {
                for (Index j = 0; j < n_; ++j) {
                    bool any = false;
                    for (Index i = 0; i < n_ && !any; ++i) any = O_(a, i, j, b) != 0.0;
                    if (!any) continue;
                    const Matrix t = L_[static_cast<std::size_t>(a)] * xs[static_cast<std::size_t>(j)] *
                                     R_[static_cast<std::size_t>(b)].transpose();
                    for (Index i = 0; i < n_; ++i) {
                        const double o = O_(a, i, j, b);
                        if (o == 0.0) continue;
                        for (Index bb = 0; bb < rr_; ++bb)
                            for (Index aa = 0; aa < rl_; ++aa) y(aa + rl_ * (i + n_ * bb)) += o * t(aa, bb);
                    }
                }
            }
        }
        return y;
    }

    [[nodiscard]] Matrix dense() const {
        const Index D = size();
        Matrix A = Matrix::Zero(D, D);
        for (Index a = 0; a < O_.left_rank(); ++a) {
            const Matrix& La = L_[static_cast<std::size_t>(a)];
            for (Index b = 0; b < O_.right_rank(); ++b) {
                const Matrix& Rb = R_[static_cast<std::size_t>(b)];
                auto add_entry = [&](Index i, Index j, double o) {
                    for (Index bp = 0; bp < rr_; ++bp)
                        for (Index be = 0; be < rr_; ++be) {
                            const double rv = o * Rb(be, bp);
                            if (rv == 0.0) continue;
                            for (Index ap = 0; ap < rl_; ++ap)
                                for (Index al = 0; al < rl_; ++al)
                                    A(al + rl_ * (i + n_ * be), ap + rl_ * (j + n_ * bp)) += rv * La(al, ap);
                        }
                };
                if (O_.is_sparse()) {
                    const SparseMatrix& S = O_.sparse_block(a, b);
                    for (Index col = 0; col < S.outerSize(); ++col)
                        for (SparseMatrix::InnerIterator it(S, col); it; ++it) add_entry(it.row(), it.col(), it.value());
                } else {
                    for (Index j = 0; j < n_; ++j)
                        for (Index i = 0; i < n_; ++i) {
                            const double o = O_(a, i, j, b);
                            if (o != 0.0) add_entry(i, j, o);
                        }
                }
            }
        }
        return A;
    }

private:
    const tt::OpCore& O_;
    const EnvList& L_;
    const EnvList& R_;
    Index rl_, n_, rr_;
};

Vector local_rhs(const tt::Core& F, const Matrix& fl, const Matrix& fr, Index rl, Index rr) {
    const Index n = F.mode_size();
    Vector b(rl * n * rr);
    for (Index i = 0; i < n; ++i) {
        const Matrix s = fl * F.slice(i) * fr.transpose(); // rl x rr
        for (Index be = 0; be < rr; ++be)
            for (Index al = 0; al < rl; ++al) b(al + rl * (i + n * be)) = s(al, be);
    }
    return b;
}

struct Solver {
    const Problem& p;
    const AlsOptions& opts;
    std::vector<tt::Core>& cores;
    std::vector<EnvList> envL, envR;
    std::vector<Matrix> fL, fR;
    std::vector<double>& energies;
    int sweep = 0;

    void solve_core(std::size_t k) {
        tt::Core& X = cores[k];
        const Index rl = X.left_rank(), n = X.mode_size(), rr = X.right_rank();
        LocalSystem sys(p.op.core(k), envL[k], envR[k + 1], rl, n, rr);
        const Vector b = local_rhs(p.rhs.core(k), fL[k], fR[k + 1], rl, rr);
        Vector x = Eigen::Map<const Vector>(X.data().data(), X.size());
        if (sys.size() <= opts.dense_threshold) {
            const Matrix A = sys.dense();
            Eigen::LLT<Matrix> llt(A);
            if (llt.info() != Eigen::Success)
                throw SolverError("ALS: local system not SPD (sweep " + std::to_string(sweep) + ", core " +
                                  std::to_string(k) + ")");
            x = llt.solve(b);
        } else {
            x = pcg(sys, b, x, k == 0 && p.precond ? p.precond.get() : nullptr, rl, n, rr, k);
        }
        std::copy(x.data(), x.data() + x.size(), X.data().begin());
        const double e = 0.5 * x.dot(sys.apply(x)) - b.dot(x);
        energies.push_back(e);
        if (opts.trace) *opts.trace << sweep << ',' << k << ',' << sys.size() << ',' << e << ",\n";
    }

    Vector pcg(const LocalSystem& sys, const Vector& b, Vector x, const MeanPreconditioner* pc, Index rl, Index n,
               Index rr, std::size_t k) const {
        auto precondition = [&](const Vector& r) -> Vector {
            if (!pc || rl != 1) return r;
            const Eigen::Map<const Matrix> R(r.data(), n, rr);
            Matrix z = pc->solve(R);
            return Eigen::Map<const Vector>(z.data(), z.size());
        };
        Vector r = b - sys.apply(x);
        const double r0 = r.norm();
        const double bnorm = b.norm();
        if (r0 == 0.0 || r0 <= 1e-15 * bnorm) return x;
        const double target = std::max(opts.cg_rel_tol * r0, 1e-15 * bnorm);
        Vector z = precondition(r);
        Vector d = z;
        double rz = r.dot(z);
        for (int it = 0; it < opts.cg_max_iter; ++it) {
            const Vector Ad = sys.apply(d);
            const double dAd = d.dot(Ad);
            if (!(dAd > 0.0))
                throw SolverError("ALS: local system not SPD in CG (sweep " + std::to_string(sweep) + ", core " +
                                  std::to_string(k) + ")");
            const double alpha = rz / dAd;
            x += alpha * d;
            r -= alpha * Ad;
            if (r.norm() <= target) break;
            z = precondition(r);
            const double rz_new = r.dot(z);
            d = z + (rz_new / rz) * d;
            rz = rz_new;
        }
        return x;
    }

    void move_right(std::size_t k) {
        Matrix q, r;
        thin_qr(cores[k].left_unfolding(), q, r);
        cores[k] = tt::Core::from_left_unfolding(q, cores[k].left_rank(), cores[k].mode_size());
        tt::Core& nx = cores[k + 1];
        nx = tt::Core::from_right_unfolding(r * nx.right_unfolding(), nx.mode_size(), nx.right_rank());
        envL[k + 1] = left_step(p.op.core(k), cores[k], envL[k]);
        fL[k + 1] = rhs_left_step(p.rhs.core(k), cores[k], fL[k]);
    }

    void move_left(std::size_t k) {
        Matrix q, r;
        thin_qr(cores[k].right_unfolding().transpose(), q, r);
        cores[k] = tt::Core::from_right_unfolding(q.transpose(), cores[k].mode_size(), cores[k].right_rank());
        tt::Core& pv = cores[k - 1];
        pv = tt::Core::from_left_unfolding(pv.left_unfolding() * r.transpose(), pv.left_rank(), pv.mode_size());
        envR[k] = right_step(p.op.core(k), cores[k], envR[k + 1]);
        fR[k] = rhs_right_step(p.rhs.core(k), cores[k], fR[k + 1]);
    }
};

} // namespace

AlsResult als_solve(const Problem& p, const tt::TTTensor& w0, const AlsOptions& opts) {
    if (w0.dims() != p.op.col_dims()) throw DimensionError("als_solve: initial tensor does not match operator dims");
    if (p.rhs.dims() != p.op.row_dims()) throw DimensionError("als_solve: rhs does not match operator dims");
    const std::size_t d = w0.order();
    AlsResult res;
    // Orthogonalising in both directions caps every rank at its feasible maximum.
    tt::TTTensor w = tt::right_orthogonalize(tt::left_orthogonalize(w0));
    std::vector<tt::Core> cores = w.cores();

    if (opts.trace) *opts.trace << "sweep,core,size,energy,update\n";
    Solver s{p, opts, cores, {}, {}, {}, {}, res.energies};
    s.envL.assign(d + 1, EnvList{});
    s.envR.assign(d + 1, EnvList{});
    s.fL.assign(d + 1, Matrix());
    s.fR.assign(d + 1, Matrix());
    s.envL[0] = EnvList{Matrix::Ones(1, 1)};
    s.envR[d] = EnvList{Matrix::Ones(1, 1)};
    s.fL[0] = Matrix::Ones(1, 1);
    s.fR[d] = Matrix::Ones(1, 1);
    for (std::size_t k = d; k-- > 1;) {
        s.envR[k] = right_step(p.op.core(k), cores[k], s.envR[k + 1]);
        s.fR[k] = rhs_right_step(p.rhs.core(k), cores[k], s.fR[k + 1]);
    }

    tt::TTTensor prev(cores);
    for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
        s.sweep = sweep;
        for (std::size_t k = 0; k < d; ++k) {
            s.solve_core(k);
            if (k + 1 < d) s.move_right(k);
        }
        for (std::size_t k = d - 1; k >= 1; --k) {
            s.move_left(k);
            s.solve_core(k - 1);
        }
        tt::TTTensor cur(cores);
        const double nc = tt::norm(cur);
        const double diff = tt::norm(tt::subtract(cur, prev));
        res.last_update = nc > 0.0 ? diff / nc : diff;
        res.sweeps = sweep;
        if (opts.trace) *opts.trace << sweep << ",-1,0,," << res.last_update << '\n';
        prev = std::move(cur);
        if (diff <= opts.tol * nc) {
            res.converged = true;
            break;
        }
    }
    res.w = std::move(prev);
    return res;
}

} // namespace ttasgfem::galerkin
