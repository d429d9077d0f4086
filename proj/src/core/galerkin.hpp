#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/SparseCholesky>

#include "common.hpp"
#include "fem.hpp"
#include "lognormal.hpp"
#include "ttcore.hpp"

/// Stochastic Galerkin discretisation in TT format and its ALS solver.
///
/// Unknowns are tensors W(i, mu_1, ..., mu_M) over free FE vertices i and
/// scaled Hermite degrees mu_m < d_m. The operator is an MPO whose first core
/// is a bank of sparse stiffness matrices, one per rank index of the
/// coefficient's physical component.
namespace ttasgfem::galerkin {

/// Mean-coefficient stiffness K(abar) with a sparse Cholesky factorisation.
class MeanPreconditioner {
public:
    explicit MeanPreconditioner(SparseMatrix K);

    [[nodiscard]] const SparseMatrix& matrix() const { return K_; }
    [[nodiscard]] Index size() const { return K_.rows(); }
    /// Solves K x = b column by column.
    [[nodiscard]] Matrix solve(const Matrix& b) const;

private:
    SparseMatrix K_;
    std::shared_ptr<Eigen::SimplicialLLT<SparseMatrix>> llt_;
};

struct Problem {
    tt::TTOperator op;
    tt::TTTensor rhs;
    std::vector<int> degrees; ///< active degrees d_1..d_M
    std::shared_ptr<const MeanPreconditioner> precond;

    [[nodiscard]] std::vector<Index> dims() const;
};

/// Coefficient physical components a0[k](x) evaluated at the element
/// quadrature points, (3 n_triangles) x s_1.
Matrix coefficient_at_quadrature(const lognormal::CoeffTT& c, const fem::Mesh& mesh);

/// MPO of the Galerkin operator on dims (N, d_1, ..., d_M). Coefficient
/// modes beyond M are contracted at nu = 0 into the last core. Requires
/// q_m >= 2 d_m - 1 for every active mode.
tt::TTOperator assemble_operator(const lognormal::CoeffTT& c, const fem::Mesh& mesh, const std::vector<int>& degrees);
/// Same, reusing coefficient values at quadrature points.
tt::TTOperator assemble_operator(const lognormal::CoeffTT& c, const fem::Mesh& mesh, const std::vector<int>& degrees,
                                 const Matrix& a0_qp);

/// Rank-one right-hand side f0 (x) e_0 (x) ... (x) e_0.
tt::TTTensor assemble_rhs(const fem::Mesh& mesh, const fem::ScalarField& f, const std::vector<int>& degrees);

MeanPreconditioner mean_preconditioner(const lognormal::CoeffTT& c, const fem::Mesh& mesh);
MeanPreconditioner mean_preconditioner(const lognormal::CoeffTT& c, const fem::Mesh& mesh, const Matrix& a0_qp);

Problem build_problem(const lognormal::CoeffTT& c, const fem::Mesh& mesh, const std::vector<int>& degrees,
                      const fem::ScalarField& f);

struct AlsOptions {
    double tol = 1e-12;
    int max_sweeps = 50;
    Index dense_threshold = 2000; ///< local systems up to this size are solved by dense Cholesky
    double cg_rel_tol = 1e-2;     ///< relative residual reduction of inexact local CG solves
    int cg_max_iter = 2000;
    std::ostream* trace = nullptr; ///< CSV rows: sweep,core,size,energy,update
};

struct AlsResult {
    tt::TTTensor w;
    int sweeps = 0;
    bool converged = false;
    double last_update = 0.0;       ///< relative change of the final sweep
    std::vector<double> energies;   ///< 1/2 w^T A w - F^T w after every local solve
};

/// Single-site ALS with fixed ranks (capped to the feasible maximum).
AlsResult als_solve(const Problem& p, const tt::TTTensor& w0, const AlsOptions& opts = {});

/// Random TT of the given link rank (capped per link) with unit norm.
tt::TTTensor random_start(const std::vector<Index>& dims, Index rank, std::uint64_t seed);

/// 1/2 <w, A w> - <F, w>.
double energy(const Problem& p, const tt::TTTensor& w);

} // namespace ttasgfem::galerkin
