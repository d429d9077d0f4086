#pragma once

#include <vector>

#include "chaos.hpp"
#include "common.hpp"
#include "fem.hpp"
#include "galerkin.hpp"
#include "lognormal.hpp"
#include "ttcore.hpp"

/// Residual based a posteriori error estimation for the TT Galerkin solution.
///
/// The flux a(x, y) grad w_N(x, y) is expanded in scaled Hermite polynomials
/// H_eta. Its stochastic part is a TT whose first core is the identity over
/// combined ranks k'' = k' + s_1 k (coefficient rank k' fastest, solution
/// rank k); stochastic core m has shape (s_m r_m, z_m, s_{m+1} r_{m+1}) with
/// z_m = q_m + d_m - 1 for active modes and z_m = q_m for the trailing
/// coefficient modes. All generic constants are set to one.
namespace ttasgfem::estimate {

struct ResidualTT {
    Index s1 = 0;              ///< first coefficient rank
    Index r1 = 0;              ///< first solution rank
    tt::TTTensor stochastic;   ///< dims (s1 r1, z_1, ..., z_L)
    std::vector<int> z;        ///< stochastic ranges z_1..z_L
    std::vector<int> degrees;  ///< active degrees d_1..d_M
    std::vector<Matrix> ztilde; ///< squared-density Gramians, z_m x z_m

    // Physical data on the current mesh.
    Matrix D;      ///< n_triangles x t1: grad(I_h a0[k']) . grad(w_k) per element
    Matrix P;      ///< t1 x t1: int_D a0[k'] a0[kk'] grad(w_k) . grad(w_kk)
    Matrix Vf;     ///< (2 n_facets) x t1: a0[k'](x_g) [[grad w_k]].n_F at facet Gauss points
    Vector facet_w; ///< Gauss weight times h_F for every row of Vf

    [[nodiscard]] Index t1() const { return s1 * r1; }
    [[nodiscard]] std::size_t active() const { return degrees.size(); }
    [[nodiscard]] std::size_t length() const { return z.size(); }
};

/// Builds the residual TT and its physical data. W has dims (N, d_1..d_M).
ResidualTT build_residual(const tt::TTTensor& W, const lognormal::CoeffTT& c, const fem::Mesh& mesh,
                          const std::vector<int>& degrees);

/// Zeroes every residual slice outside the product set given per stochastic
/// dimension by [lo_m, hi_m) (hi < 0 means unbounded).
tt::TTTensor mask_range(const tt::TTTensor& S, const std::vector<std::pair<int, int>>& ranges);
/// Restriction to the active set.
tt::TTTensor mask_active(const ResidualTT& res);

/// Z~-weighted Gram matrix (t1 x t1) of two residual TTs over the
/// stochastic dimensions.
Matrix gram(const tt::TTTensor& S1, const tt::TTTensor& S2, const std::vector<Matrix>& ztilde);
/// g0(k'') = sum_eta S(k'', eta) prod_m Z~_m(eta_m, 0).
Vector gram_with_constant(const tt::TTTensor& S, const std::vector<Matrix>& ztilde);

struct DetResult {
    Vector eta_T2;   ///< squared volume contributions
    Vector eta_F2;   ///< squared facet contributions (zero on the boundary)
    Vector mark2;    ///< per element: volume plus half of each adjacent facet
    double total = 0.0;
};

DetResult eta_det(const ResidualTT& res, const fem::Mesh& mesh, const fem::ScalarField& f);

struct ParamResult {
    double total = 0.0;
    std::vector<double> per_dim; ///< m = 1..M+1 (the last entry is the buffer mode)
    bool clamped = false;        ///< a negative quadratic form was clamped to zero
};

ParamResult eta_param(const ResidualTT& res);

/// ||(x)_m L_m^{-1} (A W - F)|| with Z_0 = L_0 L_0^T the Laplace stiffness and
/// Z_m = L_m L_m^T the Gramians of the active basis.
double eta_disc(const galerkin::Problem& p, const tt::TTTensor& W, const fem::Mesh& mesh,
                const chaos::MeasureParams& measure);

double eta_all(double det, double param, double disc);

struct EstimatorReport {
    DetResult det;
    ParamResult param;
    double eta_det = 0.0;
    double eta_param = 0.0;
    double eta_disc = 0.0;
    double eta_all = 0.0;
};

EstimatorReport estimate_all(const galerkin::Problem& p, const tt::TTTensor& W, const lognormal::CoeffTT& c,
                             const fem::Mesh& mesh, const fem::ScalarField& f);

} // namespace ttasgfem::estimate
