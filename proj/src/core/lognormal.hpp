#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "chaos.hpp"
#include "common.hpp"
#include "ttcore.hpp"

/// Lognormal diffusion coefficient a(x, y) = exp(sum_m b_m(x) y_m) on the
/// unit square, and its compression into a TT-like format whose first
/// component stays a function of x.
///
/// The expansion functions enumerate planar cosine modes,
///
///     b_m(x) = amp m^{-decay} cos(2 pi r1(m) x1) cos(2 pi r2(m) x2),
///     k(m) = floor(-1/2 + sqrt(1/4 + 2m)),  r1 = m - k(k+1)/2,  r2 = k - r1,
///
/// with modes indexed from m = 1.
namespace ttasgfem::lognormal {

struct FieldSpec {
    double amp = 0.9;
    double decay = 2.0;
    int L = 10;          ///< expansion length of the compressed coefficient
    int M_trunc = 100;   ///< truncation of the reference field used for sampling
    int quad_cells = 25; ///< physical quadrature: cells per side
    int quad_order = 4;  ///< Gauss-Legendre points per cell and direction
    double rho = 1.0;
    double theta = 0.1;
    /// Modes m > nonzero_modes are switched off (b_m = 0). Negative means all
    /// modes are active.
    int nonzero_modes = -1;

    void validate() const;
    /// beta_m = amp m^{-decay}, zero for switched-off modes.
    [[nodiscard]] double beta(int m) const;
    /// Measure parameters for the first n modes.
    [[nodiscard]] chaos::MeasureParams measure(int n) const;
};

/// (r1, r2) frequency pair of mode m >= 1.
std::pair<int, int> mode_frequencies(int m);

double bm_eval(const FieldSpec& spec, int m, double x1, double x2);

/// exp(sum_{m <= M} b_m(x) y_m); y must hold at least M entries.
double a_exact(const FieldSpec& spec, double x1, double x2, std::span<const double> y, int M);

/// Tensorised Gauss-Legendre rule on a uniform cells x cells grid of [0,1]^2.
struct PhysicalQuadrature {
    int cells = 0;
    int order = 0;
    std::vector<double> x1;
    std::vector<double> x2;
    std::vector<double> w;

    static PhysicalQuadrature make(int cells, int order);
    [[nodiscard]] Index size() const { return static_cast<Index>(w.size()); }
};

/// Gauss-Legendre rule with n points on [0, 1].
chaos::QuadratureRule gauss_legendre01(int n);

/// Compressed coefficient. Stochastic core l (0-based, for mode l+1) has
/// shape (s_l, q_l, s_{l+1}) with s_L = 1; the first component a0[k] is kept
/// as values at the physical quadrature nodes and can be re-evaluated
/// anywhere by back-substitution through the cores.
class CoeffTT {
public:
    CoeffTT(FieldSpec spec, std::vector<int> degrees, std::vector<tt::Core> cores, Matrix a0_nodes,
            PhysicalQuadrature quad);

    [[nodiscard]] const FieldSpec& spec() const { return spec_; }
    [[nodiscard]] std::size_t length() const { return cores_.size(); }
    [[nodiscard]] const std::vector<int>& degrees() const { return degrees_; }
    [[nodiscard]] const std::vector<tt::Core>& cores() const { return cores_; }
    [[nodiscard]] const tt::Core& core(std::size_t l) const { return cores_.at(l); }
    [[nodiscard]] Index rank(std::size_t l) const; ///< s_l, l = 0..L (s_0 = s_1 width of a0)
    [[nodiscard]] Index first_rank() const { return a0_.cols(); }
    [[nodiscard]] const Matrix& a0_nodes() const { return a0_; }
    [[nodiscard]] const PhysicalQuadrature& quadrature() const { return quad_; }
    [[nodiscard]] const chaos::MeasureParams& measure() const { return measure_; }

    /// a0[k](x) for all k, by back-substitution.
    [[nodiscard]] Vector a0_at(double x1, double x2) const;
    /// Rows a0[.](x_i) for a list of points.
    [[nodiscard]] Matrix a0_at(std::span<const double> x1, std::span<const double> x2) const;

    /// Contraction of all stochastic cores at y: vector of length s_1.
    [[nodiscard]] Vector contract_stochastic(std::span<const double> y) const;
    /// Contraction of every stochastic core at nu = 0 (coefficient mean).
    [[nodiscard]] Vector mean_weights() const;

    /// Mean coefficient at the quadrature nodes.
    [[nodiscard]] Vector mean_at_nodes() const;
    [[nodiscard]] double mean_at(double x1, double x2) const;
    /// Compressed coefficient at quadrature node q and parameter y.
    [[nodiscard]] double eval_node(Index q, std::span<const double> y) const;
    [[nodiscard]] double eval(double x1, double x2, std::span<const double> y) const;

    [[nodiscard]] std::string to_json() const;
    static CoeffTT from_json(const std::string& text);

private:
    FieldSpec spec_;
    std::vector<int> degrees_;
    std::vector<tt::Core> cores_;
    Matrix a0_;
    PhysicalQuadrature quad_;
    chaos::MeasureParams measure_;
};

/// Right-to-left coefficient splitting. degrees[l] is the number of Hermite
/// coefficients q_l kept in mode l+1; the splitting length is degrees.size().
CoeffTT split_coefficient(const FieldSpec& spec, const std::vector<int>& degrees, Index s_max);

/// Monte Carlo relative RMS error against the exact field truncated at the
/// coefficient length.
double coeff_rrms(const CoeffTT& c, int n_samples, std::mt19937_64& rng);

} // namespace ttasgfem::lognormal
