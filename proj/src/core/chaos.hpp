#pragma once

#include <span>
#include <vector>

#include "common.hpp"

/// Hermite chaos algebra: univariate orthonormal Hermite polynomials, their
/// triple products and exponential expansions, Gauss-Hermite rules and the
/// Gramians of the rescaled basis under the reference and squared densities.
///
/// Convention: probabilists' Hermite polynomials normalised so that
/// int H_n H_m dN(0,1) = delta_nm. They obey the recurrence
///
///     H_0 = 1,  H_1(y) = y,
///     H_{n+1}(y) = (y H_n(y) - sqrt(n) H_{n-1}(y)) / sqrt(n+1).
///
/// Stochastic dimensions are indexed from 0 in this API (dimension m = 0 is
/// the first random variable y_1).
namespace ttasgfem::chaos {

double hermite_eval(int n, double y);

/// Values H_0(y), ..., H_{n_max}(y).
std::vector<double> hermite_all(int n_max, double y);

/// kappa_{nu,mu,eta} = int H_nu H_mu H_eta dN(0,1). Zero unless nu+mu+eta is
/// even and the triangle inequality holds.
double triple_product(int nu, int mu, int eta);

/// Coefficients c_n = t^n / sqrt(n!) exp(t^2/2), n = 0..n_max, of exp(t Y)
/// expanded in H_n(Y).
std::vector<double> exp_coeffs(double t, int n_max);

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Hermite rule for N(0,1) (Golub-Welsch). Weights sum to one,
/// exact for polynomials up to degree 2n-1.
QuadratureRule gauss_hermite(int n);

/// Node count used for an integrand of polynomial degree `degree`.
int quadrature_points_for_degree(int degree);

/// Per-dimension measure scaling. sigma_m = exp(theta rho beta_m) is the
/// standard deviation of the weighted Gaussian gamma_{theta rho}; the squared
/// density zeta^2 dgamma equals c_sigma * dN(0, sigma'^2).
class MeasureParams {
public:
    MeasureParams(std::vector<double> beta, double rho, double theta);

    [[nodiscard]] std::size_t size() const { return beta_.size(); }
    [[nodiscard]] const std::vector<double>& beta() const { return beta_; }
    [[nodiscard]] double rho() const { return rho_; }
    [[nodiscard]] double theta() const { return theta_; }

    /// Dimensions beyond the stored decay sequence have beta = 0 (sigma = 1).
    [[nodiscard]] double beta(std::size_t m) const { return m < beta_.size() ? beta_[m] : 0.0; }
    [[nodiscard]] double sigma(std::size_t m) const;
    [[nodiscard]] double sigma_prime(std::size_t m) const;
    [[nodiscard]] double c_sigma(std::size_t m) const;

private:
    std::vector<double> beta_;
    double rho_;
    double theta_;
};

/// Scaled Hermite polynomial H_n(y / sigma_m).
double scaled_hermite_eval(int n, double y, double sigma);

struct GramianPair {
    std::size_t dim = 0;
    Matrix Z;      ///< int H^tau_mu H^tau_mu' dgamma, size d x d
    Matrix Ztilde; ///< int H^tau_eta H^tau_eta' zeta^2 dgamma, size z x z
};

/// Gramians of the rescaled basis in dimension m. Z has size d, Ztilde size z.
GramianPair gramians(std::size_t m, int d, int z, const MeasureParams& params);

} // namespace ttasgfem::chaos
