#include "chaos.hpp"

#include <array>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace ttasgfem::chaos {

namespace {

constexpr int kExactFactorialMax = 20;

// Extended precision keeps the closed form correctly rounded after the
// final conversion to double.
constexpr std::array<long double, kExactFactorialMax + 1> make_factorials() {
    std::array<long double, kExactFactorialMax + 1> f{};
    f[0] = 1.0L;
    for (int i = 1; i <= kExactFactorialMax; ++i) f[i] = f[i - 1] * i;
    return f;
}

constexpr auto kFactorials = make_factorials();

double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

} // namespace

double hermite_eval(int n, double y) {
    if (n < 0) throw DimensionError("hermite_eval: negative degree");
    if (n == 0) return 1.0;
    double prev = 1.0;
    double cur = y;
    for (int k = 1; k < n; ++k) {
        const double next = (y * cur - std::sqrt(static_cast<double>(k)) * prev) /
                            std::sqrt(static_cast<double>(k + 1));
        prev = cur;
        cur = next;
    }
    return cur;
}

std::vector<double> hermite_all(int n_max, double y) {
    if (n_max < 0) return {};
    std::vector<double> h(static_cast<std::size_t>(n_max) + 1);
    h[0] = 1.0;
    if (n_max >= 1) h[1] = y;
    for (int k = 1; k < n_max; ++k) {
        h[k + 1] = (y * h[k] - std::sqrt(static_cast<double>(k)) * h[k - 1]) /
                   std::sqrt(static_cast<double>(k + 1));
    }
    return h;
}

double triple_product(int nu, int mu, int eta) {
    if (nu < 0 || mu < 0 || eta < 0) return 0.0;
    if ((nu + mu + eta) % 2 != 0) return 0.0;
    if (eta < std::abs(nu - mu) || eta > nu + mu) return 0.0;
    const int xi = (nu + mu - eta) / 2;
    if (std::max({nu, mu, eta}) <= kExactFactorialMax) {
        const long double num = std::sqrt(kFactorials[nu] * kFactorials[mu] * kFactorials[eta]);
        return static_cast<double>(num / (kFactorials[xi] * kFactorials[nu - xi] * kFactorials[mu - xi]));
    }
    const double log_value =
        0.5 * (log_factorial(nu) + log_factorial(mu) + log_factorial(eta)) -
        log_factorial(xi) - log_factorial(nu - xi) - log_factorial(mu - xi);
    return std::exp(log_value);
}

std::vector<double> exp_coeffs(double t, int n_max) {
    if (n_max < 0) return {};
    std::vector<double> c(static_cast<std::size_t>(n_max) + 1);
    // c_n = c_{n-1} * t / sqrt(n)
    c[0] = std::exp(0.5 * t * t);
    for (int n = 1; n <= n_max; ++n) c[n] = c[n - 1] * t / std::sqrt(static_cast<double>(n));
    return c;
}

QuadratureRule gauss_hermite(int n) {
    if (n < 1) throw DimensionError("gauss_hermite: need at least one node");
    QuadratureRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    if (n == 1) {
        rule.nodes[0] = 0.0;
        rule.weights[0] = 1.0;
        return rule;
    }
    // Jacobi matrix of the monic probabilists' recurrence: zero diagonal,
    // off-diagonal sqrt(k).
    Vector diag = Vector::Zero(n);
    Vector sub(n - 1);
    for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Matrix> eig;
    eig.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (eig.info() != Eigen::Success) throw SolverError("gauss_hermite: eigensolver failed");
    // Eigenvector components lose relative accuracy for the tiny tail
    // weights, so the nodes are polished by Newton steps on h_n and the
    // weights taken from the Christoffel-Darboux form 1 / (n h_{n-1}(x)^2).
    const auto h_pair = [n](double x) {
        double hm1 = 0.0, h = 1.0;
        for (int k = 0; k < n; ++k) {
            const double hp = (x * h - std::sqrt(static_cast<double>(k)) * hm1) / std::sqrt(static_cast<double>(k + 1));
            hm1 = h;
            h = hp;
        }
        return std::pair<double, double>{h, hm1}; // h_n(x), h_{n-1}(x)
    };
    for (int i = 0; i < n; ++i) {
        double x = eig.eigenvalues()(i);
        for (int it = 0; it < 3; ++it) {
            const auto [hn, hn1] = h_pair(x);
            const double step = hn / (std::sqrt(static_cast<double>(n)) * hn1);
            if (!std::isfinite(step)) break;
            x -= step;
        }
        const auto [hn, hn1] = h_pair(x);
        (void)hn;
        rule.nodes[i] = x;
        rule.weights[i] = 1.0 / (n * hn1 * hn1);
    }
    // Enforce the exact symmetry of the rule.
    for (int i = 0; i < n / 2; ++i) {
        const int j = n - 1 - i;
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = w;
        rule.weights[j] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    double total = 0.0;
    for (double w : rule.weights) total += w;
    for (double& w : rule.weights) w /= total;
    return rule;
}

int quadrature_points_for_degree(int degree) {
    if (degree < 0) degree = 0;
    return (degree + 1) / 2 + 2;
}

MeasureParams::MeasureParams(std::vector<double> beta, double rho, double theta)
    : beta_(std::move(beta)), rho_(rho), theta_(theta) {
    if (!(rho_ > 0.0)) throw ConfigError("MeasureParams: rho must be positive");
    if (!(theta_ > 0.0 && theta_ < 1.0)) throw ConfigError("MeasureParams: theta must lie in (0,1)");
    for (std::size_t m = 0; m < beta_.size(); ++m) {
        if (beta_[m] < 0.0) throw ConfigError("MeasureParams: negative decay magnitude");
        const double s = sigma(m);
        if (s * s >= 2.0) {
            throw ConfigError("MeasureParams: sigma^2 >= 2 in dimension " + std::to_string(m + 1) +
                              " (squared density not normalisable)");
        }
    }
}

double MeasureParams::sigma(std::size_t m) const { return std::exp(theta_ * rho_ * beta(m)); }

double MeasureParams::sigma_prime(std::size_t m) const {
    const double s = sigma(m);
    return s / std::sqrt(2.0 - s * s);
}

double MeasureParams::c_sigma(std::size_t m) const {
    const double s = sigma(m);
    return 1.0 / (s * std::sqrt(2.0 - s * s));
}

double scaled_hermite_eval(int n, double y, double sigma) { return hermite_eval(n, y / sigma); }

GramianPair gramians(std::size_t m, int d, int z, const MeasureParams& params) {
    if (d < 1 || z < 1) throw DimensionError("gramians: sizes must be positive");
    const double sigma = params.sigma(m);
    if (sigma * sigma >= 2.0) throw ConfigError("gramians: sigma^2 >= 2");
    const double sigma_p = params.sigma_prime(m);
    const double c_sigma = params.c_sigma(m);

    GramianPair g;
    g.dim = m;
    const int max_deg = std::max(d, z) - 1;
    const QuadratureRule rule = gauss_hermite(quadrature_points_for_degree(2 * max_deg));

    g.Z = Matrix::Zero(d, d);
    g.Ztilde = Matrix::Zero(z, z);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double x = rule.nodes[q];
        const double w = rule.weights[q];
        // y ~ N(0,1): H_mu(y / sigma)
        const auto h = hermite_all(d - 1, x / sigma);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) g.Z(i, j) += w * h[i] * h[j];
        // y ~ N(0, sigma'^2), weighted by c_sigma
        const auto ht = hermite_all(z - 1, sigma_p * x / sigma);
        for (int i = 0; i < z; ++i)
            for (int j = 0; j < z; ++j) g.Ztilde(i, j) += c_sigma * w * ht[i] * ht[j];
    }
    // Symmetric by construction; remove the last-bit asymmetry of the sums.
    g.Z = 0.5 * (g.Z + g.Z.transpose()).eval();
    g.Ztilde = 0.5 * (g.Ztilde + g.Ztilde.transpose()).eval();
    return g;
}

} // namespace ttasgfem::chaos
