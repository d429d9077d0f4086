#include "lognormal.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

namespace ttasgfem::lognormal {

void FieldSpec::validate() const {
    if (!(amp >= 0.0) || !std::isfinite(amp)) throw ConfigError("field: amp must be finite and non-negative");
    if (!(decay > 1.0)) throw ConfigError("field: decay must exceed 1");
    if (L < 1) throw ConfigError("field: expansion length must be at least 1");
    if (M_trunc < L) throw ConfigError("field: M_trunc must be at least the expansion length");
    if (quad_cells < 1 || quad_order < 1) throw ConfigError("field: quadrature grid must be non-empty");
    if (!(rho > 0.0)) throw ConfigError("field: rho must be positive");
    if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("field: theta must lie in (0,1)");
}

double FieldSpec::beta(int m) const {
    if (m < 1) throw DimensionError("beta: mode index must be >= 1");
    if (nonzero_modes >= 0 && m > nonzero_modes) return 0.0;
    return amp * std::pow(static_cast<double>(m), -decay);
}

chaos::MeasureParams FieldSpec::measure(int n) const {
    std::vector<double> b(static_cast<std::size_t>(std::max(n, 0)));
    for (int m = 1; m <= n; ++m) b[static_cast<std::size_t>(m - 1)] = beta(m);
    return chaos::MeasureParams(std::move(b), rho, theta);
}

std::pair<int, int> mode_frequencies(int m) {
    if (m < 1) throw DimensionError("mode_frequencies: mode index must be >= 1");
    int k = static_cast<int>(std::floor(-0.5 + std::sqrt(0.25 + 2.0 * m)));
    // Guard the floating point floor against off-by-one at perfect squares.
    while (k * (k + 1) / 2 > m) --k;
    while ((k + 1) * (k + 2) / 2 <= m) ++k;
    const int r1 = m - k * (k + 1) / 2;
    return {r1, k - r1};
}

double bm_eval(const FieldSpec& spec, int m, double x1, double x2) {
    const double b = spec.beta(m);
    if (b == 0.0) return 0.0;
    const auto [r1, r2] = mode_frequencies(m);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    return b * std::cos(two_pi * r1 * x1) * std::cos(two_pi * r2 * x2);
}

double a_exact(const FieldSpec& spec, double x1, double x2, std::span<const double> y, int M) {
    if (static_cast<int>(y.size()) < M) throw DimensionError("a_exact: parameter vector shorter than truncation");
    double s = 0.0;
    for (int m = 1; m <= M; ++m) s += bm_eval(spec, m, x1, x2) * y[static_cast<std::size_t>(m - 1)];
    return std::exp(s);
}

chaos::QuadratureRule gauss_legendre01(int n) {
    if (n < 1) throw DimensionError("gauss_legendre01: need at least one node");
    chaos::QuadratureRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    if (n == 1) {
        rule.nodes[0] = 0.5;
        rule.weights[0] = 1.0;
        return rule;
    }
    Vector diag = Vector::Zero(n);
    Vector sub(n - 1);
    for (int k = 1; k < n; ++k) sub(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig;
    eig.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (eig.info() != Eigen::Success) throw SolverError("gauss_legendre01: eigensolver failed");
    for (int i = 0; i < n; ++i) {
        const double v0 = eig.eigenvectors()(0, i);
        rule.nodes[i] = 0.5 * (eig.eigenvalues()(i) + 1.0);
        rule.weights[i] = v0 * v0; // 2 v0^2 on [-1,1], halved by the map
    }
    return rule;
}

PhysicalQuadrature PhysicalQuadrature::make(int cells, int order) {
    if (cells < 1 || order < 1) throw ConfigError("PhysicalQuadrature: grid must be non-empty");
    const auto gl = gauss_legendre01(order);
    PhysicalQuadrature q;
    q.cells = cells;
    q.order = order;
    const double h = 1.0 / cells;
    const std::size_t total = static_cast<std::size_t>(cells) * cells * order * order;
    q.x1.reserve(total);
    q.x2.reserve(total);
    q.w.reserve(total);
    for (int cy = 0; cy < cells; ++cy)
        for (int cx = 0; cx < cells; ++cx)
            for (int j = 0; j < order; ++j)
                for (int i = 0; i < order; ++i) {
                    q.x1.push_back((cx + gl.nodes[i]) * h);
                    q.x2.push_back((cy + gl.nodes[j]) * h);
                    q.w.push_back(gl.weights[i] * gl.weights[j] * h * h);
                }
    return q;
}

// ---------------------------------------------------------------------------
// CoeffTT
// ---------------------------------------------------------------------------

CoeffTT::CoeffTT(FieldSpec spec, std::vector<int> degrees, std::vector<tt::Core> cores, Matrix a0_nodes,
                 PhysicalQuadrature quad)
    : spec_(spec), degrees_(std::move(degrees)), cores_(std::move(cores)), a0_(std::move(a0_nodes)),
      quad_(std::move(quad)), measure_(spec.measure(static_cast<int>(degrees_.size()))) {
    if (cores_.empty() || cores_.size() != degrees_.size())
        throw DimensionError("CoeffTT: one core per stochastic mode required");
    if (cores_.back().right_rank() != 1) throw DimensionError("CoeffTT: last core must have right rank 1");
    for (std::size_t l = 0; l < cores_.size(); ++l) {
        if (cores_[l].mode_size() != degrees_[l]) throw DimensionError("CoeffTT: core mode size differs from degree");
        if (l + 1 < cores_.size() && cores_[l].right_rank() != cores_[l + 1].left_rank())
            throw DimensionError("CoeffTT: rank mismatch between cores");
    }
    if (a0_.cols() != cores_.front().left_rank() || a0_.rows() != quad_.size())
        throw DimensionError("CoeffTT: a0 table does not match the first rank or quadrature size");
}

Index CoeffTT::rank(std::size_t l) const {
    if (l >= cores_.size()) return 1;
    return cores_[l].left_rank();
}

Vector CoeffTT::a0_at(double x1, double x2) const {
    Vector g = Vector::Ones(1);
    for (std::size_t l = cores_.size(); l-- > 0;) {
        const tt::Core& c = cores_[l];
        const int q = degrees_[l];
        const int m = static_cast<int>(l) + 1;
        const auto cnu = chaos::exp_coeffs(bm_eval(spec_, m, x1, x2) * measure_.sigma(l), q - 1);
        Vector u(q * c.right_rank());
        for (Index k = 0; k < c.right_rank(); ++k)
            for (int nu = 0; nu < q; ++nu) u(nu + q * k) = cnu[static_cast<std::size_t>(nu)] * g(k);
        g = c.right_unfolding() * u;
    }
    return g;
}

Matrix CoeffTT::a0_at(std::span<const double> x1, std::span<const double> x2) const {
    if (x1.size() != x2.size()) throw DimensionError("CoeffTT::a0_at: coordinate lists differ in length");
    Matrix out(static_cast<Index>(x1.size()), first_rank());
    for (std::size_t i = 0; i < x1.size(); ++i) out.row(static_cast<Index>(i)) = a0_at(x1[i], x2[i]).transpose();
    return out;
}

Vector CoeffTT::contract_stochastic(std::span<const double> y) const {
    if (y.size() < cores_.size()) throw DimensionError("CoeffTT::contract_stochastic: parameter vector too short");
    Vector g = Vector::Ones(1);
    for (std::size_t l = cores_.size(); l-- > 0;) {
        const tt::Core& c = cores_[l];
        const auto h = chaos::hermite_all(degrees_[l] - 1, y[l] / measure_.sigma(l));
        Vector next = Vector::Zero(c.left_rank());
        for (Index i = 0; i < c.mode_size(); ++i) next += h[static_cast<std::size_t>(i)] * (c.slice(i) * g);
        g = std::move(next);
    }
    return g;
}

Vector CoeffTT::mean_weights() const {
    Vector g = Vector::Ones(1);
    for (std::size_t l = cores_.size(); l-- > 0;) g = cores_[l].slice(0) * g;
    return g;
}

Vector CoeffTT::mean_at_nodes() const { return a0_ * mean_weights(); }

double CoeffTT::mean_at(double x1, double x2) const { return a0_at(x1, x2).dot(mean_weights()); }

double CoeffTT::eval_node(Index q, std::span<const double> y) const {
    return a0_.row(q).dot(contract_stochastic(y));
}

double CoeffTT::eval(double x1, double x2, std::span<const double> y) const {
    return a0_at(x1, x2).dot(contract_stochastic(y));
}

namespace {

nlohmann::json spec_to_json(const FieldSpec& s) {
    return {{"amp", s.amp},           {"decay", s.decay},         {"L", s.L},
            {"M_trunc", s.M_trunc},   {"quad_cells", s.quad_cells}, {"quad_order", s.quad_order},
            {"rho", s.rho},           {"theta", s.theta},         {"nonzero_modes", s.nonzero_modes}};
}

FieldSpec spec_from_json(const nlohmann::json& j) {
    FieldSpec s;
    s.amp = j.at("amp").get<double>();
    s.decay = j.at("decay").get<double>();
    s.L = j.at("L").get<int>();
    s.M_trunc = j.at("M_trunc").get<int>();
    s.quad_cells = j.at("quad_cells").get<int>();
    s.quad_order = j.at("quad_order").get<int>();
    s.rho = j.at("rho").get<double>();
    s.theta = j.at("theta").get<double>();
    s.nonzero_modes = j.at("nonzero_modes").get<int>();
    return s;
}

} // namespace

std::string CoeffTT::to_json() const {
    nlohmann::json j;
    j["format"] = "coeff-tt";
    j["field"] = spec_to_json(spec_);
    j["quadrature"] = {{"cells", quad_.cells}, {"order", quad_.order}};
    j["degrees"] = degrees_;
    nlohmann::json cores = nlohmann::json::array();
    for (const auto& c : cores_) {
        std::vector<double> rm;
        for (Index a = 0; a < c.left_rank(); ++a)
            for (Index i = 0; i < c.mode_size(); ++i)
                for (Index b = 0; b < c.right_rank(); ++b) rm.push_back(c(a, i, b));
        cores.push_back({{"shape", {c.left_rank(), c.mode_size(), c.right_rank()}}, {"data", rm}});
    }
    j["cores"] = std::move(cores);
    return j.dump();
}

CoeffTT CoeffTT::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        if (j.value("format", std::string()) != "coeff-tt") throw ConfigError("CoeffTT::from_json: not a coeff-tt document");
        FieldSpec spec = spec_from_json(j.at("field"));
        auto quad = PhysicalQuadrature::make(j.at("quadrature").at("cells").get<int>(),
                                             j.at("quadrature").at("order").get<int>());
        auto degrees = j.at("degrees").get<std::vector<int>>();
        std::vector<tt::Core> cores;
        for (const auto& cj : j.at("cores")) {
            const auto shape = cj.at("shape").get<std::vector<Index>>();
            const auto data = cj.at("data").get<std::vector<double>>();
            if (shape.size() != 3 || static_cast<Index>(data.size()) != shape[0] * shape[1] * shape[2])
                throw ConfigError("CoeffTT::from_json: malformed core");
            tt::Core c(shape[0], shape[1], shape[2]);
            std::size_t p = 0;
            for (Index a = 0; a < shape[0]; ++a)
                for (Index i = 0; i < shape[1]; ++i)
                    for (Index b = 0; b < shape[2]; ++b) c(a, i, b) = data[p++];
            cores.push_back(std::move(c));
        }
        // a0 is re-evaluated from the cores, which reproduces the stored
        // values bit for bit.
        CoeffTT tmp(spec, degrees, cores, Matrix::Zero(quad.size(), cores.front().left_rank()), quad);
        Matrix a0 = tmp.a0_at(quad.x1, quad.x2);
        return CoeffTT(spec, std::move(degrees), std::move(cores), std::move(a0), std::move(quad));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("CoeffTT::from_json: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

CoeffTT split_coefficient(const FieldSpec& spec, const std::vector<int>& degrees, Index s_max) {
    spec.validate();
    if (degrees.empty()) throw DimensionError("split_coefficient: need at least one stochastic mode");
    for (int q : degrees)
        if (q < 1) throw DimensionError("split_coefficient: degrees must be >= 1");
    if (s_max < 1) throw ConfigError("split_coefficient: s_max must be >= 1");
    const std::size_t L = degrees.size();
    const auto measure = spec.measure(static_cast<int>(L));
    auto quad = PhysicalQuadrature::make(spec.quad_cells, spec.quad_order);
    const Index P = quad.size();
    Vector sqrt_w(P);
    for (Index p = 0; p < P; ++p) sqrt_w(p) = std::sqrt(quad.w[static_cast<std::size_t>(p)]);

    std::vector<tt::Core> cores(L);
    Matrix basis = Matrix::Ones(P, 1); // reduced basis of the level to the right
    for (std::size_t l = L; l-- > 0;) {
        const int q = degrees[l];
        const int m = static_cast<int>(l) + 1;
        const Index sr = basis.cols();
        const double sigma = measure.sigma(l);
        // F(p, nu + q k') = c_nu(x_p) * basis(p, k')
        Matrix F(P, q * sr);
        for (Index p = 0; p < P; ++p) {
            const auto cnu = chaos::exp_coeffs(
                bm_eval(spec, m, quad.x1[static_cast<std::size_t>(p)], quad.x2[static_cast<std::size_t>(p)]) * sigma,
                q - 1);
            for (Index k = 0; k < sr; ++k)
                for (int nu = 0; nu < q; ++nu) F(p, nu + q * k) = cnu[static_cast<std::size_t>(nu)] * basis(p, k);
        }
        const Matrix G = sqrt_w.asDiagonal() * F;
        Matrix C = Matrix::Zero(G.cols(), G.cols());
        C.selfadjointView<Eigen::Lower>().rankUpdate(G.transpose());
        C = C.selfadjointView<Eigen::Lower>();
        const Vector lam = Eigen::SelfAdjointEigenSolver<Matrix>(C, Eigen::EigenvaluesOnly).eigenvalues();
        const Index n = lam.size();
        const double lmax = lam(n - 1);
        if (!(lmax > 0.0)) throw SolverError("split_coefficient: correlation matrix has no positive eigenvalue");
        if (lam(0) < -1e-10 * lmax)
            throw SolverError("split_coefficient: strongly negative eigenvalue in mode " + std::to_string(m) +
                              " (broken quadrature)");
        // Eigenvectors of C are the right singular vectors of G. Taking them
        // from the SVD resolves eigenvalues far below the eigensolver's
        // rounding level of C.
        Eigen::BDCSVD<Matrix> svd(G, Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success) throw SolverError("split_coefficient: SVD failed");
        const Vector& sv = svd.singularValues(); // descending
        Index keep = 0;
        while (keep < sv.size() && sv(keep) > 1e-14 * sv(0)) ++keep;
        keep = std::max<Index>(1, std::min(keep, s_max));
        Matrix V(n, keep);
        for (Index k = 0; k < keep; ++k) {
            Vector v = svd.matrixV().col(k);
            Index imax = 0;
            for (Index i = 1; i < n; ++i)
                if (std::abs(v(i)) > std::abs(v(imax))) imax = i;
            if (v(imax) < 0.0) v = -v;
            V.col(k) = v;
        }
        cores[l] = tt::Core::from_right_unfolding(V.transpose(), q, sr);
        basis = F * V;
    }
    return CoeffTT(spec, degrees, std::move(cores), std::move(basis), std::move(quad));
}

double coeff_rrms(const CoeffTT& c, int n_samples, std::mt19937_64& rng) {
    if (n_samples < 1) throw ConfigError("coeff_rrms: need at least one sample");
    const auto& quad = c.quadrature();
    const Index P = quad.size();
    const int L = static_cast<int>(c.length());
    Matrix B(P, L);
    for (Index p = 0; p < P; ++p)
        for (int m = 1; m <= L; ++m)
            B(p, m - 1) = bm_eval(c.spec(), m, quad.x1[static_cast<std::size_t>(p)], quad.x2[static_cast<std::size_t>(p)]);
    const Eigen::Map<const Vector> w(quad.w.data(), P);
    std::normal_distribution<double> normal(0.0, 1.0);
    double acc = 0.0;
    Vector y(L);
    for (int s = 0; s < n_samples; ++s) {
        for (int m = 0; m < L; ++m) y(m) = normal(rng);
        const Vector a = (B * y).array().exp();
        const Vector approx = c.a0_nodes() * c.contract_stochastic(std::span<const double>(y.data(), L));
        const double num = (w.array() * (a - approx).array().square()).sum();
        const double den = (w.array() * a.array().square()).sum();
        acc += num / den;
    }
    return std::sqrt(acc / n_samples);
}

} // namespace ttasgfem::lognormal
