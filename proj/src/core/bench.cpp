#include "bench.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace ttasgfem::bench {

void ExperimentConfig::validate() const {
    adapt.validate();
    if (n_mc < 1) throw ConfigError("n_mc must be >= 1");
    if (ref_refinements < 0) throw ConfigError("ref_refinements must be >= 0");
    if (coeff_degree < 0) throw ConfigError("coeff_degree must be >= 0");
    if (coeff_samples < 1) throw ConfigError("coeff_samples must be >= 1");
    if (!std::isfinite(f_value)) throw ConfigError("f_value must be finite");
    for (const auto& c : coeff_study)
        if (c.L < 1 || c.s_max < 1) throw ConfigError("coeff_study entries need L >= 1 and s_max >= 1");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out))
        throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
    return out;
}

long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end)
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
    return out;
}

int parse_small_int(const std::string& key, const std::string& v) {
    const long long x = parse_int(key, v);
    if (x < -1000000000LL || x > 1000000000LL) throw ConfigError("config: key '" + key + "' is out of range");
    return static_cast<int>(x);
}

std::uint64_t parse_seed(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end)
        throw ConfigError("config: key '" + key + "' expects a non-negative integer, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

fem::MarkRule parse_rule(const std::string& key, const std::string& v) {
    if (v == "bisec1") return fem::MarkRule::Bisect1;
    if (v == "bisec3") return fem::MarkRule::Bisect3;
    throw ConfigError("config: key '" + key + "' expects bisec1 or bisec3, got '" + v + "'");
}

std::vector<CoeffStudyCase> parse_study(const std::string& key, const std::string& v) {
    std::vector<CoeffStudyCase> out;
    if (v == "none") return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw ConfigError("config: key '" + key + "' expects entries 'L:s_max', got '" + item + "'");
        CoeffStudyCase c;
        c.L = parse_small_int(key, trim(item.substr(0, colon)));
        c.s_max = parse_small_int(key, trim(item.substr(colon + 1)));
        out.push_back(c);
    }
    if (out.empty()) throw ConfigError("config: key '" + key + "' is empty (use 'none')");
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"amp", [](auto& c, auto& k, auto& v) { c.adapt.field.amp = parse_double(k, v); }},
        {"decay", [](auto& c, auto& k, auto& v) { c.adapt.field.decay = parse_double(k, v); }},
        {"m_trunc", [](auto& c, auto& k, auto& v) { c.adapt.field.M_trunc = parse_small_int(k, v); }},
        {"measure_rho", [](auto& c, auto& k, auto& v) { c.adapt.field.rho = parse_double(k, v); }},
        {"measure_theta", [](auto& c, auto& k, auto& v) { c.adapt.field.theta = parse_double(k, v); }},
        {"nonzero_modes", [](auto& c, auto& k, auto& v) { c.adapt.field.nonzero_modes = parse_small_int(k, v); }},
        {"quad_cells", [](auto& c, auto& k, auto& v) { c.adapt.field.quad_cells = parse_small_int(k, v); }},
        {"quad_order", [](auto& c, auto& k, auto& v) { c.adapt.field.quad_order = parse_small_int(k, v); }},
        {"mark_theta", [](auto& c, auto& k, auto& v) { c.adapt.theta = parse_double(k, v); }},
        {"refine_rule", [](auto& c, auto& k, auto& v) { c.adapt.mark_rule = parse_rule(k, v); }},
        {"eps", [](auto& c, auto& k, auto& v) { c.adapt.eps = parse_double(k, v); }},
        {"max_iterations", [](auto& c, auto& k, auto& v) { c.adapt.max_iterations = parse_small_int(k, v); }},
        {"max_tt_dofs", [](auto& c, auto& k, auto& v) { c.adapt.max_tt_dofs = parse_int(k, v); }},
        {"rank_cap", [](auto& c, auto& k, auto& v) { c.adapt.rank_cap = parse_small_int(k, v); }},
        {"s_max", [](auto& c, auto& k, auto& v) { c.adapt.s_max = parse_small_int(k, v); }},
        {"buffer_degree", [](auto& c, auto& k, auto& v) { c.adapt.buffer_degree = parse_small_int(k, v); }},
        {"initial_mesh", [](auto& c, auto& k, auto& v) { c.adapt.initial_mesh = parse_small_int(k, v); }},
        {"initial_degree", [](auto& c, auto& k, auto& v) { c.adapt.initial_degree = parse_small_int(k, v); }},
        {"initial_rank", [](auto& c, auto& k, auto& v) { c.adapt.initial_rank = parse_small_int(k, v); }},
        {"seed", [](auto& c, auto& k, auto& v) { c.adapt.seed = parse_seed(k, v); }},
        {"als_tol", [](auto& c, auto& k, auto& v) { c.adapt.als.tol = parse_double(k, v); }},
        {"als_max_sweeps", [](auto& c, auto& k, auto& v) { c.adapt.als.max_sweeps = parse_small_int(k, v); }},
        {"als_dense_threshold",
         [](auto& c, auto& k, auto& v) { c.adapt.als.dense_threshold = parse_small_int(k, v); }},
        {"als_cg_tol", [](auto& c, auto& k, auto& v) { c.adapt.als.cg_rel_tol = parse_double(k, v); }},
        {"als_cg_max_iter", [](auto& c, auto& k, auto& v) { c.adapt.als.cg_max_iter = parse_small_int(k, v); }},
        {"f_value", [](auto& c, auto& k, auto& v) { c.f_value = parse_double(k, v); }},
        {"n_mc", [](auto& c, auto& k, auto& v) { c.n_mc = parse_small_int(k, v); }},
        {"ref_refinements", [](auto& c, auto& k, auto& v) { c.ref_refinements = parse_small_int(k, v); }},
        {"mc", [](auto& c, auto& k, auto& v) { c.mc = parse_bool(k, v); }},
        {"coeff_study", [](auto& c, auto& k, auto& v) { c.coeff_study = parse_study(k, v); }},
        {"coeff_degree", [](auto& c, auto& k, auto& v) { c.coeff_degree = parse_small_int(k, v); }},
        {"coeff_samples", [](auto& c, auto& k, auto& v) { c.coeff_samples = parse_small_int(k, v); }},
    };
    return table;
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10e", x);
    return buf;
}

} // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, _] : setters()) k.push_back(name);
        return k;
    }();
    return keys;
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (!seen.insert(key).second)
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        if (value.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty value for '" + key + "'");
        it->second(cfg, key, value);
    }
    const double fv = cfg.f_value;
    cfg.adapt.f = [fv](double, double) { return fv; };
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

Vector sample_solution(const tt::TTTensor& W, const chaos::MeasureParams& measure, std::span<const double> y) {
    const std::size_t M = W.order() - 1;
    if (y.size() < M) throw DimensionError("sample_solution: parameter vector shorter than the number of modes");
    Vector v = Vector::Ones(1);
    for (std::size_t m = M; m >= 1; --m) {
        const auto& c = W.core(m);
        const double sigma = measure.sigma(m - 1);
        Vector next = Vector::Zero(c.left_rank());
        for (Index i = 0; i < c.mode_size(); ++i) {
            const double h = chaos::scaled_hermite_eval(static_cast<int>(i), y[m - 1], sigma);
            next.noalias() += h * (c.slice(i) * v);
        }
        v = std::move(next);
    }
    const auto& c0 = W.core(0);
    Matrix phys(c0.mode_size(), c0.right_rank());
    for (Index k = 0; k < c0.right_rank(); ++k)
        for (Index i = 0; i < c0.mode_size(); ++i) phys(i, k) = c0(0, i, k);
    return phys * v;
}

ReferenceSolver::ReferenceSolver(const lognormal::FieldSpec& spec, fem::Mesh mesh, const fem::ScalarField& f)
    : spec_(spec), mesh_(std::move(mesh)) {
    spec_.validate();
    const auto q = fem::element_quadrature(mesh_);
    const Index nq = static_cast<Index>(q.w.size());
    bq_.resize(nq, spec_.M_trunc);
    for (int m = 1; m <= spec_.M_trunc; ++m)
        for (Index p = 0; p < nq; ++p)
            bq_(p, m - 1) = lognormal::bm_eval(spec_, m, q.x1[static_cast<std::size_t>(p)], q.x2[static_cast<std::size_t>(p)]);
    load_ = fem::assemble_load(mesh_, f);
}

Vector ReferenceSolver::solve(std::span<const double> y) {
    if (static_cast<int>(y.size()) < spec_.M_trunc)
        throw DimensionError("ReferenceSolver: parameter vector shorter than M_trunc");
    const Eigen::Map<const Vector> ym(y.data(), spec_.M_trunc);
    const Vector s = bq_ * ym;
    const Index nt = mesh_.n_triangles();
    Matrix a_qp(nt, 3);
    for (Index t = 0; t < nt; ++t)
        for (Index j = 0; j < 3; ++j) a_qp(t, j) = std::exp(s(3 * t + j));
    const SparseMatrix K = fem::assemble_stiffness(mesh_, a_qp);
    if (!analyzed_) {
        llt_.analyzePattern(K);
        analyzed_ = true;
    }
    llt_.factorize(K);
    if (llt_.info() != Eigen::Success) throw SolverError("reference solve: sampled system is not positive definite");
    Vector u = llt_.solve(load_);
    if (llt_.info() != Eigen::Success || !u.allFinite()) throw SolverError("reference solve failed");
    return u;
}

McReport mc_errors(const std::vector<adapt::Snapshot>& snapshots, ReferenceSolver& ref,
                   const lognormal::FieldSpec& spec, int n_mc, std::uint64_t seed) {
    if (n_mc < 1) throw ConfigError("mc_errors: need at least one sample");
    McReport rep;
    std::size_t max_m = 0;
    for (const auto& s : snapshots) max_m = std::max(max_m, s.degrees.size());
    const std::size_t ylen = std::max<std::size_t>(static_cast<std::size_t>(spec.M_trunc), max_m);
    const auto measure = spec.measure(static_cast<int>(std::max<std::size_t>(max_m, 1)));
    const fem::Mesh& fine = ref.mesh();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> err2(snapshots.size(), 0.0);
    double ref2 = 0.0;
    std::vector<double> y(ylen);
    for (int i = 0; i < n_mc; ++i) {
        Vector u;
        for (int attempt = 0;; ++attempt) {
            for (auto& v : y) v = gauss(rng);
            try {
                u = ref.solve(y);
                break;
            } catch (const SolverError&) {
                ++rep.resampled;
                if (attempt >= 10) throw;
            }
        }
        const Vector u_full = fem::expand_free(fine, u);
        const double nu = fem::h1_seminorm_full(fine, u_full);
        ref2 += nu * nu;
        for (std::size_t s = 0; s < snapshots.size(); ++s) {
            const auto& snap = snapshots[s];
            const Vector w = sample_solution(snap.W, measure, y);
            const Vector w_fine = fem::prolongate(fine, fem::expand_free(snap.mesh, w));
            const double e = fem::h1_seminorm_full(fine, u_full - w_fine);
            err2[s] += e * e;
        }
    }
    rep.rrms.resize(snapshots.size());
    for (std::size_t s = 0; s < snapshots.size(); ++s) rep.rrms[s] = ref2 > 0.0 ? std::sqrt(err2[s] / ref2) : 0.0;
    return rep;
}

double mc_error(const adapt::Snapshot& snap, ReferenceSolver& ref, const lognormal::FieldSpec& spec, int n_mc,
                std::uint64_t seed) {
    return mc_errors({snap}, ref, spec, n_mc, seed).rrms.front();
}

const std::string& convergence_header() {
    static const std::string h =
        "iteration,tag,M,d_max,r_max,m_dofs,tt_dofs,op_dofs,eta_det,eta_param,eta_disc,eta_all,mc_rrms,seed";
    return h;
}

void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows, std::uint64_t seed) {
    out << convergence_header() << '\n';
    for (const auto& row : rows) {
        const auto& r = row.rec;
        out << r.iteration << ',' << adapt::branch_name(r.tag) << ',' << r.M << ',' << r.d_max << ',' << r.r_max << ','
            << r.m_dofs << ',' << r.tt_dofs << ',' << r.op_dofs << ',' << fmt(r.eta_det) << ',' << fmt(r.eta_param)
            << ',' << fmt(r.eta_disc) << ',' << fmt(r.eta_all) << ',' << (row.mc_rrms ? fmt(*row.mc_rrms) : "") << ','
            << seed << '\n';
    }
}

const std::string& coefficient_header() {
    static const std::string h = "L,q,s_max,rank,rrms,tt_dofs,wall_seconds,seed";
    return h;
}

CoeffStudyRow run_coefficient_case(const lognormal::FieldSpec& spec, const CoeffStudyCase& c, int degree,
                                   int n_samples, std::uint64_t seed) {
    lognormal::FieldSpec s = spec;
    s.L = c.L;
    s.M_trunc = std::max(s.M_trunc, c.L);
    const std::vector<int> q(static_cast<std::size_t>(c.L), degree + 1);
    const auto t0 = std::chrono::steady_clock::now();
    const auto coeff = lognormal::split_coefficient(s, q, c.s_max);
    const auto t1 = std::chrono::steady_clock::now();
    CoeffStudyRow row;
    row.L = c.L;
    row.q = degree + 1;
    row.s_max = c.s_max;
    for (std::size_t l = 0; l <= coeff.length(); ++l) row.rank = std::max(row.rank, coeff.rank(l));
    for (const auto& core : coeff.cores()) row.tt_dofs += core.size();
    row.seconds = std::chrono::duration<double>(t1 - t0).count();
    std::mt19937_64 rng(seed);
    row.rrms = lognormal::coeff_rrms(coeff, n_samples, rng);
    return row;
}

void write_coefficient_csv(std::ostream& out, const std::vector<CoeffStudyRow>& rows, std::uint64_t seed) {
    out << coefficient_header() << '\n';
    char buf[32];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.3f", r.seconds);
        out << r.L << ',' << r.q << ',' << r.s_max << ',' << r.rank << ',' << fmt(r.rrms) << ',' << r.tt_dofs << ','
            << buf << ',' << seed << '\n';
    }
}

std::uint64_t mc_seed(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x4d43u};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
    cfg.validate();
    ExperimentResult res;
    auto cb = [&](const adapt::IterationRecord& r, const adapt::Snapshot&) {
        if (log)
            *log << "iteration " << r.iteration << ": " << adapt::branch_name(r.tag) << " M=" << r.M
                 << " d_max=" << r.d_max << " r_max=" << r.r_max << " N=" << r.m_dofs << " tt-dofs=" << r.tt_dofs
                 << " eta_all=" << fmt(r.eta_all) << " sweeps=" << r.als_sweeps;
        if (log) {
            *log << " eta_param_dim=";
            for (std::size_t m = 0; m < r.eta_param_dim.size(); ++m)
                *log << (m ? "/" : "") << fmt(r.eta_param_dim[m]);
            *log << std::endl;
        }
    };
    res.run = adapt::run(cfg.adapt, cb);
    for (const auto& r : res.run.log) res.rows.push_back({r, std::nullopt});
    res.message = res.run.message;
    if (res.run.failed || !cfg.mc || res.run.snapshots.empty()) return res;

    try {
        const auto& last = res.run.snapshots.back();
        fem::Mesh ref_mesh = fem::refine_uniform(last.mesh, cfg.ref_refinements);
        if (log)
            *log << "Monte Carlo: " << cfg.n_mc << " reference solves with " << ref_mesh.n_free() << " dofs"
                 << std::endl;
        ReferenceSolver ref(cfg.adapt.field, std::move(ref_mesh), cfg.adapt.f);
        const auto mc = mc_errors(res.run.snapshots, ref, cfg.adapt.field, cfg.n_mc, mc_seed(cfg.adapt.seed));
        for (std::size_t i = 0; i < res.rows.size(); ++i) res.rows[i].mc_rrms = mc.rrms[i];
        if (log && mc.resampled > 0) *log << "Monte Carlo: " << mc.resampled << " samples redrawn" << std::endl;
    } catch (const SolverError& e) {
        res.mc_failed = true;
        res.message = e.what();
    }
    return res;
}

} // namespace ttasgfem::bench
