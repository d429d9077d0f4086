#include "adapt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

namespace ttasgfem::adapt {

const char* branch_name(Branch b) {
    switch (b) {
    case Branch::Det: return "DET";
    case Branch::Param: return "PARAM";
    case Branch::Rank: return "RANK";
    }
    return "?";
}

std::vector<int> mark_doerfler(const std::vector<double>& values, double frac) {
    if (!(frac >= 0.0 && frac <= 1.0)) throw ConfigError("mark_doerfler: fraction must lie in [0, 1]");
    double total = 0.0;
    for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("mark_doerfler: values must be finite and >= 0");
        total += v;
    }
    if (total <= 0.0) return {};
    std::vector<int> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] > values[b]; });
    const double target = frac * total;
    std::vector<int> marked;
    double sum = 0.0;
    for (int i : order) {
        if (sum >= target && !marked.empty()) break;
        marked.push_back(i);
        sum += values[static_cast<std::size_t>(i)];
    }
    return marked;
}

std::vector<int> refine_stochastic(const std::vector<int>& degrees, const std::vector<int>& marked) {
    std::vector<int> out = degrees;
    const int M = static_cast<int>(degrees.size());
    bool activate = false;
    for (int m : marked) {
        if (m < 0 || m > M) throw DimensionError("refine_stochastic: marked mode out of range");
        if (m == M)
            activate = true;
        else
            ++out[static_cast<std::size_t>(m)];
    }
    if (activate) out.push_back(2);
    return out;
}

tt::TTTensor pad_solution(const tt::TTTensor& W, const std::vector<int>& new_degrees) {
    const std::size_t M = W.order() - 1;
    if (new_degrees.size() < M) throw DimensionError("pad_solution: modes cannot be removed");
    std::vector<tt::Core> cores;
    cores.reserve(new_degrees.size() + 1);
    cores.push_back(W.core(0));
    for (std::size_t m = 0; m < M; ++m) {
        const auto& old = W.core(m + 1);
        const Index n = new_degrees[m];
        if (n < old.mode_size()) throw DimensionError("pad_solution: degrees cannot decrease");
        tt::Core c(old.left_rank(), n, old.right_rank());
        for (Index b = 0; b < old.right_rank(); ++b)
            for (Index i = 0; i < old.mode_size(); ++i)
                for (Index a = 0; a < old.left_rank(); ++a) c(a, i, b) = old(a, i, b);
        cores.push_back(std::move(c));
    }
    for (std::size_t m = M; m < new_degrees.size(); ++m) {
        tt::Core c(1, new_degrees[m], 1);
        c(0, 0, 0) = 1.0;
        cores.push_back(std::move(c));
    }
    return tt::TTTensor(std::move(cores));
}

tt::TTTensor refine_rank(const tt::TTTensor& W, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Vector> factors;
    for (Index n : W.dims()) {
        Vector v(n);
        for (Index i = 0; i < n; ++i) v(i) = gauss(rng);
        v.normalize();
        factors.push_back(std::move(v));
    }
    const double nw = tt::norm(W);
    const double delta = nw > 0.0 ? 1e-6 * nw : 1.0;
    return tt::add(W, tt::scale(tt::TTTensor::rank_one(factors), delta));
}

tt::TTTensor prolongate_solution(const tt::TTTensor& W, const fem::Mesh& coarse, const fem::Mesh& fine) {
    const auto& c0 = W.core(0);
    const Index r = c0.right_rank();
    if (c0.mode_size() != coarse.n_free()) throw DimensionError("prolongate_solution: physical core does not match mesh");
    tt::Core out(1, fine.n_free(), r);
    for (Index k = 0; k < r; ++k) {
        Vector coarse_free(c0.mode_size());
        for (Index i = 0; i < c0.mode_size(); ++i) coarse_free(i) = c0(0, i, k);
        const Vector fine_free = fem::restrict_free(fine, fem::prolongate(fine, fem::expand_free(coarse, coarse_free)));
        for (Index i = 0; i < fine.n_free(); ++i) out(0, i, k) = fine_free(i);
    }
    std::vector<tt::Core> cores = W.cores();
    cores[0] = std::move(out);
    return tt::TTTensor(std::move(cores));
}

void AdaptConfig::validate() const {
    lognormal::FieldSpec f = field;
    f.L = std::max(f.L, 1);
    f.M_trunc = std::max(f.M_trunc, f.L);
    f.validate();
    if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in (0, 1]");
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (max_tt_dofs < 1) throw ConfigError("max_tt_dofs must be >= 1");
    if (rank_cap < 1) throw ConfigError("rank_cap must be >= 1");
    if (s_max < 1) throw ConfigError("s_max must be >= 1");
    if (buffer_degree < 1) throw ConfigError("buffer_degree must be >= 1");
    if (initial_mesh < 1) throw ConfigError("initial_mesh must be >= 1");
    if (initial_degree < 1) throw ConfigError("initial_degree must be >= 1");
    if (initial_rank < 1) throw ConfigError("initial_rank must be >= 1");
    if (!(als.tol > 0.0) || als.max_sweeps < 1) throw ConfigError("invalid ALS options");
}

Branch argmax_branch(double det, double param, double disc) {
    if (det >= param && det >= disc) return Branch::Det;
    if (param >= disc) return Branch::Param;
    return Branch::Rank;
}

namespace {

std::vector<int> coefficient_degrees(const std::vector<int>& degrees, int buffer) {
    std::vector<int> q;
    q.reserve(degrees.size() + 1);
    for (int d : degrees) q.push_back(2 * d - 1);
    q.push_back(buffer);
    return q;
}

std::vector<double> to_std(const Vector& v) {
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v(i);
    return out;
}

} // namespace

RunResult run(const AdaptConfig& cfg, const IterationCallback& on_iteration) {
    cfg.validate();
    RunResult result;
    std::mt19937_64 rng(cfg.seed);

    fem::Mesh mesh = fem::initial_mesh(cfg.initial_mesh);
    std::vector<int> degrees{cfg.initial_degree};
    std::vector<Index> dims{mesh.n_free(), static_cast<Index>(cfg.initial_degree)};
    tt::TTTensor W = galerkin::random_start(dims, cfg.initial_rank, rng());

    std::optional<lognormal::CoeffTT> coeff;
    std::vector<int> coeff_degrees;

    try {
        for (int it = 1; it <= cfg.max_iterations; ++it) {
            const auto q = coefficient_degrees(degrees, cfg.buffer_degree);
            if (!coeff || q != coeff_degrees) {
                lognormal::FieldSpec spec = cfg.field;
                spec.L = static_cast<int>(q.size());
                spec.M_trunc = std::max(spec.M_trunc, spec.L);
                coeff.emplace(lognormal::split_coefficient(spec, q, cfg.s_max));
                coeff_degrees = q;
            }
            const auto problem = galerkin::build_problem(*coeff, mesh, degrees, cfg.f);
            const auto als = galerkin::als_solve(problem, W, cfg.als);
            W = als.w;
            const auto rep = estimate::estimate_all(problem, W, *coeff, mesh, cfg.f);

            IterationRecord rec;
            rec.iteration = it;
            rec.M = static_cast<int>(degrees.size());
            rec.d_max = *std::max_element(degrees.begin(), degrees.end());
            rec.r_max = W.max_rank();
            rec.m_dofs = mesh.n_free();
            rec.tt_dofs = tt::tt_dofs(W);
            rec.op_dofs = tt::op_dofs(problem.op);
            rec.eta_det = rep.eta_det;
            rec.eta_param = rep.eta_param;
            rec.eta_disc = rep.eta_disc;
            rec.eta_all = rep.eta_all;
            rec.als_sweeps = als.sweeps;
            rec.als_converged = als.converged;
            rec.degrees = degrees;
            rec.eta_param_dim = rep.param.per_dim;

            // Branch choice; a capped rank falls back to the larger of the
            // two remaining estimators.
            Branch branch = argmax_branch(rep.eta_det, rep.eta_param, rep.eta_disc);
            if (branch == Branch::Rank && W.max_rank() >= cfg.rank_cap)
                branch = rep.eta_det >= rep.eta_param ? Branch::Det : Branch::Param;
            rec.tag = branch;

            Snapshot snap{mesh, degrees, W};
            result.log.push_back(rec);
            if (on_iteration) on_iteration(result.log.back(), snap);
            result.snapshots.push_back(std::move(snap));

            if (rep.eta_all <= cfg.eps) {
                result.converged = true;
                result.message = "tolerance reached";
                break;
            }
            if (rec.tt_dofs >= cfg.max_tt_dofs) {
                result.message = "tt-dofs budget reached";
                break;
            }
            if (it == cfg.max_iterations) {
                result.message = "iteration limit reached";
                break;
            }

            switch (branch) {
            case Branch::Det: {
                auto marked = mark_doerfler(to_std(rep.det.mark2), cfg.theta * cfg.theta);
                if (marked.empty()) {
                    marked.resize(static_cast<std::size_t>(mesh.n_triangles()));
                    std::iota(marked.begin(), marked.end(), 0);
                }
                fem::Mesh fine = fem::refine(mesh, marked, cfg.mark_rule);
                W = prolongate_solution(W, mesh, fine);
                mesh = std::move(fine);
                break;
            }
            case Branch::Param: {
                std::vector<double> v2;
                for (double e : rep.param.per_dim) v2.push_back(e * e);
                auto marked = mark_doerfler(v2, cfg.theta * cfg.theta);
                if (marked.empty()) marked.push_back(static_cast<int>(degrees.size()));
                degrees = refine_stochastic(degrees, marked);
                W = pad_solution(W, degrees);
                break;
            }
            case Branch::Rank: W = refine_rank(W, rng); break;
            }
        }
    } catch (const SolverError& e) {
        result.failed = true;
        result.message = e.what();
    }
    return result;
}

} // namespace ttasgfem::adapt
