#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "estimate.hpp"
#include "fem.hpp"
#include "galerkin.hpp"
#include "lognormal.hpp"
#include "ttcore.hpp"

/// Adaptive driver: solve, estimate, refine exactly one of mesh, stochastic
/// degrees or TT rank, repeat.
namespace ttasgfem::adapt {

enum class Branch { Det, Param, Rank };

const char* branch_name(Branch b);

/// Indices of the minimal set of largest values whose sum reaches
/// frac * total. Values are sorted descending with ties broken by the lower
/// index. Returns an empty set when every value is zero.
std::vector<int> mark_doerfler(const std::vector<double>& values, double frac);

/// Increments d_m for marked active modes m < M; marking m == M activates a
/// new mode with d = 2.
std::vector<int> refine_stochastic(const std::vector<int>& degrees, const std::vector<int>& marked);

/// Embeds W into the refined degree set by zero padding; newly activated
/// modes get the core e_0.
tt::TTTensor pad_solution(const tt::TTTensor& W, const std::vector<int>& new_degrees);

/// W + delta G with a random unit-norm rank-one G and delta = 1e-6 ||W||
/// (1 when W = 0). Every link rank grows by one.
tt::TTTensor refine_rank(const tt::TTTensor& W, std::mt19937_64& rng);

/// Interpolates the physical core onto a mesh refined from the current one.
tt::TTTensor prolongate_solution(const tt::TTTensor& W, const fem::Mesh& coarse, const fem::Mesh& fine);

struct AdaptConfig {
    lognormal::FieldSpec field;   ///< field.L is ignored; the loop uses L = M + 1
    double theta = 0.5;           ///< Doerfler parameter
    fem::MarkRule mark_rule = fem::MarkRule::Bisect3;
    double eps = 1e-4;            ///< stop when eta_all <= eps
    int max_iterations = 15;
    std::int64_t max_tt_dofs = 200000;
    Index rank_cap = 64;
    Index s_max = 10;             ///< coefficient rank cap
    int buffer_degree = 3;        ///< coefficient degree of the inactive buffer mode
    int initial_mesh = 4;
    int initial_degree = 2;
    Index initial_rank = 2;
    std::uint64_t seed = 1;
    galerkin::AlsOptions als;
    fem::ScalarField f = [](double, double) { return 1.0; };

    void validate() const;
};

struct IterationRecord {
    int iteration = 0;
    Branch tag = Branch::Det;
    int M = 0;
    int d_max = 0;
    Index r_max = 0;
    Index m_dofs = 0;
    std::int64_t tt_dofs = 0;
    std::int64_t op_dofs = 0;
    double eta_det = 0.0;
    double eta_param = 0.0;
    double eta_disc = 0.0;
    double eta_all = 0.0;
    int als_sweeps = 0;
    bool als_converged = false;
    std::vector<int> degrees;
    std::vector<double> eta_param_dim;
};

/// Everything needed to evaluate one iterate afterwards.
struct Snapshot {
    fem::Mesh mesh;
    std::vector<int> degrees;
    tt::TTTensor W;
};

struct RunResult {
    std::vector<IterationRecord> log;
    std::vector<Snapshot> snapshots;
    bool converged = false;
    bool failed = false;
    std::string message;
};

using IterationCallback = std::function<void(const IterationRecord&, const Snapshot&)>;

/// Branch with the largest estimator; ties prefer Det, then Param.
Branch argmax_branch(double det, double param, double disc);

RunResult run(const AdaptConfig& cfg, const IterationCallback& on_iteration = {});

} // namespace ttasgfem::adapt
