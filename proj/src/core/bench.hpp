#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "adapt.hpp"
#include "chaos.hpp"
#include "fem.hpp"
#include "lognormal.hpp"
#include "ttcore.hpp"

/// Experiment configuration, Monte Carlo validation and CSV reporting.
namespace ttasgfem::bench {

/// One row of the coefficient compression study.
struct CoeffStudyCase {
    int L = 10;
    Index s_max = 10;
};

struct ExperimentConfig {
    adapt::AdaptConfig adapt;
    double f_value = 1.0;       ///< constant source term
    int n_mc = 250;             ///< Monte Carlo samples for mc_rrms
    int ref_refinements = 2;    ///< uniform refinements of the final mesh for reference solves
    bool mc = true;             ///< compute the mc_rrms column
    std::vector<CoeffStudyCase> coeff_study{{10, 10}, {50, 10}, {50, 50}};
    int coeff_degree = 15;      ///< Hermite degree of the study (q = degree + 1)
    int coeff_samples = 200;    ///< Monte Carlo samples per study row

    void validate() const;
};

/// Parses "key = value" lines. Blank lines and lines starting with '#' are
/// ignored; unknown keys, duplicate keys and malformed values raise
/// ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Keys accepted by parse_config.
const std::vector<std::string>& config_keys();

/// Physical coefficient vector of W at parameter y: the stochastic cores are
/// contracted with H_nu(y_m / sigma_m).
Vector sample_solution(const tt::TTTensor& W, const chaos::MeasureParams& measure, std::span<const double> y);

/// Pathwise P1 solves on a fixed reference mesh with the exact (truncated)
/// field evaluated at element quadrature points.
class ReferenceSolver {
public:
    ReferenceSolver(const lognormal::FieldSpec& spec, fem::Mesh mesh, const fem::ScalarField& f);

    [[nodiscard]] const fem::Mesh& mesh() const { return mesh_; }
    /// Free-vertex solution for parameter y (length >= M_trunc). Throws
    /// SolverError when the sampled system is not positive definite.
    [[nodiscard]] Vector solve(std::span<const double> y);

private:
    lognormal::FieldSpec spec_;
    fem::Mesh mesh_;
    Matrix bq_;  ///< b_m at element quadrature points, (3 n_triangles) x M_trunc
    Vector load_;
    Eigen::SimplicialLLT<SparseMatrix> llt_;
    bool analyzed_ = false;
};

/// Relative RMS energy errors of a list of iterates against shared
/// reference samples. Every snapshot mesh must be an ancestor of the
/// reference mesh.
struct McReport {
    std::vector<double> rrms;
    int resampled = 0; ///< samples redrawn because the reference system failed
};

McReport mc_errors(const std::vector<adapt::Snapshot>& snapshots, ReferenceSolver& ref,
                   const lognormal::FieldSpec& spec, int n_mc, std::uint64_t seed);

/// Single-iterate convenience wrapper.
double mc_error(const adapt::Snapshot& snap, ReferenceSolver& ref, const lognormal::FieldSpec& spec, int n_mc,
                std::uint64_t seed);

struct ConvergenceRow {
    adapt::IterationRecord rec;
    std::optional<double> mc_rrms;
};

const std::string& convergence_header();
void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows, std::uint64_t seed);

struct CoeffStudyRow {
    int L = 0;
    int q = 0;
    Index s_max = 0;
    Index rank = 0;          ///< largest rank actually kept
    double rrms = 0.0;
    std::int64_t tt_dofs = 0; ///< entries of the stochastic cores
    double seconds = 0.0;
};

const std::string& coefficient_header();
CoeffStudyRow run_coefficient_case(const lognormal::FieldSpec& spec, const CoeffStudyCase& c, int degree,
                                   int n_samples, std::uint64_t seed);
void write_coefficient_csv(std::ostream& out, const std::vector<CoeffStudyRow>& rows, std::uint64_t seed);

struct ExperimentResult {
    adapt::RunResult run;
    std::vector<ConvergenceRow> rows;
    bool mc_failed = false;
    std::string message;
};

/// Adaptive run followed by Monte Carlo evaluation of every iterate.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// Seed of the Monte Carlo stream, independent of the adaptive stream.
std::uint64_t mc_seed(std::uint64_t seed);

} // namespace ttasgfem::bench
