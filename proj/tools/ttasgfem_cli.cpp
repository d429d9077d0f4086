// Command line front end. Exit codes: 0 success, 2 configuration error,
// 3 solver failure.
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ttasgfem/ttasgfem.h"

namespace {

int exit_code(tta_status s) {
    switch (s) {
    case TTA_OK: return 0;
    case TTA_ERR_CONFIG:
    case TTA_ERR_ARG: return 2;
    default: return 3;
    }
}

int run(const std::string& config_path, const std::string& out_dir, bool full, bool no_coeff, bool quiet) {
    tta_config* cfg = nullptr;
    if (tta_status s = tta_config_load(config_path.c_str(), &cfg); s != TTA_OK) {
        std::cerr << "error: " << tta_last_error() << '\n';
        return exit_code(s);
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        std::cerr << "error: cannot create output directory '" << out_dir << "': " << ec.message() << '\n';
        tta_config_free(cfg);
        return 2;
    }
    const auto conv_path = (std::filesystem::path(out_dir) / "convergence.csv").string();
    const auto coeff_path = (std::filesystem::path(out_dir) / "coefficient_report.csv").string();
    const int verbose = quiet ? 0 : 1;

    tta_result* res = nullptr;
    const tta_status run_status = tta_run_adaptive(cfg, verbose, &res);
    if (run_status != TTA_OK) std::cerr << "error: " << tta_last_error() << '\n';
    if (res) {
        if (tta_result_write_csv(res, conv_path.c_str()) != TTA_OK) {
            std::cerr << "error: " << tta_last_error() << '\n';
            tta_result_free(res);
            tta_config_free(cfg);
            return 3;
        }
        if (!quiet)
            std::cerr << "wrote " << conv_path << " (" << tta_result_rows(res) << " iterations"
                      << (tta_result_converged(res) ? ", converged" : "") << ")\n";
        tta_result_free(res);
    }
    if (run_status != TTA_OK) {
        tta_config_free(cfg);
        return exit_code(run_status);
    }

    if (!no_coeff) {
        if (full) std::cerr << "warning: --full adds the L=100, s_max=100 coefficient row; this takes a long time\n";
        const tta_status s = tta_run_coefficient_study(cfg, full ? 1 : 0, verbose, coeff_path.c_str());
        if (s != TTA_OK) {
            std::cerr << "error: " << tta_last_error() << '\n';
            tta_config_free(cfg);
            return exit_code(s);
        }
        if (!quiet) std::cerr << "wrote " << coeff_path << '\n';
    }
    tta_config_free(cfg);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive stochastic Galerkin FEM in tensor-train format"};
    app.set_version_flag("--version", std::string(tta_version()));
    app.require_subcommand(1);

    auto* run_cmd = app.add_subcommand("run", "Run the adaptive loop and the coefficient study from a config file");
    std::string config_path;
    std::string out_dir = ".";
    bool full = false;
    bool no_coeff = false;
    bool quiet = false;
    run_cmd->add_option("config", config_path, "Configuration file (key = value lines)")->required();
    run_cmd->add_option("-o,--out", out_dir, "Output directory for the CSV files");
    run_cmd->add_flag("--full", full, "Include the L=100, s_max=100 coefficient study row");
    run_cmd->add_flag("--no-coeff", no_coeff, "Skip the coefficient study");
    run_cmd->add_flag("-q,--quiet", quiet, "Suppress progress logging");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    return run(config_path, out_dir, full, no_coeff, quiet);
}
