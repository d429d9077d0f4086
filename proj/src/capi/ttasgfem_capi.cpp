#include "ttasgfem/ttasgfem.h"

#include <fstream>
#include <iostream>
#include <map>
#include <new>
#include <string>

#include "bench.hpp"

struct tta_config {
    std::map<std::string, std::string> entries;
    ttasgfem::bench::ExperimentConfig cfg;
};

struct tta_result {
    ttasgfem::bench::ExperimentResult res;
    std::uint64_t seed = 0;
};

namespace {

thread_local std::string g_error;

tta_status fail(tta_status s, const std::string& msg) {
    g_error = msg;
    return s;
}

template <class F>
tta_status guarded(F&& f) {
    g_error.clear();
    try {
        return f();
    } catch (const ttasgfem::ConfigError& e) {
        return fail(TTA_ERR_CONFIG, e.what());
    } catch (const ttasgfem::SolverError& e) {
        return fail(TTA_ERR_SOLVER, e.what());
    } catch (const ttasgfem::Error& e) {
        return fail(TTA_ERR_ARG, e.what());
    } catch (const std::bad_alloc&) {
        return fail(TTA_ERR_SOLVER, "out of memory");
    } catch (const std::exception& e) {
        return fail(TTA_ERR_SOLVER, e.what());
    }
}

std::string render(const std::map<std::string, std::string>& entries) {
    std::string text;
    for (const auto& [k, v] : entries) text += k + " = " + v + "\n";
    return text;
}

tta_tag to_tag(ttasgfem::adapt::Branch b) {
    switch (b) {
    case ttasgfem::adapt::Branch::Det: return TTA_TAG_DET;
    case ttasgfem::adapt::Branch::Param: return TTA_TAG_PARAM;
    case ttasgfem::adapt::Branch::Rank: return TTA_TAG_RANK;
    }
    return TTA_TAG_DET;
}

void fill(const ttasgfem::bench::CoeffStudyRow& r, tta_coeff_row* out) {
    out->L = r.L;
    out->q = r.q;
    out->s_max = r.s_max;
    out->rank = r.rank;
    out->rrms = r.rrms;
    out->tt_dofs = r.tt_dofs;
    out->seconds = r.seconds;
}

} // namespace

extern "C" {

const char* tta_version(void) { return "0.1.0"; }

const char* tta_last_error(void) { return g_error.c_str(); }

tta_status tta_config_new(tta_config** out) {
    if (!out) return fail(TTA_ERR_ARG, "null output pointer");
    return guarded([&] {
        *out = new tta_config{{}, ttasgfem::bench::parse_config("")};
        return TTA_OK;
    });
}

tta_status tta_config_parse(const char* text, tta_config** out) {
    if (!text || !out) return fail(TTA_ERR_ARG, "null argument");
    return guarded([&] {
        auto cfg = ttasgfem::bench::parse_config(text);
        // Keep the raw entries so later tta_config_set calls re-validate the
        // whole configuration.
        std::map<std::string, std::string> entries;
        std::string line;
        std::string s(text);
        std::size_t pos = 0;
        while (pos <= s.size()) {
            const auto nl = s.find('\n', pos);
            line = s.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
            pos = nl == std::string::npos ? s.size() + 1 : nl + 1;
            const auto b = line.find_first_not_of(" \t\r");
            if (b == std::string::npos || line[b] == '#') continue;
            const auto eq = line.find('=');
            auto key = line.substr(0, eq);
            auto value = line.substr(eq + 1);
            key.erase(0, key.find_first_not_of(" \t\r"));
            key.erase(key.find_last_not_of(" \t\r") + 1);
            value.erase(0, value.find_first_not_of(" \t\r"));
            value.erase(value.find_last_not_of(" \t\r") + 1);
            entries[key] = value;
        }
        *out = new tta_config{std::move(entries), std::move(cfg)};
        return TTA_OK;
    });
}

tta_status tta_config_load(const char* path, tta_config** out) {
    if (!path || !out) return fail(TTA_ERR_ARG, "null argument");
    std::ifstream in(path);
    if (!in) return fail(TTA_ERR_CONFIG, std::string("cannot open config file '") + path + "'");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return tta_config_parse(text.c_str(), out);
}

tta_status tta_config_set(tta_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) return fail(TTA_ERR_ARG, "null argument");
    return guarded([&] {
        auto entries = cfg->entries;
        entries[key] = value;
        auto parsed = ttasgfem::bench::parse_config(render(entries));
        cfg->entries = std::move(entries);
        cfg->cfg = std::move(parsed);
        return TTA_OK;
    });
}

uint64_t tta_config_seed(const tta_config* cfg) { return cfg ? cfg->cfg.adapt.seed : 0; }

void tta_config_free(tta_config* cfg) { delete cfg; }

tta_status tta_run_adaptive(const tta_config* cfg, int verbose, tta_result** out) {
    if (!cfg || !out) return fail(TTA_ERR_ARG, "null argument");
    *out = nullptr;
    return guarded([&] {
        auto* r = new tta_result;
        r->seed = cfg->cfg.adapt.seed;
        try {
            r->res = ttasgfem::bench::run_experiment(cfg->cfg, verbose ? &std::cerr : nullptr);
        } catch (...) {
            delete r;
            throw;
        }
        *out = r;
        if (r->res.run.failed || r->res.mc_failed) return fail(TTA_ERR_SOLVER, r->res.message);
        return TTA_OK;
    });
}

size_t tta_result_rows(const tta_result* res) { return res ? res->res.rows.size() : 0; }

tta_status tta_result_row(const tta_result* res, size_t i, tta_row* out) {
    if (!res || !out) return fail(TTA_ERR_ARG, "null argument");
    if (i >= res->res.rows.size()) return fail(TTA_ERR_ARG, "row index out of range");
    const auto& row = res->res.rows[i];
    const auto& r = row.rec;
    out->iteration = r.iteration;
    out->tag = to_tag(r.tag);
    out->M = r.M;
    out->d_max = r.d_max;
    out->r_max = r.r_max;
    out->m_dofs = r.m_dofs;
    out->tt_dofs = r.tt_dofs;
    out->op_dofs = r.op_dofs;
    out->eta_det = r.eta_det;
    out->eta_param = r.eta_param;
    out->eta_disc = r.eta_disc;
    out->eta_all = r.eta_all;
    out->has_mc = row.mc_rrms ? 1 : 0;
    out->mc_rrms = row.mc_rrms.value_or(0.0);
    return TTA_OK;
}

tta_status tta_result_write_csv(const tta_result* res, const char* path) {
    if (!res || !path) return fail(TTA_ERR_ARG, "null argument");
    std::ofstream out(path, std::ios::binary);
    if (!out) return fail(TTA_ERR_IO, std::string("cannot write '") + path + "'");
    ttasgfem::bench::write_convergence_csv(out, res->res.rows, res->seed);
    out.flush();
    if (!out) return fail(TTA_ERR_IO, std::string("write failed for '") + path + "'");
    return TTA_OK;
}

int tta_result_converged(const tta_result* res) { return res && res->res.run.converged ? 1 : 0; }

void tta_result_free(tta_result* res) { delete res; }

tta_status tta_coefficient_case(const tta_config* cfg, int L, int64_t s_max, tta_coeff_row* out) {
    if (!cfg || !out) return fail(TTA_ERR_ARG, "null argument");
    if (L < 1 || s_max < 1) return fail(TTA_ERR_ARG, "L and s_max must be >= 1");
    return guarded([&] {
        const auto& c = cfg->cfg;
        const auto row = ttasgfem::bench::run_coefficient_case(c.adapt.field, {L, s_max}, c.coeff_degree,
                                                               c.coeff_samples, ttasgfem::bench::mc_seed(c.adapt.seed));
        fill(row, out);
        return TTA_OK;
    });
}

tta_status tta_run_coefficient_study(const tta_config* cfg, int full, int verbose, const char* path) {
    if (!cfg || !path) return fail(TTA_ERR_ARG, "null argument");
    return guarded([&] {
        const auto& c = cfg->cfg;
        auto cases = c.coeff_study;
        if (full) cases.push_back({100, 100});
        std::vector<ttasgfem::bench::CoeffStudyRow> rows;
        for (const auto& cs : cases) {
            if (verbose) std::cerr << "coefficient study: L=" << cs.L << " s_max=" << cs.s_max << std::endl;
            rows.push_back(ttasgfem::bench::run_coefficient_case(c.adapt.field, cs, c.coeff_degree, c.coeff_samples,
                                                                 ttasgfem::bench::mc_seed(c.adapt.seed)));
        }
        std::ofstream out(path, std::ios::binary);
        if (!out) return fail(TTA_ERR_IO, std::string("cannot write '") + path + "'");
        ttasgfem::bench::write_coefficient_csv(out, rows, c.adapt.seed);
        out.flush();
        if (!out) return fail(TTA_ERR_IO, std::string("write failed for '") + path + "'");
        return TTA_OK;
    });
}

} // extern "C"
