#ifndef TTASGFEM_TTASGFEM_H
#define TTASGFEM_TTASGFEM_H

/*
 * C interface of the ttasgfem library: adaptive stochastic Galerkin FEM in
 * tensor-train format for elliptic problems with lognormal coefficients.
 *
 * Objects are opaque handles created and destroyed by the library. Every
 * fallible call returns a tta_status; on failure tta_last_error() returns a
 * message for the calling thread, valid until its next library call.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(TTASGFEM_BUILDING_LIBRARY)
#    define TTA_API __declspec(dllexport)
#  else
#    define TTA_API __declspec(dllimport)
#  endif
#else
#  define TTA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tta_status {
    TTA_OK = 0,
    TTA_ERR_ARG = 1,    /* null handle, bad index or invalid argument */
    TTA_ERR_CONFIG = 2, /* malformed or invalid configuration */
    TTA_ERR_SOLVER = 3, /* numerical failure; partial results may be available */
    TTA_ERR_IO = 4      /* file could not be read or written */
} tta_status;

typedef enum tta_tag { TTA_TAG_DET = 0, TTA_TAG_PARAM = 1, TTA_TAG_RANK = 2 } tta_tag;

typedef struct tta_config tta_config;
typedef struct tta_result tta_result;

/* One adaptive iteration. */
typedef struct tta_row {
    int iteration;
    tta_tag tag;
    int M;
    int d_max;
    int64_t r_max;
    int64_t m_dofs;
    int64_t tt_dofs;
    int64_t op_dofs;
    double eta_det;
    double eta_param;
    double eta_disc;
    double eta_all;
    int has_mc;     /* 1 when mc_rrms is set */
    double mc_rrms;
} tta_row;

/* One row of the coefficient compression study. */
typedef struct tta_coeff_row {
    int L;
    int q;
    int64_t s_max;
    int64_t rank;
    double rrms;
    int64_t tt_dofs;
    double seconds;
} tta_coeff_row;

TTA_API const char* tta_version(void);
TTA_API const char* tta_last_error(void);

/* Configuration: "key = value" text, unknown keys are rejected. */
TTA_API tta_status tta_config_new(tta_config** out);
TTA_API tta_status tta_config_parse(const char* text, tta_config** out);
TTA_API tta_status tta_config_load(const char* path, tta_config** out);
/* Sets one key; the configuration is left unchanged on error. */
TTA_API tta_status tta_config_set(tta_config* cfg, const char* key, const char* value);
TTA_API uint64_t tta_config_seed(const tta_config* cfg);
TTA_API void tta_config_free(tta_config* cfg);

/*
 * Runs the adaptive loop and, when enabled in the configuration, the Monte
 * Carlo evaluation of every iterate. On a solver failure the result still
 * holds the iterations completed so far and TTA_ERR_SOLVER is returned.
 * Progress is logged to stderr when verbose is nonzero.
 */
TTA_API tta_status tta_run_adaptive(const tta_config* cfg, int verbose, tta_result** out);
TTA_API size_t tta_result_rows(const tta_result* res);
TTA_API tta_status tta_result_row(const tta_result* res, size_t i, tta_row* out);
/* Writes convergence.csv-formatted output. */
TTA_API tta_status tta_result_write_csv(const tta_result* res, const char* path);
TTA_API int tta_result_converged(const tta_result* res);
TTA_API void tta_result_free(tta_result* res);

/* Compresses the coefficient for one (L, s_max) pair. */
TTA_API tta_status tta_coefficient_case(const tta_config* cfg, int L, int64_t s_max, tta_coeff_row* out);
/*
 * Runs every configured study row (plus L = 100, s_max = 100 when full is
 * nonzero) and writes coefficient_report.csv-formatted output.
 */
TTA_API tta_status tta_run_coefficient_study(const tta_config* cfg, int full, int verbose, const char* path);

#ifdef __cplusplus
}
#endif

#endif
