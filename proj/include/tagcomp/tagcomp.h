/* C interface to the tag completion library.
 *
 * Every object is an opaque handle created by a tc_*_create / tc_*_load /
 * tc_run style call and released with the matching tc_*_destroy. Functions
 * return a tc_status; on failure tc_last_error() describes the problem for
 * the calling thread until its next failing call.
 */
#ifndef TAGCOMP_TAGCOMP_H
#define TAGCOMP_TAGCOMP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(TAGCOMP_BUILDING)
#    define TAGCOMP_API __declspec(dllexport)
#  else
#    define TAGCOMP_API __declspec(dllimport)
#  endif
#else
#  define TAGCOMP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tc_status {
    TC_OK = 0,
    TC_ERR_INVALID_ARGUMENT = 1,
    TC_ERR_PARSE = 2,
    TC_ERR_IO = 3,
    TC_ERR_DIVERGED = 4,
    TC_ERR_INTERNAL = 5
} tc_status;

typedef enum tc_metric {
    TC_METRIC_PRECISION_AT_K = 0,
    TC_METRIC_POS_AT_TOP = 1
} tc_metric;

typedef struct tc_config tc_config;
typedef struct tc_dataset tc_dataset;
typedef struct tc_model tc_model;
typedef struct tc_cv_report tc_cv_report;

TAGCOMP_API const char* tc_last_error(void);
TAGCOMP_API const char* tc_status_name(tc_status status);

/* ---- configuration (hyper-parameters) ---- */
TAGCOMP_API tc_status tc_config_create(tc_config** out);
TAGCOMP_API tc_status tc_config_load(const char* path, tc_config** out);
TAGCOMP_API tc_status tc_config_set(tc_config* cfg, const char* key, const char* value);
TAGCOMP_API tc_status tc_config_save(const tc_config* cfg, const char* path);
TAGCOMP_API void tc_config_destroy(tc_config* cfg);

/* ---- datasets: manifest + tag file ---- */
TAGCOMP_API tc_status tc_dataset_load(const char* manifest_path, const char* tags_path,
                                      const tc_config* cfg, tc_dataset** out);
TAGCOMP_API tc_status tc_dataset_shape(const tc_dataset* ds, size_t* images, size_t* tags,
                                       size_t* dim);
TAGCOMP_API void tc_dataset_destroy(tc_dataset* ds);

/* ---- synthetic block-model data ---- */
typedef struct tc_synth_params {
    int images;
    int tags;
    int dim;
    int patches_per_image;
    int clusters;
    double noise;
    uint64_t seed;
    /* When in (0, 1), also writes tags_observed.txt with this fraction of
     * positives hidden. 0 disables. */
    double rho;
} tc_synth_params;

TAGCOMP_API tc_synth_params tc_synth_defaults(void);
/* Writes manifest.txt, patches/<id>.txt and tags_full.txt under out_dir. */
TAGCOMP_API tc_status tc_synth_write(const tc_synth_params* params, const char* out_dir);

/* ---- training ---- */
typedef struct tc_trace_row {
    int iteration;
    double total;
    double consistency;
    double prediction;
    double smoothness;
    double sparsity;
} tc_trace_row;

TAGCOMP_API tc_status tc_run(const tc_dataset* ds, const tc_config* cfg, uint64_t seed,
                             tc_model** out);
TAGCOMP_API tc_status tc_model_shape(const tc_model* model, size_t* tags, size_t* images,
                                     size_t* filters, size_t* dim);
/* Completed scores, row-major tags x images; `len` must equal tags * images. */
TAGCOMP_API tc_status tc_model_completed(const tc_model* model, double* out, size_t len);
TAGCOMP_API tc_status tc_model_trace_length(const tc_model* model, size_t* len);
TAGCOMP_API tc_status tc_model_trace_row(const tc_model* model, size_t index, tc_trace_row* row);
TAGCOMP_API tc_status tc_model_write_completed(const tc_model* model, const char* path);
TAGCOMP_API tc_status tc_model_write_trace(const tc_model* model, const char* path);
TAGCOMP_API tc_status tc_model_save(const tc_model* model, const char* path);
TAGCOMP_API void tc_model_destroy(tc_model* model);

/* ---- evaluation ----
 * The dataset's observed positives are the ground truth; unobserved entries
 * count as negatives. */
TAGCOMP_API tc_status tc_cross_validate(const tc_dataset* ds, const tc_config* cfg, int folds,
                                        double rho, int K, uint64_t seed, tc_cv_report** out);
TAGCOMP_API tc_status tc_cv_report_folds(const tc_cv_report* rep, tc_metric metric,
                                         size_t* count);
TAGCOMP_API tc_status tc_cv_report_value(const tc_cv_report* rep, tc_metric metric,
                                         size_t fold, double* value);
TAGCOMP_API tc_status tc_cv_report_mean(const tc_cv_report* rep, tc_metric metric,
                                        double* value);
TAGCOMP_API void tc_cv_report_destroy(tc_cv_report* rep);

TAGCOMP_API tc_status tc_precision_at_k(const size_t* predicted, size_t n_predicted,
                                        const size_t* truth, size_t n_truth, int K,
                                        double* value);
/* *defined is set to 0 when no relevant item exists; *value is then 0. */
TAGCOMP_API tc_status tc_pos_at_top(const size_t* ranking, size_t n_ranking,
                                    const size_t* relevant, size_t n_relevant, double* value,
                                    int* defined);

/* ---- gradient verification ---- */
typedef enum tc_gradcheck_size { TC_GRADCHECK_SMALL = 0, TC_GRADCHECK_MEDIUM = 1 } tc_gradcheck_size;

typedef struct tc_gradcheck_result {
    int instances;
    double max_rel_T;
    double max_rel_U;
    double max_rel_b;
    double max_rel_W;
    double tolerance;
    int pass;
} tc_gradcheck_result;

TAGCOMP_API tc_status tc_gradcheck(uint64_t seed, int instances, tc_gradcheck_size size,
                                   tc_gradcheck_result* out);

#ifdef __cplusplus
}
#endif

#endif /* TAGCOMP_TAGCOMP_H */
