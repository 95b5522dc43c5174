/* hypcbc - hyperbolic classification heads over precomputed embeddings.
 *
 * C89-compatible interface to the shared library. All functions return
 * hypcbc_status; on failure hypcbc_last_error() carries a thread-local
 * message. Strings returned through char** are heap-allocated and must be
 * released with hypcbc_string_free(). Configs and reports are JSON strings;
 * the schemas live in docs/formats.md.
 */
#ifndef HYPCBC_H
#define HYPCBC_H

#include <stddef.h>

#if defined(_WIN32)
#define HYPCBC_API __declspec(dllexport)
#else
#define HYPCBC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hypcbc_status {
  HYPCBC_OK = 0,
  HYPCBC_ERR_INTERNAL = 1,
  HYPCBC_ERR_CONFIG = 2,
  HYPCBC_ERR_DATA = 3,
  HYPCBC_ERR_NUMERIC = 4,
  HYPCBC_ERR_USAGE = 5
} hypcbc_status;

/* Opaque handles. */
typedef struct hypcbc_dataset hypcbc_dataset;
typedef struct hypcbc_model hypcbc_model;

HYPCBC_API const char* hypcbc_version(void);

/* Message for the most recent failure on this thread. */
HYPCBC_API const char* hypcbc_last_error(void);

HYPCBC_API void hypcbc_string_free(char* s);

/* Generates a synthetic HEMB dataset directory from a spec JSON
 * ({"classes", "domains", "dim", "samples", "class_separation",
 *   "domain_shift", "shift_dims", "seed"}). */
HYPCBC_API hypcbc_status hypcbc_synth(const char* spec_json,
                                      const char* out_dir);

/* HEMB dataset directory access. */
HYPCBC_API hypcbc_status hypcbc_dataset_open(const char* dir,
                                             hypcbc_dataset** out);
HYPCBC_API void hypcbc_dataset_close(hypcbc_dataset* ds);
HYPCBC_API hypcbc_status hypcbc_dataset_info(const hypcbc_dataset* ds,
                                             char** json_out);

/* Trains per config JSON, writes checkpoint.hckp + manifest.json under
 * out_dir, and returns the manifest. */
HYPCBC_API hypcbc_status hypcbc_train(const char* config_json,
                                      const char* dataset_dir,
                                      const char* out_dir,
                                      char** manifest_json_out);

/* Checkpoint access. */
HYPCBC_API hypcbc_status hypcbc_model_open(const char* checkpoint_path,
                                           hypcbc_model** out);
HYPCBC_API void hypcbc_model_close(hypcbc_model* m);
HYPCBC_API hypcbc_status hypcbc_model_info(const hypcbc_model* m,
                                           char** json_out);

/* Accuracy + macro AUC of the high-dimensional branch on one split
 * ("train" | "val" | "test"). */
HYPCBC_API hypcbc_status hypcbc_eval(const hypcbc_model* m,
                                     const hypcbc_dataset* ds,
                                     const char* split, char** report_out);

/* Linear/MLP probe on frozen embeddings; model may be NULL when probing the
 * raw backbone features. */
HYPCBC_API hypcbc_status hypcbc_probe(const hypcbc_model* m,
                                      const hypcbc_dataset* ds,
                                      const char* probe_json,
                                      char** report_out);

/* Local k-NN label entropy of the hyperbolic embeddings. k <= 0 uses the
 * default (15). */
HYPCBC_API hypcbc_status hypcbc_entropy(const hypcbc_model* m,
                                        const hypcbc_dataset* ds,
                                        const char* split, int k,
                                        char** report_out);

/* what = "disk2d": writes <out_path>.csv and <out_path>.disk.json for the
 * model's 2-d branch on `split`.
 * what = "boundary_toy": writes a four-panel boundary comparison JSON to
 * out_path; model/dataset may be NULL; options_json may override
 * {"p": [x,y], "normal": [x,y], "curvature": c, "seed": n}. */
HYPCBC_API hypcbc_status hypcbc_export(const hypcbc_model* m,
                                       const hypcbc_dataset* ds,
                                       const char* what, const char* split,
                                       const char* options_json,
                                       const char* out_path);

/* Cross-product sweep of grid_json over the base config, each cell run for
 * every seed; writes sweep_results.csv + sweep_summary.json under out_dir
 * and returns the summary. seeds may be NULL for the default {0,1,2,3,4}. */
HYPCBC_API hypcbc_status hypcbc_sweep(const char* grid_json,
                                      const char* base_config_json,
                                      const char* dataset_dir,
                                      const char* out_dir,
                                      const unsigned long long* seeds,
                                      size_t n_seeds, int jobs,
                                      char** table_json_out);

#ifdef __cplusplus
}
#endif

#endif /* HYPCBC_H */
