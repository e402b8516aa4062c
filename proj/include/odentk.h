#ifndef ODENTK_H
#define ODENTK_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define ODENTK_API __declspec(dllexport)
#else
#define ODENTK_API __attribute__((visibility("default")))
#endif

/* Status codes. 1..14 mirror odentk::ErrorCode. */
typedef enum odentk_status {
  ODENTK_OK = 0,
  ODENTK_E_DOMAIN = 1,
  ODENTK_E_CONFIG = 2,
  ODENTK_E_SHAPE = 3,
  ODENTK_E_RESOURCE = 4,
  ODENTK_E_SOLVER = 5,
  ODENTK_E_INPUT = 6,
  ODENTK_E_FORMAT = 7,
  ODENTK_E_LENGTH = 8,
  ODENTK_E_CONSISTENCY = 9,
  ODENTK_E_NUMERIC = 10,
  ODENTK_E_DIVERGENCE = 11,
  ODENTK_E_SEQUENCING = 12,
  ODENTK_E_USAGE = 13,
  ODENTK_E_IO = 14,
  ODENTK_E_ASSERTION = 32, /* a run finished but its checks failed; outputs are still valid */
  ODENTK_E_NULL_ARGUMENT = 33,
  ODENTK_E_INTERNAL = 99
} odentk_status;

typedef struct odentk_model odentk_model;     /* configuration plus parameters */
typedef struct odentk_dataset odentk_dataset; /* N x d inputs and labels */

ODENTK_API const char* odentk_version(void);
ODENTK_API const char* odentk_status_name(odentk_status status);
/* Message of the last failed call on this thread; "" when none. */
ODENTK_API const char* odentk_last_error(void);
/* Releases strings returned through char** out parameters. */
ODENTK_API void odentk_free(char* s);
ODENTK_API odentk_status odentk_set_threads(int threads);

/* Default run configuration as JSON; annotated adds "_doc" fields. */
ODENTK_API odentk_status odentk_default_config(int annotated, char** out_json);
/* Parses, validates and returns the canonical form of a configuration. */
ODENTK_API odentk_status odentk_normalize_config(const char* config_json, char** out_json);

/* ---- handles ---- */
ODENTK_API odentk_status odentk_model_create(const char* config_json, odentk_model** out);
/* Replaces parameters with a saved blob; shapes must match the configuration. */
ODENTK_API odentk_status odentk_model_load_params(odentk_model* model, const char* path);
ODENTK_API odentk_status odentk_model_save_params(const odentk_model* model, const char* path);
ODENTK_API odentk_status odentk_model_shape(const odentk_model* model, int* width, int* input_dim);
/* f(x) through the configured pipeline. */
ODENTK_API odentk_status odentk_model_output(const odentk_model* model, const double* x, size_t d, double* out);
ODENTK_API void odentk_model_destroy(odentk_model* model);

ODENTK_API odentk_status odentk_dataset_from_config(const char* config_json, odentk_dataset** out);
ODENTK_API odentk_status odentk_dataset_size(const odentk_dataset* ds, size_t* n, size_t* d);
ODENTK_API odentk_status odentk_dataset_write_csv(const odentk_dataset* ds, const char* path);
ODENTK_API void odentk_dataset_destroy(odentk_dataset* ds);

/* ---- run entry points; format is "csv" or "json" and shapes *out_text ---- */

/* Pipeline gradient vs central differences of the same map at data point 0.
   ODENTK_E_ASSERTION when a block exceeds gradcheck.tolerance. */
ODENTK_API odentk_status odentk_gradcheck(const char* config_json, const char* format, char** out_text);

/* Limit Gram over the configured dataset. kind: nngp-limit | ntk-limit |
   empirical-nngp | empirical-ntk. Writes gram.csv and gram.json into out_dir
   when out_dir is non-empty. */
ODENTK_API odentk_status odentk_kernel(const char* config_json, const char* kind, const char* out_dir,
                                       const char* format, char** out_text);

/* Full-batch gradient descent on the configured dataset. Writes history.csv,
   summary.json, params.bin and params.json into out_dir when non-empty. */
ODENTK_API odentk_status odentk_train(const char* config_json, const char* out_dir, const char* format,
                                      char** out_text);

/* Named experiment; base_seed < 0 keeps the configured seeds. Returns
   ODENTK_E_ASSERTION when any built-in assertion fails. */
ODENTK_API odentk_status odentk_experiment(const char* name, const char* config_json, long long base_seed,
                                           const char* out_dir, const char* format, char** out_text);
/* Newline-separated experiment names. */
ODENTK_API odentk_status odentk_experiment_names(char** out_text);

/* Parses an IDX image/label pair and summarizes it. */
ODENTK_API odentk_status odentk_parse_idx(const char* images_path, const char* labels_path, const char* format,
                                          char** out_text);

#ifdef __cplusplus
}
#endif

#endif /* ODENTK_H */
