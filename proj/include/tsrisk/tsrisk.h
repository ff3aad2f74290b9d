/* C interface to the tsrisk library.
 *
 * Every function returns a tsrisk_status. On failure the message is
 * available from tsrisk_last_error() until the next call on the same
 * thread. Handles are opaque and released with the matching _free.
 */
#ifndef TSRISK_TSRISK_H
#define TSRISK_TSRISK_H

#include <stddef.h>

#if defined(_WIN32)
#define TSRISK_API __declspec(dllexport)
#elif defined(TSRISK_BUILDING_LIBRARY)
#define TSRISK_API __attribute__((visibility("default")))
#else
#define TSRISK_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tsrisk_status {
    TSRISK_OK = 0,
    TSRISK_ERR_USAGE = 1,   /* bad arguments or configuration */
    TSRISK_ERR_DATA = 2,    /* unreadable, malformed or inconsistent input */
    TSRISK_ERR_NUMERIC = 3, /* non-finite values during computation */
    TSRISK_ERR_INTERNAL = 4
} tsrisk_status;

typedef struct tsrisk_config tsrisk_config;
typedef struct tsrisk_dataset tsrisk_dataset;
typedef struct tsrisk_model tsrisk_model;

/* Receives informational lines (warnings, training progress). */
typedef void (*tsrisk_log_fn)(const char* message, void* user);

TSRISK_API const char* tsrisk_version(void);
TSRISK_API const char* tsrisk_last_error(void);

/* Run configuration. `path` may be NULL for the defaults. */
TSRISK_API tsrisk_status tsrisk_config_load(const char* path, tsrisk_config** out);
TSRISK_API tsrisk_status tsrisk_config_parse(const char* json_text, tsrisk_config** out);
/* Keys: seed, model, window, fraction, epochs, batch-size, subset, strict,
 * threshold, represent-subset, lanes, classifier-fraction. */
TSRISK_API tsrisk_status tsrisk_config_set(tsrisk_config* config, const char* key, const char* value);
/* Resolved configuration as JSON; release with tsrisk_string_free. */
TSRISK_API tsrisk_status tsrisk_config_to_json(const tsrisk_config* config, char** out);
TSRISK_API void tsrisk_config_free(tsrisk_config* config);
TSRISK_API void tsrisk_string_free(char* text);

TSRISK_API void tsrisk_set_logger(tsrisk_log_fn fn, void* user);

/* Commands. Output directories are created when missing. */
TSRISK_API tsrisk_status tsrisk_synth(const tsrisk_config* config, const char* out_dir);
/* `labels` may be NULL. */
TSRISK_API tsrisk_status tsrisk_preprocess(const tsrisk_config* config, const char* readings, const char* labels,
                                           const char* out_dir);
TSRISK_API tsrisk_status tsrisk_train(const tsrisk_config* config, const char* dataset, const char* out_dir);
TSRISK_API tsrisk_status tsrisk_infer(const tsrisk_config* config, const char* dataset, const char* checkpoint,
                                      const char* out_dir);
TSRISK_API tsrisk_status tsrisk_recluster(const tsrisk_config* config, const char* report, const char* out_dir);
TSRISK_API tsrisk_status tsrisk_evaluate(const tsrisk_config* config, const char* const* reports, size_t n_reports,
                                         const char* labels, const char* out_dir);
TSRISK_API tsrisk_status tsrisk_representativeness(const tsrisk_config* config, const char* dataset,
                                                   const char* out_dir);
/* `report` and `labels` may both be NULL. */
TSRISK_API tsrisk_status tsrisk_plot(const tsrisk_config* config, const char* const* manifests, size_t n_manifests,
                                     const char* report, const char* labels, const char* out_dir);

/* Normalized dataset artifacts. */
TSRISK_API tsrisk_status tsrisk_dataset_load(const char* path, tsrisk_dataset** out);
TSRISK_API size_t tsrisk_dataset_rows(const tsrisk_dataset* dataset);
TSRISK_API size_t tsrisk_dataset_seq_len(const tsrisk_dataset* dataset);
/* Copies row `index` into `values`, which must hold seq_len doubles. */
TSRISK_API tsrisk_status tsrisk_dataset_row(const tsrisk_dataset* dataset, size_t index, double* values,
                                            size_t capacity);
/* NULL when out of range. Valid while the dataset lives. */
TSRISK_API const char* tsrisk_dataset_account(const tsrisk_dataset* dataset, size_t index);
TSRISK_API int tsrisk_dataset_is_labeled(const tsrisk_dataset* dataset, size_t index);
TSRISK_API void tsrisk_dataset_free(tsrisk_dataset* dataset);

/* Checkpoints. */
TSRISK_API tsrisk_status tsrisk_model_load(const char* path, tsrisk_model** out);
TSRISK_API const char* tsrisk_model_name(const tsrisk_model* model);
TSRISK_API size_t tsrisk_model_seq_len(const tsrisk_model* model);
/* One score per dataset row: reconstruction error for autoencoders,
 * probability for the classifier. `scores` must hold `capacity` >= rows. */
TSRISK_API tsrisk_status tsrisk_model_risk_scores(const tsrisk_model* model, const tsrisk_dataset* dataset,
                                                  double* scores, size_t capacity);
TSRISK_API void tsrisk_model_free(tsrisk_model* model);

#ifdef __cplusplus
}
#endif

#endif
