/* npnet C API: width-adaptive neural network training behind opaque handles.
 *
 * Every function returns a status code; on failure npnet_last_error() gives a
 * human-readable message for the calling thread. Handles are freed with the
 * matching *_free function; passing NULL to a *_free is a no-op.
 */
#ifndef NPNET_H
#define NPNET_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum npnet_status {
    NPNET_OK = 0,
    NPNET_ERR_RUNTIME = 1, /* runtime failure: IO, corrupt file, bad state */
    NPNET_ERR_USAGE = 2    /* bad arguments, config, or missing inputs */
} npnet_status;

typedef struct npnet_config npnet_config;
typedef struct npnet_dataset npnet_dataset;
typedef struct npnet_model npnet_model;

const char* npnet_version(void);
const char* npnet_last_error(void);

/* ----- configuration ----------------------------------------------------- */

/* Parses a flat TOML config document (all keys optional, defaults applied). */
npnet_status npnet_config_parse(const char* text, npnet_config** out);
npnet_status npnet_config_load(const char* path, npnet_config** out);
/* Overrides one key, e.g. npnet_config_set(cfg, "seed", "7"). Strings must be
 * quoted exactly as in the file format. */
npnet_status npnet_config_set(npnet_config* cfg, const char* key, const char* value);
/* Canonical serialization of the resolved config; caller must free() it. */
char* npnet_config_serialize(const npnet_config* cfg);
void npnet_config_free(npnet_config* cfg);

/* ----- datasets ----------------------------------------------------------- */

npnet_status npnet_dataset_load_idx(const char* images_path, const char* labels_path,
                                    npnet_dataset** out);
npnet_status npnet_dataset_load_csv(const char* path, int label_column, int has_header,
                                    npnet_dataset** out);
npnet_status npnet_dataset_load_amat(const char* path, npnet_dataset** out);
/* kind is "gaussian_blobs" or "xor_quadrants". */
npnet_status npnet_dataset_synthetic(const char* kind, size_t n, size_t d0, int classes,
                                     double noise, unsigned long long seed, npnet_dataset** out);
size_t npnet_dataset_rows(const npnet_dataset* d);
size_t npnet_dataset_features(const npnet_dataset* d);
int npnet_dataset_classes(const npnet_dataset* d);
void npnet_dataset_free(npnet_dataset* d);

/* ----- training ------------------------------------------------------------ */

/* Runs the full training schedule described by the config. out_dir (may be
 * NULL) receives manifest.json, config.resolved.toml, metrics.csv, units.csv,
 * checkpoints, and model.npck. resume_path (may be NULL) continues from a
 * checkpoint written by the same config. On success *out_model (may be NULL)
 * receives the trained model. */
npnet_status npnet_train_run(const npnet_config* cfg, const char* out_dir,
                             const char* resume_path, npnet_model** out_model);

/* ----- models -------------------------------------------------------------- */

npnet_status npnet_model_load(const char* path, npnet_model** out);
npnet_status npnet_model_save(const npnet_model* m, const char* path);
/* Mean cross-entropy and classification error rate over the dataset. */
npnet_status npnet_model_eval(const npnet_model* m, const npnet_dataset* d, double* ce,
                              double* err_rate);
size_t npnet_model_layer_count(const npnet_model* m);
/* dims has layer_count()+1 entries. */
npnet_status npnet_model_dims(const npnet_model* m, size_t* dims, size_t dims_len);
void npnet_model_free(npnet_model* m);

/* ----- gradient checking ---------------------------------------------------- */

/* Compares the analytic backward pass against central finite differences on
 * `trials` random networks shaped by the config; writes the max relative
 * error. Returns NPNET_ERR_RUNTIME when the error exceeds 1e-6. */
npnet_status npnet_gradcheck(const npnet_config* cfg, int trials, double* max_rel_err);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* NPNET_H */
