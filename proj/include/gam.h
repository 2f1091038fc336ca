/* C API for the gam point-cloud matching library.
 *
 * All functions return gam_status (GAM_OK on success) except trivial
 * accessors. On failure, gam_last_error() returns a thread-local message.
 * Objects are opaque handles released with the matching _free function.
 */
#ifndef GAM_H
#define GAM_H

#include <stddef.h>

#if defined(__cplusplus)
extern "C" {
#endif

typedef enum gam_status {
    GAM_OK = 0,
    GAM_ERROR_INVALID_ARGUMENT = 1,
    GAM_ERROR_IO = 2,
    GAM_ERROR_PARSE = 3,
    GAM_ERROR_NUMERIC = 4,
    GAM_ERROR_UNKNOWN = 5
} gam_status;

typedef struct gam_config gam_config;
typedef struct gam_dataset gam_dataset;
typedef struct gam_model gam_model;

const char* gam_version(void);
const char* gam_status_name(gam_status status);
const char* gam_last_error(void);
void gam_string_free(char* text);

/* --- experiment configuration --------------------------------------- */

/* Variants: 0gh, 4gh, 4gh.lis, 4gh.lis.noise plus -mini counterparts. */
gam_status gam_config_preset(const char* variant, gam_config** out);
gam_status gam_config_read(const char* path, gam_config** out);
gam_status gam_config_write(const gam_config* config, const char* path);
/* Dotted keys, e.g. gam_config_set(c, "train.epochs", "50"). */
gam_status gam_config_set(gam_config* config, const char* key, const char* value);
gam_status gam_config_get(const gam_config* config, const char* key, char** out_value);
/* Human-readable summary including the exact parameter count. */
gam_status gam_config_describe(const gam_config* config, char** out_text);
/* The config as its on-disk key/value text. */
gam_status gam_config_serialize(const gam_config* config, char** out_text);
gam_status gam_config_parameter_count(const gam_config* config, long long* out_count);
void gam_config_free(gam_config* config);

/* --- datasets -------------------------------------------------------- */

gam_status gam_dataset_generate(int count, int points_per_shape, unsigned long long seed,
                                gam_dataset** out);
gam_status gam_dataset_write(const gam_dataset* dataset, const char* dir);
gam_status gam_dataset_read(const char* dir, gam_dataset** out);
int gam_dataset_count(const gam_dataset* dataset);
int gam_dataset_points(const gam_dataset* dataset);
void gam_dataset_free(gam_dataset* dataset);

/* --- training -------------------------------------------------------- */

/* Runs the full loop; writes checkpoints, loss_curve.csv and a run manifest
 * under out_dir (pass NULL to keep everything in memory). out_model is
 * optional. on_epoch (optional) receives (epoch, loss, user_data) per epoch.
 */
typedef void (*gam_epoch_callback)(int epoch, double loss, void* user_data);
gam_status gam_train(const gam_config* config, const gam_dataset* dataset, const char* out_dir,
                     gam_epoch_callback on_epoch, void* user_data, gam_model** out_model);

/* --- models ---------------------------------------------------------- */

gam_status gam_model_read(const char* path, gam_model** out);
gam_status gam_model_write(const gam_model* model, const char* path);
gam_status gam_model_config(const gam_model* model, gam_config** out);
void gam_model_free(gam_model* model);

/* --- evaluation ------------------------------------------------------ */

/* mask: NULL or "LAYER:HEAD" entries, comma separated, "all" for every
 * layer. noise_stddev 0 disables evaluation noise. Writes a per-pair CSV
 * when report_csv is non-NULL. */
gam_status gam_evaluate(const gam_model* model, const gam_dataset* dataset, int pairs,
                        double noise_stddev, double noise_fraction, unsigned long long seed,
                        const char* mask, const char* report_csv, double* out_mean_error);

gam_status gam_ablate_heads(const gam_model* model, const gam_dataset* dataset, int pairs,
                            unsigned long long seed, const char* report_csv);

/* Trains one short run per layer position (Gaussian heads at that layer
 * only) from the given config and reports each model's error. */
gam_status gam_ablate_layers(const gam_config* config, const gam_dataset* dataset,
                             const char* out_dir, int pairs, unsigned long long seed,
                             const char* report_csv);

/* Full attention matrix of (layer, head) on the dataset pair (src, dst),
 * plus the row of point_index as a (x,y,z,weight) field. */
gam_status gam_export_attention(const gam_model* model, const gam_dataset* dataset, int src,
                                int dst, int layer, int head, int point_index,
                                const char* matrix_csv, const char* row_csv);

#if defined(__cplusplus)
}
#endif

#endif /* GAM_H */
