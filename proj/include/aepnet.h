/* AEP-Net C API: train error-map predictors on synthetic phantom volumes and
 * score segmentation masks without ground truth. All entry points are
 * deterministic for fixed seeds and safe to call from multiple threads as
 * long as they touch disjoint output directories. */
#ifndef AEPNET_H
#define AEPNET_H

#include <stddef.h>
#include <stdint.h>

#ifndef AEPNET_API
#define AEPNET_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum aep_status {
  AEP_OK = 0,
  AEP_ERROR_INVALID_ARGUMENT = 1, /* bad parameters, malformed config, bad ids */
  AEP_ERROR_IO = 2,               /* missing or unreadable/unwritable files */
  AEP_ERROR_INTERNAL = 3
} aep_status;

/* Message of the most recent failure on the calling thread; the empty string
 * after a success. The pointer stays valid until the thread's next call. */
AEPNET_API const char* aep_last_error(void);

/* Generate `count` synthetic cases of extent dims[0] x dims[1] x dims[2] with
 * `classes` tissue classes and `masks_per_case` degraded masks each (default
 * severity ladder), writing volumes and manifest.json under out_dir.
 * Bit-reproducible per seed. */
AEPNET_API aep_status aep_generate_dataset(const char* out_dir, int count,
                                           const int dims[3], int classes,
                                           int masks_per_case, uint64_t seed);

/* Histogram of mask quality (Seg.DSC) over every mask of a dataset, using
 * the standard reporting bins. counts[7] fills with {underflow, five bins,
 * overflow}; edges[6] (optional, may be NULL) receives the bin edges;
 * mean_dsc (optional) the mean Seg.DSC. */
AEPNET_API aep_status aep_dataset_histogram(const char* data_dir, int counts[7],
                                            double edges[6], double* mean_dsc);

/* Train per a JSON config file; checkpoints and the loss log are written
 * under out_dir. On success ckpt_path_buf (optional) receives the final
 * checkpoint path (fails if the buffer is too small) and final_total
 * (optional) the last logged total loss. */
AEPNET_API aep_status aep_train(const char* config_path, const char* data_dir,
                                const char* out_dir, char* ckpt_path_buf,
                                size_t ckpt_path_buf_len, double* final_total);

/* A loaded checkpoint: model configuration plus trained parameters. */
typedef struct aep_model aep_model;

AEPNET_API aep_status aep_model_open(const char* checkpoint_path, aep_model** out);
AEPNET_API void aep_model_close(aep_model* model);

/* Describe a loaded model. Any output may be NULL; arch_buf receives the
 * architecture name ("full", "no_ceu", or "plain"). */
AEPNET_API aep_status aep_model_info(const aep_model* model, char* arch_buf,
                                     size_t arch_buf_len, int* num_classes,
                                     long long* iteration, size_t* param_count);

/* Predict the error map for one (case, mask) of a dataset. Writes
 * pred_error_case_XXX_mask_K.rvol under out_dir (skipped when out_dir is
 * NULL) and returns the accuracy inferred from the prediction (pacc), the
 * model's direct error-rate estimate (cer; 0 for architectures without that
 * head), and the mask's real error-voxel fraction (rer). Output pointers may
 * be NULL. */
AEPNET_API aep_status aep_predict(const aep_model* model, const char* data_dir,
                                  int case_id, int mask_index, const char* out_dir,
                                  double* pacc, double* cer, double* rer);

/* Evaluate every (case, mask) of a split and write records.csv, summary.txt,
 * scatter_acc.csv, and scatter_dsc.csv under report_dir (created if absent).
 * num_records (optional) receives the record count; pcc_a and mae (optional)
 * the pAcc-vs-Seg.Acc correlation and mean absolute error, with pcc_a set to
 * NaN when the correlation is undefined. */
AEPNET_API aep_status aep_evaluate(const aep_model* model, const char* data_dir,
                                   const char* split, const char* report_dir,
                                   int* num_records, double* pcc_a, double* mae);

/* Train and evaluate the three architecture variants per seed under a shared
 * protocol (the JSON config's model section seeds the full variant; the plain
 * variant's width is matched to the full parameter budget). Per-run outputs
 * land in out_dir subdirectories; ablation.csv and ablation.txt summarize. */
AEPNET_API aep_status aep_ablate(const char* config_path, const char* data_dir,
                                 const char* out_dir, const uint64_t* seeds,
                                 size_t num_seeds);

#ifdef __cplusplus
}
#endif

#endif /* AEPNET_H */
