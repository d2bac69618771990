#ifndef SEQMARGIN_H
#define SEQMARGIN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define SM_API __declspec(dllexport)
#else
#define SM_API __attribute__((visibility("default")))
#endif

/* Status codes. SM_OK is zero; everything else is a failure whose message is
   available from sm_last_error() on the same thread until the next call. */
typedef enum sm_status {
  SM_OK = 0,
  SM_ERR_SHAPE = 1,
  SM_ERR_ARGUMENT = 2,
  SM_ERR_EVALUATION = 3,
  SM_ERR_SAMPLING = 4,
  SM_ERR_CONSTRUCTION = 5,
  SM_ERR_IO = 6,
  SM_ERR_FORMAT = 7,
  SM_ERR_VOCAB_MISMATCH = 8,
  SM_ERR_DIVERGENCE = 9,
  SM_ERR_USAGE = 10,
  SM_ERR_INTERNAL = 99
} sm_status;

typedef enum sm_model_kind { SM_MODEL_ED = 1, SM_MODEL_EE = 2 } sm_model_kind;

typedef struct sm_config sm_config;
typedef struct sm_model sm_model;

/* Receives one line of progress text at a time, without the newline. */
typedef void (*sm_message_fn)(const char* line, void* user);

SM_API const char* sm_last_error(void);
SM_API const char* sm_status_name(sm_status status);
SM_API const char* sm_version(void);

/* Configuration. A fresh config holds the desk-scale defaults and no seed. */
SM_API sm_status sm_config_new(sm_config** out);
SM_API void sm_config_free(sm_config* cfg);
/* Applies every key of a "key = value" file on top of the current values. */
SM_API sm_status sm_config_load(sm_config* cfg, const char* path);
SM_API sm_status sm_config_set(sm_config* cfg, const char* key, const char* value);
SM_API sm_status sm_config_validate(const sm_config* cfg);
/* Copies the config as text into buf (NUL-terminated, truncated to cap).
   *needed receives the full length including the terminator. */
SM_API sm_status sm_config_to_text(const sm_config* cfg, char* buf, size_t cap, size_t* needed);

SM_API sm_status sm_gen_synthetic(const char* profile, size_t size, uint64_t seed,
                                  const char* out_path);

typedef struct sm_corpus_summary {
  size_t vocab_size;
  size_t whitelist_size;
  size_t pool_size;
  size_t train_pairs;
  size_t malformed_lines;
} sm_corpus_summary;

SM_API sm_status sm_build_corpus(const sm_config* cfg, sm_corpus_summary* out);

typedef struct sm_train_summary {
  uint64_t start_step;
  uint64_t final_step;
  double last_loss;
  size_t dropped_examples;
} sm_train_summary;

/* With resume nonzero and an existing checkpoint, continues from its step. */
SM_API sm_status sm_train(const sm_config* cfg, int resume, sm_message_fn progress, void* user,
                          sm_train_summary* out);

typedef struct sm_eval_summary {
  sm_model_kind kind;
  size_t examples;
  size_t eval_width;
  double mean_predicted_length;
  /* Overall recall for the first K of the configured list. */
  size_t first_k;
  double recall_first_k;
  /* ED only; zero for EE. */
  size_t wrong_predictions;
  double frac_local_pos_global_neg;
  double frac_global_neg;
} sm_eval_summary;

SM_API sm_status sm_eval(const sm_config* cfg, sm_message_fn summary, void* user,
                         sm_eval_summary* out);

typedef struct sm_toy_options {
  size_t n_samples;
  size_t epochs;
  double lr;
  uint64_t seed;
  int full_space;
  int continuation_local;
} sm_toy_options;

/* Parses a grid given as "a,b,c" or an inclusive "start:stop:step" range.
   Writes up to cap values to out; *count receives the full number. */
SM_API sm_status sm_parse_grid(const char* spec, double* out, size_t cap, size_t* count);
SM_API void sm_toy_default_options(sm_toy_options* out);
/* mode is "by_c" or "by_length". grid may be NULL for the default grid.
   Writes the sweep table to out_csv. */
SM_API sm_status sm_toy(const char* mode, const double* grid, size_t grid_size,
                        const sm_toy_options* options, const char* out_csv);

/* Checkpoints. */
SM_API sm_status sm_model_load(const char* path, sm_model** out);
SM_API void sm_model_free(sm_model* model);
SM_API sm_model_kind sm_model_get_kind(const sm_model* model);
SM_API uint64_t sm_model_step(const sm_model* model);
SM_API uint64_t sm_model_seed(const sm_model* model);
SM_API uint64_t sm_model_vocab_hash(const sm_model* model);

#ifdef __cplusplus
}
#endif

#endif
