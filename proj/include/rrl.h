/*
 * C interface to the rhetorical role labeling library.
 *
 * Every function returns RRL_OK (0) on success; on failure it returns an
 * error code and rrl_last_error() describes the problem (the message is
 * thread-local and valid until the next failing call on that thread).
 * Handles are opaque and must be released with the matching *_free call.
 * Strings returned through char** out-parameters are heap-allocated and
 * must be released with rrl_string_free().
 */
#ifndef RRL_H
#define RRL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
  RRL_OK = 0,
  RRL_ERR_INVALID_ARGUMENT = 1,
  RRL_ERR_DATA = 2,
  RRL_ERR_INTERNAL = 3
};

/* Datastore kinds for rrl_datastore_build. */
enum {
  RRL_STORE_KNN = 0,
  RRL_STORE_SINGLE_PROTO = 1,
  RRL_STORE_MULTI_PROTO = 2
};

typedef struct rrl_corpus rrl_corpus;
typedef struct rrl_model rrl_model;
typedef struct rrl_datastore rrl_datastore;

const char* rrl_version(void);
const char* rrl_last_error(void);
void rrl_string_free(char* s);

/* ------------------------------------------------------------- corpus -- */

/* JSONL corpus (one document per line) with a label file (one label per
 * line; order defines ids). */
int rrl_corpus_load(const char* jsonl_path, const char* labels_path,
                    rrl_corpus** out);

/* Seeded synthetic corpus. config_json keys (all optional): seed, n_docs,
 * n_labels, zipf_exponent, mean_sentences, mean_tokens, vocab_per_label,
 * shared_vocab, transition_stickiness. */
int rrl_corpus_generate(const char* config_json, rrl_corpus** out);

int rrl_corpus_save(const rrl_corpus* corpus, const char* jsonl_path);
int rrl_corpus_save_labels(const rrl_corpus* corpus, const char* labels_path);

/* Document-level split; fractions must sum to 1. */
int rrl_corpus_split(const rrl_corpus* corpus, double train_frac,
                     double val_frac, double test_frac, uint64_t seed,
                     rrl_corpus** train_out, rrl_corpus** val_out,
                     rrl_corpus** test_out);

/* JSON with document/sentence counts, the label list, and the label
 * distribution. */
int rrl_corpus_stats(const rrl_corpus* corpus, char** json_out);

void rrl_corpus_free(rrl_corpus* corpus);

/* ----------------------------------------------------------- training -- */

typedef void (*rrl_epoch_fn)(double lr, int epoch, double train_loss,
                             double val_macro_f1, double val_micro_f1,
                             void* user);

/* Train on a corpus pair. train_config_json may be NULL or "{}" for the
 * defaults; see the README for the schema. on_epoch may be NULL. */
int rrl_train(const rrl_corpus* train, const rrl_corpus* val,
              const char* train_config_json, rrl_epoch_fn on_epoch, void* user,
              rrl_model** model_out, char** history_json_out);

int rrl_model_save(const rrl_model* model, const char* path);
int rrl_model_load(const char* path, rrl_model** out);
void rrl_model_free(rrl_model* model);

/* Finite-difference verification of the training loss on a toy model for
 * every method combination. options_json may be NULL; keys: seed, eps. */
int rrl_gradient_check(const char* options_json, char** report_json_out);

/* ----------------------------------------------------------- datastore -- */

/* clusters_per_label and seed only matter for RRL_STORE_MULTI_PROTO. */
int rrl_datastore_build(const rrl_model* model, const rrl_corpus* train,
                        int kind, uint32_t clusters_per_label, uint64_t seed,
                        double tau, rrl_datastore** out);

int rrl_datastore_save(const rrl_datastore* store, const char* path);
int rrl_datastore_load(const char* path, rrl_datastore** out);
void rrl_datastore_free(rrl_datastore* store);

/* ------------------------------------------------ inference, evaluation -- */

/* Baseline distribution used during interpolation. */
enum {
  RRL_BASELINE_CRF_MARGINALS = 0,
  RRL_BASELINE_EMISSION_SOFTMAX = 1
};

/* Predictions as JSONL: {"doc_id": ..., "labels": [...]} per document.
 * store may be NULL for plain Viterbi decoding; with a store, per-position
 * argmax of lambda * p_model + (1 - lambda) * p_store. tau <= 0 uses the
 * store's own temperature. */
int rrl_infer(const rrl_model* model, const rrl_datastore* store,
              double lambda, uint32_t k, double tau, int baseline_dist,
              const rrl_corpus* docs, char** predictions_jsonl_out);

/* Evaluation report (JSON and aligned text; pass NULL for either). The test
 * corpus must carry exactly the model's label set, which makes this the
 * cross-domain harness as well. */
int rrl_evaluate(const rrl_model* model, const rrl_corpus* test,
                 const rrl_datastore* store, double lambda, uint32_t k,
                 double tau, int baseline_dist, char** report_json_out,
                 char** report_text_out);

/* Sweep lambda 0..1 by 0.1 and k over powers of two 8..256 (knn stores).
 * csv_out gets the full table, best_json_out the winning cell. */
int rrl_grid_search(const rrl_model* model, const rrl_datastore* store,
                    const rrl_corpus* val, int baseline_dist, char** csv_out,
                    char** best_json_out);

/* Labels sampled from the training corpus' label distribution, averaged
 * over runs. */
int rrl_random_baseline(const rrl_corpus* train, const rrl_corpus* test,
                        uint32_t runs, uint64_t seed, char** report_json_out);

/* TSV of contextualized sentence representations. */
int rrl_export_embeddings(const rrl_model* model, const rrl_corpus* docs,
                          const char* tsv_path);

#ifdef __cplusplus
}
#endif

#endif /* RRL_H */
