/* Compiled as C: proves the public header is valid C and the library links
 * from plain C code. */
#include <string.h>

#include "rrl.h"

int capi_c_smoke(void) {
  if (rrl_version() == NULL) return 1;

  rrl_corpus* corpus = NULL;
  if (rrl_corpus_generate("{\"seed\": 3, \"n_docs\": 2}", &corpus) != RRL_OK)
    return 2;

  char* stats = NULL;
  if (rrl_corpus_stats(corpus, &stats) != RRL_OK) {
    rrl_corpus_free(corpus);
    return 3;
  }
  int ok = strstr(stats, "documents") != NULL;
  rrl_string_free(stats);
  rrl_corpus_free(corpus);

  /* A null argument must fail cleanly with a message. */
  if (rrl_corpus_save(NULL, "x") != RRL_ERR_INVALID_ARGUMENT) return 4;
  if (rrl_last_error()[0] == '\0') return 5;

  return ok ? 0 : 6;
}
