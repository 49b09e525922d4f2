/* Minimal consumer of the C header; exits non-zero on the first failure. */
#include <math.h>
#include <stdio.h>
#include <string.h>

#include "eigenkit.h"

#define CHECK(cond)                                                  \
  do {                                                               \
    if (!(cond)) {                                                   \
      const char *err = ek_last_error();                             \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond, \
              err ? err : "no error");                               \
      return 1;                                                      \
    }                                                                \
  } while (0)

static const char *GRAPH =
    "{\"passage_id\":\"p\",\"nodes\":["
    "{\"id\":\"a\",\"text\":\"cloudy skies\"},"
    "{\"id\":\"b\",\"text\":\"more sunlight\"},"
    "{\"id\":\"c\",\"text\":\"plants grow taller\"}],"
    "\"edges\":[{\"source\":\"a\",\"target\":\"b\",\"sign\":\"hurts\"},"
    "{\"source\":\"b\",\"target\":\"c\",\"sign\":\"helps\"}]}";

int main(void) {
  EkGraph *g = NULL;
  size_t nodes = 0, edges = 0, paths = 0, errors = 9, warnings = 9;
  CHECK(ek_graph_from_json(GRAPH, &g) == EK_STATUS_OK);
  CHECK(ek_graph_size(g, &nodes, &edges) == EK_STATUS_OK);
  CHECK(nodes == 3 && edges == 2);
  CHECK(ek_graph_validate(g, &errors, &warnings) == EK_STATUS_OK);
  CHECK(errors == 0 && warnings == 0);
  CHECK(ek_graph_count_paths(g, "a", 3, &paths) == EK_STATUS_OK);
  CHECK(paths == 2);
  CHECK(ek_graph_count_paths(g, "zz", 3, &paths) == EK_STATUS_UNKNOWN_NODE);
  CHECK(ek_last_error() != NULL);

  char *samples = NULL;
  CHECK(ek_derive_samples(g, "{\"passage_id\":\"p\",\"sentences\":[\"Sun.\"]}", 3,
                          EK_DERIVE_ALL, EK_SPLIT_TRAIN, &samples) == EK_STATUS_OK);
  CHECK(strstr(samples, "\"is hurt by\"") != NULL);
  ek_string_free(samples);
  ek_graph_free(g);

  int8_t signs[3] = {-1, -1, 1};
  int8_t s = 0;
  CHECK(ek_compose_signs(signs, 3, &s) == EK_STATUS_OK && s == 1);
  CHECK(ek_relation_invert(EK_RELATION_HURTS) == EK_RELATION_HURT_BY);
  CHECK(strcmp(ek_relation_surface(EK_RELATION_HELPED_BY), "is helped by") == 0);

  char *q = NULL;
  CHECK(ek_render_query(NULL, "more sunlight", EK_RELATION_HELPS, 1, &q) == EK_STATUS_OK);
  CHECK(strcmp(q, "what does more sunlight helps at 1-hop?") == 0);
  ek_string_free(q);

  const char *refs[1] = {"more plants"};
  double score = 0.0;
  CHECK(ek_bleu("more plants grow", refs, 1, 1, &score) == EK_STATUS_OK);
  CHECK(fabs(score - 66.6667) < 0.01);
  CHECK(ek_rouge_l("more rabbits", "more babies", &score) == EK_STATUS_OK && fabs(score - 50.0) < 1e-9);
  CHECK(ek_meteor_simple("more rain", "more snow", &score) == EK_STATUS_OK && fabs(score - 25.0) < 1e-9);

  EkPolarity pol = EK_POLARITY_NEUTRAL;
  CHECK(ek_polarity_of("Less rain.", &pol) == EK_STATUS_OK && pol == EK_POLARITY_DECREASING);
  CHECK(ek_bleu(NULL, refs, 1, 1, &score) == EK_STATUS_NULL_POINTER);

  puts("ok");
  return 0;
}
