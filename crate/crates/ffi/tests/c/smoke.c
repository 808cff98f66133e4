#include <stdio.h>
#include <string.h>
#include "uavcrowd.h"

#define CHECK(expr)                                                        \
  do {                                                                     \
    UcStatus s_ = (expr);                                                  \
    if (s_ != UC_STATUS_OK) {                                              \
      fprintf(stderr, "%s -> %d: %s\n", #expr, (int)s_, uc_last_error()); \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(void) {
  UcWorld *world = NULL;
  size_t tiles = 0;
  CHECK(uc_world_generate(3, 2, 10.0, &world));
  CHECK(uc_world_tile_count(world, &tiles));
  uc_world_free(world);
  if (tiles != 19) return 2;

  UcSim *sim = NULL;
  CHECK(uc_sim_new(7, 4, 20, &sim));
  CHECK(uc_sim_set_velocity(sim, 1.0, 0.0, 0.0));
  CHECK(uc_sim_step(sim, 30));
  UcFrame *frame = NULL;
  CHECK(uc_sim_capture(sim, &frame));
  UcImageInfo info;
  CHECK(uc_frame_image(frame, UC_PASS_DEPTH, &info));
  if (info.width != 640 || info.height != 480 || info.len != 640u * 480u * 2u) return 3;
  size_t n = 0;
  CHECK(uc_frame_boxes(frame, NULL, 0, &n));
  uc_frame_free(frame);
  uc_sim_free(sim);

  if (uc_sim_step(NULL, 1) != UC_STATUS_NULL_POINTER) return 4;
  if (uc_last_error() == NULL) return 5;

  UcSplitCounts c;
  CHECK(uc_split_counts(120, &c));
  if (c.train != 77 || c.val != 19 || c.test != 24) return 6;
  printf("ok %s boxes=%zu\n", uc_version(), n);
  return 0;
}
