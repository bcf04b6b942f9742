#include <math.h>
#include <stdio.h>
#include <string.h>

#include "nematic.h"

#define CHECK(cond)                                                   \
  do {                                                                \
    if (!(cond)) {                                                    \
      char msg[512];                                                  \
      nematic_last_error(msg, sizeof msg);                            \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond, msg); \
      return 1;                                                       \
    }                                                                 \
  } while (0)

int main(void) {
  const char *text =
      "grid.n = 6\n"
      "grid.domain = dirichlet\n"
      "init.mean = 0 0 1\n"
      "init.boundary = 0 0 1\n"
      "init.taper = true\n"
      "seed = 2\n";
  NematicConfig *cfg = NULL;
  CHECK(nematic_config_parse(text, &cfg) == NEMATIC_STATUS_OK);

  NematicTrajectory *traj = NULL;
  CHECK(nematic_gradflow(cfg, NULL, &traj) == NEMATIC_STATUS_OK);
  CHECK(nematic_trajectory_converged(traj));
  size_t n = nematic_trajectory_records(traj);
  NematicRecord first, last;
  CHECK(nematic_trajectory_record(traj, 0, &first) == NEMATIC_STATUS_OK);
  CHECK(nematic_trajectory_record(traj, n - 1, &last) == NEMATIC_STATUS_OK);
  CHECK(last.elastic < first.elastic && last.dxq_norm <= 1e-6);

  NematicCertificate cert;
  CHECK(nematic_certify(cfg, traj, &cert) == NEMATIC_STATUS_OK);
  CHECK(cert.passes && cert.min_margin >= -1e-3);

  NematicDirector *d = NULL;
  CHECK(nematic_trajectory_final_director(traj, &d) == NEMATIC_STATUS_OK);
  NematicEnergy e;
  CHECK(nematic_energy(cfg, d, &e) == NEMATIC_STATUS_OK);
  CHECK(fabs(e.elastic - last.elastic) <= 1e-12 * (1.0 + last.elastic));

  NematicConfig *bad = NULL;
  CHECK(nematic_config_parse("frank.K0 = 1\n", &bad) == NEMATIC_STATUS_INVALID_CONFIG);
  char msg[256];
  size_t need = nematic_last_error(msg, sizeof msg);
  CHECK(need > 1 && strstr(msg, "frank.K0") != NULL);
  CHECK(nematic_energy(NULL, d, &e) == NEMATIC_STATUS_NULL_POINTER);

  printf("%s ok\n", nematic_version());
  nematic_director_free(d);
  nematic_trajectory_free(traj);
  nematic_config_free(cfg);
  return 0;
}
