#include <stdio.h>
#include <string.h>
#include "ggplab.h"

int main(void) {
    GgpConfig *cfg = ggp_config_new();
    if (ggp_config_set(cfg, "suite", "exponents,rtf.projector") != GGP_STATUS_OK) return 10;
    if (ggp_config_set(cfg, "p", "2") != GGP_STATUS_OK) return 11;
    GgpReport *rep = NULL;
    if (ggp_run(cfg, &rep) != GGP_STATUS_INVALID_CONFIG || rep != NULL) return 12;
    if (strstr(ggp_last_error(), "odd prime") == NULL) return 13;
    ggp_config_set(cfg, "p", "3");
    if (ggp_run(cfg, &rep) != GGP_STATUS_OK) return 14;
    if (ggp_report_passed(rep) != 1 || ggp_report_suite_count(rep) != 2) return 15;
    char *js = NULL;
    if (ggp_exponents_json(1, 1, "0", &js) != GGP_STATUS_OK) return 16;
    printf("%s\n", js);
    ggp_string_free(js);
    ggp_report_free(rep);
    ggp_config_free(cfg);
    return 0;
}
