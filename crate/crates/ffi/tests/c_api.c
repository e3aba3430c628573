#include <stdio.h>
#include <string.h>
#include "randcover.h"

#define CHECK(x) do { if (!(x)) { fprintf(stderr, "line %d: %s\n", __LINE__, rc_last_error()); return 1; } } while (0)

int main(void) {
    RcLengthSpec *spec = NULL;
    CHECK(rc_length_spec_from_json("{\"variant\":\"power_law\",\"alpha\":1.0,\"c\":0.5,\"d\":1}", &spec) == RC_STATUS_OK);
    double l = 0.0;
    CHECK(rc_length_spec_value(spec, 4, &l) == RC_STATUS_OK && l == 0.125);

    RcRealization *r = NULL;
    CHECK(rc_realization_new(7, spec, 64, &r) == RC_STATUS_OK);
    rc_length_spec_free(spec);
    double c[1];
    CHECK(rc_realization_center(r, 1, c, 1) == RC_STATUS_OK && c[0] >= 0.0 && c[0] < 1.0);
    CHECK(rc_realization_center(r, 65, c, 1) == RC_STATUS_OUT_OF_RANGE);
    CHECK(strlen(rc_last_error()) > 0);

    RcGridSet *inner = NULL, *outer = NULL;
    CHECK(rc_gridset_stage(r, 1, 64, 8, RC_STAGE_MODE_CONTAINED, &inner) == RC_STATUS_OK);
    CHECK(rc_gridset_stage(r, 1, 64, 8, RC_STAGE_MODE_INTERSECTED, &outer) == RC_STATUS_OK);
    uint64_t a = 0, b = 0;
    CHECK(rc_gridset_count(inner, &a) == RC_STATUS_OK && rc_gridset_count(outer, &b) == RC_STATUS_OK);
    CHECK(a <= b && b > 0);
    bool hit = false;
    CHECK(rc_gridset_hits(inner, outer, &hit) == RC_STATUS_OK && hit == (a > 0));

    char *rle = NULL;
    CHECK(rc_gridset_to_rle(outer, &rle) == RC_STATUS_OK);
    RcGridSet *back = NULL;
    CHECK(rc_gridset_from_rle(rle, &back) == RC_STATUS_OK);
    uint64_t bc = 0;
    CHECK(rc_gridset_count(back, &bc) == RC_STATUS_OK && bc == b);
    rc_string_free(rle);
    rc_gridset_free(back);
    rc_gridset_free(inner);
    rc_gridset_free(outer);
    rc_realization_free(r);

    char *report = NULL;
    CHECK(rc_run_experiment_json("{\"experiment\":\"verify_coincidence_lemma\",\"seed\":1,\"trials\":200,"
                                 "\"params\":{\"n0\":0,\"n\":8,\"s\":0.6,\"t\":0.6,\"d\":1}}", &report) == RC_STATUS_OK);
    CHECK(strstr(report, "\"verdict\"") != NULL);
    rc_string_free(report);
    CHECK(rc_run_experiment_json("{\"experiment\":\"nope\"}", &report) == RC_STATUS_PARSE && report == NULL);
    printf("ok %s\n", rc_version());
    return 0;
}
