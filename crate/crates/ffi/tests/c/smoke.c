#include <math.h>
#include <stdio.h>
#include "cvqueue.h"

int main(void) {
    CvqConfig *cfg = NULL;
    if (cvq_config_new(0.239, 0.3, 45.0, 43.2, 1.8, &cfg) != CVQ_STATUS_OK) return 1;
    double et = 0.0;
    if (cvq_expected_t(cfg, false, &et) != CVQ_STATUS_OK) return 2;
    CvqStream *s = NULL;
    if (cvq_stream_new(cfg, CVQ_ESTIMATOR_KNOWN_NO_Q, true, CVQ_OVERFLOW_NONE, &s) != CVQ_STATUS_OK) return 3;
    CvqObservation obs = {3, 9, 35.0, false, 10, 38.0, NAN, NAN, false, true};
    CvqEstimate est;
    if (cvq_stream_estimate(s, &obs, 1, &est) != CVQ_STATUS_OK) return 4;
    CvqConfig *bad = NULL;
    if (cvq_config_new(-1.0, 0.3, 45.0, 43.2, 1.8, &bad) != CVQ_STATUS_INVALID_ARGUMENT) return 5;
    printf("%.6f %.6f %d %s\n", et, est.estimate, (int)est.scenario, cvq_last_error());
    cvq_stream_free(s);
    cvq_config_free(cfg);
    return 0;
}
