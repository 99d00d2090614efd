/* Direct log-layer summation over boundary segments.
 *
 * For each target i accumulates S_i = sum_k log(|x_i - m_k|^2) * d_k where
 * m_k are segment midpoints and d_k segment vectors, and records the minimum
 * squared target-midpoint distance (used by the caller to decide which
 * targets need the exact near-field quadrature instead).
 *
 * Distances are computed in double precision; only the log itself runs in
 * single precision so the compiler can use the 8-wide vector logf.  The
 * caller repairs near-field pairs in double precision.
 */
#include <math.h>

#define CHUNK 512

void log_layer_sum(long m, long n,
                   const double *tx, const double *ty,
                   const double *mx, const double *my,
                   const double *dx, const double *dy,
                   double *out, double *minr2) {
    float r2buf[CHUNK];
    float lbuf[CHUNK];
    for (long i = 0; i < m; i++) {
        double sx = 0.0, sy = 0.0;
        double px = tx[i], py = ty[i];
        double mr = 1e300;
        for (long k0 = 0; k0 < n; k0 += CHUNK) {
            long kn = (n - k0 < CHUNK) ? n - k0 : CHUNK;
            for (long k = 0; k < kn; k++) {
                double ax = px - mx[k0 + k];
                double ay = py - my[k0 + k];
                double r2 = ax * ax + ay * ay;
                mr = r2 < mr ? r2 : mr;
                /* floor within the normal float range: the cast must not
                 * underflow to 0 (logf(0) = -inf would poison the sum; any
                 * pair this close is repaired exactly by the caller) */
                r2 = r2 > 1e-37 ? r2 : 1e-37;
                r2buf[k] = (float)r2;
            }
            for (long k = 0; k < kn; k++)
                lbuf[k] = logf(r2buf[k]);
            for (long k = 0; k < kn; k++) {
                sx += (double)lbuf[k] * dx[k0 + k];
                sy += (double)lbuf[k] * dy[k0 + k];
            }
        }
        out[2 * i] = sx;
        out[2 * i + 1] = sy;
        minr2[i] = mr;
    }
}
