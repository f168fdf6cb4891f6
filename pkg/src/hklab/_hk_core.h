/* Hot loops for the float64 engines.
 *
 * Discrete step: opinions are scaled to a common power of two so that every
 * value is an exact __int128; window search, prefix sums and cluster sums are
 * then exact, and each mean is rounded once (round-half-even).  Returns -1
 * when the exponent span does not fit in 125 bits; the caller falls back.
 *
 * Build without -ffast-math / FMA contraction: results must match the Python
 * implementation bit for bit.
 */
#ifndef HK_CORE_H
#define HK_CORE_H

#include <math.h>
#include <stdint.h>
#include <stdlib.h>
#include <float.h>

typedef __int128 hk_i128;
typedef unsigned __int128 hk_u128;

static int hk_bitlen(hk_u128 x)
{
    uint64_t hi = (uint64_t)(x >> 64), lo = (uint64_t)x;
    if (hi) return 128 - __builtin_clzll(hi);
    if (lo) return 64 - __builtin_clzll(lo);
    return 0;
}

/* round(w / (n * 2^k)) to the nearest double, ties to even */
static double hk_ratio_to_double(hk_i128 w, int64_t n, int k)
{
    if (w == 0) return 0.0;
    int neg = w < 0;
    hk_u128 a = neg ? (hk_u128)(-w) : (hk_u128)w;
    int la = hk_bitlen(a), ln = hk_bitlen((hk_u128)n);
    int sh = 64 - (la - ln);
    int sticky = 0;
    if (sh >= 0) {
        a <<= sh;
    } else {
        hk_u128 mask = (((hk_u128)1) << (-sh)) - 1;
        sticky = (a & mask) != 0;
        a >>= -sh;
    }
    hk_u128 q = a / (hk_u128)n;
    if (a % (hk_u128)n) sticky = 1;
    int lq = hk_bitlen(q);
    int drop = lq - 53;
    hk_u128 mant = q >> drop;
    hk_u128 rem = q & ((((hk_u128)1) << drop) - 1);
    hk_u128 half = ((hk_u128)1) << (drop - 1);
    if (rem > half || (rem == half && (sticky || (mant & 1)))) mant += 1;
    double r = ldexp((double)(uint64_t)mant, drop - sh - k);
    return neg ? -r : r;
}

/* Fill nums[i] = x[i] * 2^k exactly; returns k or -1 when out of range. */
static int hk_lattice(const double *x, int64_t n, hk_i128 *nums)
{
    int k = 0, emax = -100000, have = 0;
    for (int64_t i = 0; i < n; i++) {
        if (x[i] == 0.0) continue;
        if (!isfinite(x[i])) return -1;
        int e;
        double m = frexp(x[i], &e);
        int64_t M = (int64_t)ldexp(m, 53);
        int need = 53 - e - __builtin_ctzll((uint64_t)llabs(M));
        if (!have || need > k) k = need;
        if (e > emax) emax = e;
        have = 1;
    }
    if (k < 0) k = 0;
    int nb = 0;
    while (((int64_t)1 << nb) < n + 1) nb++;
    if (nb > 40) return -1;
    if (have && (emax + k + nb > 124 || k > 124)) return -1;
    for (int64_t i = 0; i < n; i++) {
        if (x[i] == 0.0) { nums[i] = 0; continue; }
        int e;
        double m = frexp(x[i], &e);
        int64_t M = (int64_t)ldexp(m, 53);
        int s = k - 53 + e;
        hk_i128 v = (hk_i128)M;
        nums[i] = s >= 0 ? v * (((hk_i128)1) << s) : v / (((hk_i128)1) << (-s));
    }
    return k;
}

/* One HK step; out may not alias x. */
static int hk_step_f64(const double *x, int64_t n, double *out,
                       hk_i128 *nums, hk_i128 *prefix)
{
    int k = hk_lattice(x, n, nums);
    if (k < 0) return -1;
    hk_i128 one = ((hk_i128)1) << k;
    prefix[0] = 0;
    for (int64_t i = 0; i < n; i++) prefix[i + 1] = prefix[i] + nums[i];
    int64_t lo = 0, hi = 0;
    for (int64_t i = 0; i < n; i++) {
        hk_i128 xi = nums[i];
        while (xi - nums[lo] > one) lo++;
        if (hi < i) hi = i;
        while (hi + 1 < n && nums[hi + 1] - xi <= one) hi++;
        out[i] = hk_ratio_to_double(prefix[hi + 1] - prefix[lo], hi - lo + 1, k);
    }
    return 0;
}

/* Cluster-based stop rule for floating runs; 1 = equilibrium, -1 = lattice failure. */
static int hk_cluster_equilibrium(const double *x, int64_t n, hk_i128 *nums)
{
    int k = hk_lattice(x, n, nums);
    if (k < 0) return -1;
    double scale = fabs(x[0]) > fabs(x[n - 1]) ? fabs(x[0]) : fabs(x[n - 1]);
    double tol = 1e6 * DBL_EPSILON * scale;
    int64_t start = 0;
    double prev_center = 0.0;
    int have_prev = 0;
    for (int64_t i = 1; i <= n; i++) {
        if (i < n && x[i] - x[i - 1] <= tol) continue;
        hk_i128 s = 0;
        for (int64_t j = start; j < i; j++) s += nums[j];
        double c = hk_ratio_to_double(s, i - start, k);
        if (have_prev && !(c - prev_center > 1.0)) return 0;
        prev_center = c;
        have_prev = 1;
        start = i;
    }
    return 1;
}

/* Continuum model helpers on a piecewise-linear profile (a, v), m+1 knots,
 * with cumulative integrals C. */
static int64_t hk_seg(const double *a, int64_t m, double t)
{
    /* largest k with a[k] <= t, clipped to [0, m-1] */
    int64_t lo = 0, hi = m + 1;
    while (lo < hi) {
        int64_t mid = (lo + hi) / 2;
        if (a[mid] <= t) lo = mid + 1; else hi = mid;
    }
    int64_t k = lo - 1;
    if (k < 0) k = 0;
    if (k > m - 1) k = m - 1;
    return k;
}

static double hk_eval(const double *a, const double *v, int64_t m, double t, int64_t k)
{
    return v[k] + (v[k + 1] - v[k]) * (t - a[k]) / (a[k + 1] - a[k]);
}

static double hk_prim(const double *a, const double *v, const double *C, int64_t m, double t)
{
    int64_t k = hk_seg(a, m, t);
    double xt = hk_eval(a, v, m, t, k);
    return C[k] + (t - a[k]) * (v[k] + xt) / 2.0;
}

/* inf{b : x(b) >= y} */
static double hk_inv_lo(const double *a, const double *v, int64_t m, double y)
{
    if (y <= v[0]) return a[0];
    int64_t lo = 0, hi = m + 1;           /* first k with v[k] >= y */
    while (lo < hi) {
        int64_t mid = (lo + hi) / 2;
        if (v[mid] < y) lo = mid + 1; else hi = mid;
    }
    if (lo > m) return a[m];
    int64_t k = lo - 1;
    return a[k] + (y - v[k]) * (a[k + 1] - a[k]) / (v[k + 1] - v[k]);
}

/* sup{b : x(b) <= y} */
static double hk_inv_hi(const double *a, const double *v, int64_t m, double y)
{
    if (y >= v[m]) return a[m];
    int64_t lo = 0, hi = m + 1;           /* first k with v[k] > y */
    while (lo < hi) {
        int64_t mid = (lo + hi) / 2;
        if (v[mid] <= y) lo = mid + 1; else hi = mid;
    }
    if (lo == 0) return a[0];
    int64_t k = lo - 1;
    return a[k] + (y - v[k]) * (a[k + 1] - a[k]) / (v[k + 1] - v[k]);
}

static void hk_update_many(const double *a, const double *v, const double *C, int64_t m,
                           const double *t, int64_t nt, double *out)
{
    for (int64_t i = 0; i < nt; i++) {
        int64_t k = hk_seg(a, m, t[i]);
        double x = hk_eval(a, v, m, t[i], k);
        double u = hk_inv_lo(a, v, m, x - 1.0);
        double w = hk_inv_hi(a, v, m, x + 1.0);
        double fu = hk_prim(a, v, C, m, u);
        double fw = hk_prim(a, v, C, m, w);
        out[i] = (fw - fu) / (w - u);
    }
}

#endif
