# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled float64 kernels; see ``_hk_core.h`` for the arithmetic contract."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef extern from "_hk_core.h":
    ctypedef long long hk_i128 "__int128"
    int c_hk_step "hk_step_f64"(const double *x, int64_t n, double *out,
                                hk_i128 *nums, hk_i128 *prefix) nogil
    int c_cluster_eq "hk_cluster_equilibrium"(const double *x, int64_t n, hk_i128 *nums) nogil
    void c_update_many "hk_update_many"(const double *a, const double *v, const double *C,
                                        int64_t m, const double *t, int64_t nt, double *out) nogil


def hk_step_f64(cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] x not None):
    """One HK step; returns None when the exponent span is too wide."""
    cdef int64_t n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] out = np.empty(n, dtype=np.float64)
    cdef hk_i128 *nums = <hk_i128 *> malloc(sizeof(hk_i128) * (n + 1))
    cdef hk_i128 *prefix = <hk_i128 *> malloc(sizeof(hk_i128) * (n + 1))
    cdef int rc
    if nums == NULL or prefix == NULL:
        free(nums)
        free(prefix)
        raise MemoryError()
    with nogil:
        rc = c_hk_step(&x[0], n, &out[0], nums, prefix)
    free(nums)
    free(prefix)
    if rc < 0:
        return None
    return out


def run_f64(cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] x not None, int64_t max_steps):
    """Iterate until the cluster stop rule fires; ``None`` on lattice overflow."""
    cdef int64_t n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] cur = x.copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] nxt = np.empty(n, dtype=np.float64)
    cdef hk_i128 *nums = <hk_i128 *> malloc(sizeof(hk_i128) * (n + 1))
    cdef hk_i128 *prefix = <hk_i128 *> malloc(sizeof(hk_i128) * (n + 1))
    cdef int64_t steps = 0
    cdef int eq = 0, rc = 0
    cdef double *pc
    cdef double *pn
    cdef double *tmp
    cdef double *base
    if nums == NULL or prefix == NULL:
        free(nums)
        free(prefix)
        raise MemoryError()
    pc = &cur[0]
    pn = &nxt[0]
    base = pc
    with nogil:
        eq = c_cluster_eq(pc, n, nums)
        while eq == 0 and steps < max_steps:
            rc = c_hk_step(pc, n, pn, nums, prefix)
            if rc < 0:
                eq = -1
                break
            tmp = pc
            pc = pn
            pn = tmp
            steps += 1
            eq = c_cluster_eq(pc, n, nums)
    free(nums)
    free(prefix)
    if eq < 0:
        return None
    if pc == base:
        return cur, int(steps), bool(eq == 1)
    return nxt, int(steps), bool(eq == 1)


def update_many_f64(cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] a not None,
                    cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] v not None,
                    cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] C not None,
                    cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] t not None):
    """Continuum update evaluated at every abscissa in ``t``."""
    cdef int64_t m = a.shape[0] - 1
    cdef int64_t nt = t.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] out = np.empty(nt, dtype=np.float64)
    if nt == 0:
        return out
    with nogil:
        c_update_many(&a[0], &v[0], &C[0], m, &t[0], nt, &out[0])
    return out
