# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel implementations.

Mirrors ``_core_py`` statement for statement; see that module for the
bit-compatibility contract.  Built with -ffp-contract=off so the C
arithmetic rounds exactly like the numpy fallback.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF MAX_REFLECTIONS = 64


cdef inline void _reflect_scalar(double* pos, double* vel, double lo, double hi) noexcept nogil:
    cdef int n = 0
    while (pos[0] < lo or pos[0] > hi) and n < 2 * MAX_REFLECTIONS:
        if pos[0] < lo:
            pos[0] = 2.0 * lo - pos[0]
            vel[0] = -vel[0]
        else:
            pos[0] = 2.0 * hi - pos[0]
            vel[0] = -vel[0]
        n += 1
    if pos[0] < lo:
        pos[0] = lo
    elif pos[0] > hi:
        pos[0] = hi


def predict_particles(double[::1] x, double[::1] y,
                      double[::1] vx, double[::1] vy,
                      double[::1] noise_x, double[::1] noise_y,
                      double[::1] noise_vx, double[::1] noise_vy,
                      double dt, double xmin, double xmax,
                      double ymin, double ymax):
    """Constant-velocity step with additive noise and wall reflection."""
    if xmax <= xmin or ymax <= ymin:
        raise ValueError("area bounds must be non-empty")
    cdef Py_ssize_t i, n = x.shape[0]
    with nogil:
        for i in range(n):
            x[i] = x[i] + vx[i] * dt
            x[i] = x[i] + noise_x[i]
            y[i] = y[i] + vy[i] * dt
            y[i] = y[i] + noise_y[i]
            vx[i] = vx[i] + noise_vx[i]
            vy[i] = vy[i] + noise_vy[i]
            _reflect_scalar(&x[i], &vx[i], xmin, xmax)
            _reflect_scalar(&y[i], &vy[i], ymin, ymax)


def weight_particles(long long[::1] cell_idx, double[:, :, ::1] table,
                     long long[::1] obs_twins, long long[::1] obs_counts):
    """Unnormalized likelihood per particle (product over observed twins)."""
    cdef Py_ssize_t k, j
    cdef Py_ssize_t n = cell_idx.shape[0]
    cdef Py_ssize_t m = obs_twins.shape[0]
    out = np.ones(n, dtype=np.float64)
    cdef double[::1] w = out
    with nogil:
        for j in range(m):
            for k in range(n):
                w[k] = w[k] * table[cell_idx[k], obs_twins[j], obs_counts[j]]
    return out


def resample_indices(double[::1] cdf, double[::1] uniforms):
    """Categorical draws by inverse CDF: first index with cdf[i] >= u."""
    cdef Py_ssize_t n = cdf.shape[0]
    cdef Py_ssize_t m = uniforms.shape[0]
    out = np.empty(m, dtype=np.int64)
    cdef long long[::1] idx = out
    cdef Py_ssize_t i, lo, hi, mid
    with nogil:
        for i in range(m):
            lo = 0
            hi = n
            while lo < hi:
                mid = (lo + hi) // 2
                if cdf[mid] < uniforms[i]:
                    lo = mid + 1
                else:
                    hi = mid
            if lo > n - 1:
                lo = n - 1
            idx[i] = lo
    return out
