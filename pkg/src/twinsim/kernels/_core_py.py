"""Pure-numpy kernel implementations.

Must stay bit-identical to the compiled ``_core``: every elementwise
statement here corresponds to one statement in the C loop, in the same
order, so both backends produce the same float64 bits.
"""

import numpy as np

_MAX_REFLECTIONS = 64


def _reflect(pos, vel, lo, hi):
    for _ in range(_MAX_REFLECTIONS):
        below = pos < lo
        above = pos > hi
        if not (below.any() or above.any()):
            return
        if below.any():
            pos[below] = 2.0 * lo - pos[below]
            vel[below] = -vel[below]
        if above.any():
            pos[above] = 2.0 * hi - pos[above]
            vel[above] = -vel[above]
    np.clip(pos, lo, hi, out=pos)


def predict_particles(x, y, vx, vy, noise_x, noise_y, noise_vx, noise_vy,
                      dt, xmin, xmax, ymin, ymax):
    """Constant-velocity step with additive noise and wall reflection.

    Updates ``x, y, vx, vy`` in place: positions advance with the current
    velocity plus position noise, velocities pick up their noise, and
    anything leaving the area bounces back with the velocity component
    flipped.
    """
    if xmax <= xmin or ymax <= ymin:
        raise ValueError("area bounds must be non-empty")
    x += vx * dt
    x += noise_x
    y += vy * dt
    y += noise_y
    vx += noise_vx
    vy += noise_vy
    _reflect(x, vx, xmin, xmax)
    _reflect(y, vy, ymin, ymax)


def weight_particles(cell_idx, table, obs_twins, obs_counts):
    """Unnormalized likelihood per particle.

    ``table`` is the dense fingerprint ``(n_cells, n_twins, n_bins)``;
    each particle's weight is the product over the observed twins of the
    probability of the observed jump count at the particle's cell.
    """
    w = np.ones(cell_idx.shape[0], dtype=np.float64)
    for j in range(obs_twins.shape[0]):
        w *= table[cell_idx, obs_twins[j], obs_counts[j]]
    return w


def resample_indices(cdf, uniforms):
    """Categorical draws by inverse CDF: first index with cdf[i] >= u."""
    idx = np.searchsorted(cdf, uniforms, side="left")
    return np.minimum(idx, cdf.shape[0] - 1).astype(np.int64)
