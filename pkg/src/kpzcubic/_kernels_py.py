"""Pure numpy versions of the hot loops; used when the extension is absent."""

import numpy as np


def weighted_kernel(nodes, weights, f, g):
    """Matrix [f(u_a).g(u_b) / (u_a - u_b) * w_b] with zero diagonal."""
    nodes = np.asarray(nodes, dtype=complex)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    mat = (np.asarray(f, dtype=complex) @ np.asarray(g, dtype=complex).T) / diff
    np.fill_diagonal(mat, 0.0)
    return mat * np.asarray(weights, dtype=complex)[None, :]


def cauchy_sum(z, y, vals):
    """sum_k vals_k / (i*y_k - z) for each z (trapezoid body, no step factor)."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape, dtype=complex)
    iy = 1j * np.asarray(y, dtype=float)
    vals = np.asarray(vals, dtype=complex)
    flat = z.ravel()
    res = out.ravel()
    # chunk to keep memory bounded for large node sets
    step = 256
    for s in range(0, len(flat), step):
        zz = flat[s:s + step]
        res[s:s + step] = (vals[None, :] / (iy[None, :] - zz[:, None])).sum(axis=1)
    return res.reshape(z.shape)
