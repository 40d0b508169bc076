"""Compiled orbit kernels for quadratic 3D maps of the form ``v' = A v + c - e3 * v[2]**2``.

Both the Henon map and the rescaled first-return map have this shape, so the
long-orbit loops live here once.  Tangent vectors are re-orthonormalized every
step with modified Gram-Schmidt.
"""

import numpy as np
from numba import njit

# norms below this are treated as a collapsed tangent direction
_TINY = 1e-300


@njit(cache=True, nogil=True)
def _step(A, c, v, out):
    q = v[2] * v[2]
    for i in range(3):
        out[i] = A[i, 0] * v[0] + A[i, 1] * v[1] + A[i, 2] * v[2] + c[i]
    out[2] -= q


@njit(cache=True, nogil=True)
def _escaped(v, bound):
    for i in range(3):
        if not (abs(v[i]) <= bound):
            return True
    return False


@njit(cache=True, nogil=True)
def iterate(A, c, v0, transient, n, bound):
    """Return (states[n, 3], diverged_step); diverged_step is 0 when bounded."""
    states = np.empty((n, 3))
    v = v0.copy()
    w = np.empty(3)
    for t in range(transient + n):
        _step(A, c, v, w)
        v[:] = w
        if _escaped(v, bound):
            return states[: max(t - transient, 0)], t + 1
        if t >= transient:
            states[t - transient] = v
    return states, 0


@njit(cache=True, nogil=True)
def lyapunov(A, c, v0, transient, n, n_blocks, bound):
    """QR (Gram-Schmidt) Lyapunov spectrum.

    Returns (block_sums[n_blocks, 3], diverged_step).  Row ``j`` holds the summed
    log stretch factors of the ``j``-th block of ``n // n_blocks`` steps; the
    remainder of ``n`` is folded into the last block.
    """
    v = v0.copy()
    w = np.empty(3)
    for t in range(transient):
        _step(A, c, v, w)
        v[:] = w
        if _escaped(v, bound):
            return np.zeros((n_blocks, 3)), t + 1

    Q = np.eye(3)
    W = np.empty((3, 3))
    J = A.copy()
    sums = np.zeros((n_blocks, 3))
    block_len = n // n_blocks
    for t in range(n):
        J[2, 2] = A[2, 2] - 2.0 * v[2]
        for i in range(3):
            for j in range(3):
                W[i, j] = J[i, 0] * Q[0, j] + J[i, 1] * Q[1, j] + J[i, 2] * Q[2, j]
        blk = min(t // block_len, n_blocks - 1)
        for j in range(3):
            for k in range(j):
                dot = W[0, j] * Q[0, k] + W[1, j] * Q[1, k] + W[2, j] * Q[2, k]
                for i in range(3):
                    W[i, j] -= dot * Q[i, k]
            nrm = np.sqrt(W[0, j] ** 2 + W[1, j] ** 2 + W[2, j] ** 2)
            if nrm <= _TINY:
                sums[blk, j] = -np.inf
                # complete the basis with the standard vector least covered so far
                best = 0
                best_res = -1.0
                for e in range(3):
                    res = 1.0
                    for k in range(j):
                        res -= Q[e, k] ** 2
                    if res > best_res:
                        best_res = res
                        best = e
                for i in range(3):
                    W[i, j] = 0.0
                W[best, j] = 1.0
                for k in range(j):
                    dot = Q[best, k]
                    for i in range(3):
                        W[i, j] -= dot * Q[i, k]
                nrm = np.sqrt(W[0, j] ** 2 + W[1, j] ** 2 + W[2, j] ** 2)
            else:
                sums[blk, j] += np.log(nrm)
            for i in range(3):
                Q[i, j] = W[i, j] / nrm
        _step(A, c, v, w)
        v[:] = w
        if _escaped(v, bound):
            return sums, transient + t + 1
    return sums, 0
