"""Pure numpy implementations of the hot kernels.

Must stay arithmetic-for-arithmetic identical to ``_ckernels.pyx``: dot
products are evaluated as ``a0*v0 + a1*v1 + a2*v2`` left to right, and the
per-sample table contributions are multiples of 1/2, so sample sums are exact
regardless of summation order.
"""

import numpy as np

MAX_ENTANGLED = 0
TONER_BACON = 1
SEMIANALYTICAL = 2


def _sgn(t):
    return np.where(t >= 0.0, 1.0, -1.0)


def _step(t):
    return (t > 0.0).astype(float)


def _dot(m, v0, v1, v2):
    return m[0] * v0 + m[1] * v1 + m[2] * v2


def _hemisphere(m, l1, l2, p):
    u, v, w, x, y = p
    lam0 = u * l1[:, 0] + l2[:, 0]
    lam1 = u * l1[:, 1] + l2[:, 1]
    lam2 = u * l1[:, 2] + l2[:, 2] + v
    return _sgn(_dot(m, lam0, lam1, lam2) + (w + x * l1[:, 2] + y * l2[:, 2]))


def _cells_from_outputs(A, B):
    idx = (A < 0).astype(np.int64) * 2 + (B < 0).astype(np.int64)
    return np.bincount(idx, minlength=4).astype(float)


def mc_table_sums(kind, a, b, l1, l2, params=None):
    """Sum over samples of the per-LHV outcome table, cells ordered ++, +-, -+, --."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d1 = _dot(a, l1[:, 0], l1[:, 1], l1[:, 2])
    d2 = _dot(a, l2[:, 0], l2[:, 1], l2[:, 2])
    if kind in (MAX_ENTANGLED, TONER_BACON):
        c = _sgn(d1) * _sgn(d2)
        v0 = l1[:, 0] + c * l2[:, 0]
        v1 = l1[:, 1] + c * l2[:, 1]
        v2 = l1[:, 2] + c * l2[:, 2]
        if kind == MAX_ENTANGLED:
            A = -_sgn(_dot(a, v0, v1, v2))
        else:
            A = -_sgn(d1)
        B = _sgn(_dot(b, v0, v1, v2))
        return _cells_from_outputs(A, B)
    if kind != SEMIANALYTICAL:
        raise ValueError(f"unknown protocol kind {kind}")
    p = np.asarray(params, dtype=float)
    pa1 = (1.0 - _hemisphere(a, l1, l2, p[0:5])) * 0.5
    pa2 = (1.0 + _hemisphere(a, l1, l2, p[5:10])) * 0.5
    pb1 = (1.0 + _hemisphere(b, l1, l2, p[10:15])) * 0.5
    pb2 = (1.0 - _hemisphere(b, l1, l2, p[15:20])) * 0.5
    bc = p[20] + p[21] * l2[:, 2] * (1.0 - l1[:, 2])
    f = (
        _step(d1 + bc) * _step(d2 + bc)
        + _step(-d1 + bc) * _step(-d2 + bc)
        - _step(-d1 - bc) * _step(d2 - bc)
        - _step(d1 - bc) * _step(-d2 - bc)
    )
    pc = 0.5 * (1.0 - np.clip(f, -1.0, 1.0))
    qc = 1.0 - pc
    out = np.empty(4)
    out[0] = np.sum(pc * pa1 * pb1 + qc * pa2 * pb2)
    out[1] = np.sum(pc * pa1 * (1.0 - pb1) + qc * pa2 * (1.0 - pb2))
    out[2] = np.sum(pc * (1.0 - pa1) * pb1 + qc * (1.0 - pa2) * pb2)
    out[3] = np.sum(pc * (1.0 - pa1) * (1.0 - pb1) + qc * (1.0 - pa2) * (1.0 - pb2))
    return out


def oracle_row_scores(direction, rows, tol):
    """Best Alice output for every (x, Bob row).

    Returns ``(G, A)`` with ``G[x, r] = max_a sum_y direction[x, y, a, rows[r, y]]``
    and ``A[x, r]`` the smallest ``a`` within ``tol`` of that maximum.
    """
    nx, ny, na, nb = direction.shape
    nrows = rows.shape[0]
    scores = np.zeros((nx, na, nrows))
    for y in range(ny):
        scores += direction[:, y][:, :, rows[:, y]]
    G = scores.max(axis=1)
    A = np.argmax(scores >= (G[:, None, :] - tol), axis=1)
    return G, A.astype(np.int64)
