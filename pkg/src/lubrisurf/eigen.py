"""Dense eigensolvers.

``jacobi_eigh``: cyclic Jacobi rotations for small symmetric matrices.
``eigvals``: Householder reduction to upper Hessenberg form followed by the
implicit double-shift (Francis) QR iteration, real arithmetic, with 2x2
diagonal blocks resolved into complex-conjugate pairs.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError

_EPS = np.finfo(float).eps


def jacobi_eigh(a, tol=1e-15, max_sweeps=50):
    """Eigenvalues (ascending) and eigenvectors of a symmetric matrix."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("square matrix expected")
    v = np.eye(n)
    scale = max(np.abs(a).max(), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = math.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                v[:, idx] = v[:, idx] @ rot
    else:
        raise ConvergenceError(f"Jacobi iteration did not converge for size {n}")
    w = np.diag(a).copy()
    order = np.argsort(w)
    return w[order], v[:, order]


def _house(x):
    """Householder vector v (v[0] = 1) and beta with (I - beta v v^T) x = alpha e1."""
    sigma = float(x[1:] @ x[1:])
    v = np.array(x, dtype=float)
    v[0] = 1.0
    if sigma == 0.0:
        return v, 0.0
    x0 = x[0]
    mu = math.sqrt(x0 * x0 + sigma)
    v0 = x0 - mu if x0 <= 0 else -sigma / (x0 + mu)
    beta = 2.0 * v0 * v0 / (sigma + v0 * v0)
    v[1:] = x[1:] / v0
    return v, beta


def hessenberg(a):
    """Upper Hessenberg matrix orthogonally similar to ``a``."""
    h = np.array(a, dtype=float)
    n = h.shape[0]
    for k in range(n - 2):
        v, beta = _house(h[k + 1:, k])
        if beta == 0.0:
            continue
        h[k + 1:, k:] -= beta * np.outer(v, v @ h[k + 1:, k:])
        h[:, k + 1:] -= beta * np.outer(h[:, k + 1:] @ v, v)
        h[k + 2:, k] = 0.0
    return h


def _eig2(a, b, c, d):
    """Eigenvalues of [[a, b], [c, d]]."""
    p = 0.5 * (a - d)
    disc = p * p + b * c
    tr = 0.5 * (a + d)
    if disc >= 0.0:
        r = math.sqrt(disc)
        # largest-magnitude root first, the other from the determinant
        l1 = tr + math.copysign(r, tr) if tr != 0.0 else r
        det = a * d - b * c
        l2 = det / l1 if l1 != 0.0 else tr - r
        return complex(l1), complex(l2)
    r = math.sqrt(-disc)
    return complex(tr, r), complex(tr, -r)


def _francis_step(w, exceptional=None):
    """One implicit double-shift QR sweep on the unreduced Hessenberg block ``w`` (in place)."""
    p = w.shape[0]
    if exceptional is None:
        s = w[p - 2, p - 2] + w[p - 1, p - 1]
        t = w[p - 2, p - 2] * w[p - 1, p - 1] - w[p - 2, p - 1] * w[p - 1, p - 2]
    else:
        s, t = exceptional
    x = w[0, 0] * w[0, 0] + w[0, 1] * w[1, 0] - s * w[0, 0] + t
    y = w[1, 0] * (w[0, 0] + w[1, 1] - s)
    z = w[1, 0] * w[2, 1]
    for k in range(p - 2):
        v, beta = _house(np.array([x, y, z]))
        if beta != 0.0:
            q = max(0, k - 1)
            blk = w[k:k + 3, q:]
            blk -= beta * np.outer(v, v @ blk)
            r = min(k + 4, p)
            blk = w[:r, k:k + 3]
            blk -= beta * np.outer(blk @ v, v)
        x = w[k + 1, k]
        y = w[k + 2, k]
        if k < p - 3:
            z = w[k + 3, k]
    v, beta = _house(np.array([x, y]))
    if beta != 0.0:
        blk = w[p - 2:, p - 3:]
        blk -= beta * np.outer(v, v @ blk)
        blk = w[:, p - 2:]
        blk -= beta * np.outer(blk @ v, v)


def eigvals(a, max_iter=None):
    """All eigenvalues of a real square matrix, as a complex array (unordered).

    Raises ConvergenceError when the total number of QR sweeps exceeds
    ``max_iter`` (default ``100 * n``).
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("square matrix expected")
    if n == 0:
        return np.zeros(0, dtype=complex)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if max_iter is None:
        max_iter = 100 * n
    h = hessenberg(a)
    norm = max(np.abs(h).max(), np.finfo(float).tiny)
    out = []
    hi = n - 1
    total = 0
    stall = 0
    while hi >= 0:
        if hi == 0:
            out.append(complex(h[0, 0]))
            break
        # deflation: zero negligible subdiagonal entries in the active part
        d = np.abs(np.diag(h)[:hi + 1])
        sub = np.abs(np.diag(h, -1)[:hi])
        scale = d[:-1] + d[1:]
        scale[scale == 0.0] = norm
        small = np.flatnonzero(sub <= _EPS * scale)
        lo = small[-1] + 1 if small.size else 0
        if small.size:
            h[lo, lo - 1] = 0.0
        if lo == hi:
            out.append(complex(h[hi, hi]))
            hi -= 1
            stall = 0
            continue
        if lo == hi - 1:
            out.extend(_eig2(h[lo, lo], h[lo, hi], h[hi, lo], h[hi, hi]))
            hi -= 2
            stall = 0
            continue
        total += 1
        stall += 1
        if total > max_iter:
            raise ConvergenceError(
                f"QR iteration exceeded {max_iter} sweeps on a {n}x{n} matrix")
        w = h[lo:hi + 1, lo:hi + 1]
        exceptional = None
        if stall % 10 == 0:
            mag = abs(w[-1, -2]) + abs(w[-2, -3])
            mu = w[-1, -1] + 0.75 * mag
            exceptional = (2.0 * mu, mu * mu - 0.4375 * mag * mag)
        _francis_step(w, exceptional)
    return np.array(out, dtype=complex)
