"""Numba kernel for the coordinate-descent sweeps of the lasso solver."""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def cd_sweeps(zdata, zind, zptr, a, r, coef, q, active, lam, max_iter, tol, intercept, asum):
    """In-place cyclic coordinate descent over `active` columns of a CSC matrix.

    Minimizes (1/n) sum a_i r_i^2 + lam * sum|coef| with an unpenalized
    intercept; `q` caches 2/n * sum a z^2 per column (negative = unset).
    Returns (intercept, converged, sweeps_used).
    """
    n = r.size
    converged = False
    sweeps = 0
    for _ in range(max_iter):
        sweeps += 1
        delta_max = 0.0
        num = 0.0
        for i in range(n):
            num += a[i] * r[i]
        shift = num / asum
        intercept += shift
        for i in range(n):
            r[i] -= shift
        if abs(shift) > delta_max:
            delta_max = abs(shift)
        for idx in range(active.size):
            k = active[idx]
            lo = zptr[k]
            hi = zptr[k + 1]
            if q[k] < 0.0:
                s = 0.0
                for j in range(lo, hi):
                    z = zdata[j]
                    s += a[zind[j]] * z * z
                q[k] = 2.0 * s / n
            qk = q[k]
            if qk == 0.0:
                continue
            s = 0.0
            for j in range(lo, hi):
                s += a[zind[j]] * r[zind[j]] * zdata[j]
            g = 2.0 * s / n + qk * coef[k]
            if g > lam:
                new = (g - lam) / qk
            elif g < -lam:
                new = (g + lam) / qk
            else:
                new = 0.0
            d = new - coef[k]
            if d != 0.0:
                for j in range(lo, hi):
                    r[zind[j]] -= d * zdata[j]
                coef[k] = new
                if abs(d) > delta_max:
                    delta_max = abs(d)
        if delta_max < tol:
            converged = True
            break
    return intercept, converged, sweeps
