"""Hot loops with a numba path and a pure-numpy fallback.

Set ``ROTAF_DISABLE_NUMBA=1`` to force the numpy path (also used when numba
is not installed). Both paths run the same iteration and record the same
diagnostics; results agree to rounding.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

_DISABLED = os.environ.get("ROTAF_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")
HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED


def weiszfeld_numpy(V, z0, eps, tol, max_iters):
    """Smoothed Weiszfeld on the rows of ``V`` starting at ``z0``.

    Returns ``(z, iterations, converged, objective)`` where ``objective[i]`` is
    the smoothed objective at the i-th iterate (``objective[0]`` at ``z0``).
    """
    z = z0.copy()
    obj = np.empty(max_iters + 1)
    converged = False
    it = 0
    while True:
        d = np.sqrt(((V - z) ** 2).sum(axis=1))
        obj[it] = np.where(d <= eps, d * d / (2 * eps) + eps / 2, d).sum()
        if converged or it == max_iters:
            break
        theta = 1.0 / np.maximum(eps, d)
        z_new = theta @ V / theta.sum()
        step = np.sqrt(((z_new - z) ** 2).sum())
        z = z_new
        it += 1
        converged = step <= tol * max(1.0, np.sqrt((z * z).sum()))
    return z, it, converged, obj[: it + 1]


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _weiszfeld_nb(V, z0, eps, tol, max_iters):
        k, p = V.shape
        z = z0.copy()
        z_new = np.empty(p)
        d = np.empty(k)
        obj = np.empty(max_iters + 1)
        converged = False
        it = 0
        while True:
            total = 0.0
            for i in range(k):
                acc = 0.0
                for j in range(p):
                    diff = V[i, j] - z[j]
                    acc += diff * diff
                d[i] = np.sqrt(acc)
                if d[i] <= eps:
                    total += d[i] * d[i] / (2 * eps) + eps / 2
                else:
                    total += d[i]
            obj[it] = total
            if converged or it == max_iters:
                break
            wsum = 0.0
            for j in range(p):
                z_new[j] = 0.0
            for i in range(k):
                th = 1.0 / max(eps, d[i])
                wsum += th
                for j in range(p):
                    z_new[j] += th * V[i, j]
            step = 0.0
            znorm = 0.0
            for j in range(p):
                z_new[j] /= wsum
                diff = z_new[j] - z[j]
                step += diff * diff
                z[j] = z_new[j]
                znorm += z[j] * z[j]
            it += 1
            converged = np.sqrt(step) <= tol * max(1.0, np.sqrt(znorm))
        return z, it, converged, obj[: it + 1]

    def weiszfeld_numba(V, z0, eps, tol, max_iters):
        return _weiszfeld_nb(np.ascontiguousarray(V, dtype=np.float64),
                             np.ascontiguousarray(z0, dtype=np.float64),
                             float(eps), float(tol), int(max_iters))
else:  # pragma: no cover
    weiszfeld_numba = None


def weiszfeld(V, z0, eps, tol, max_iters):
    if USE_NUMBA:
        return weiszfeld_numba(V, z0, eps, tol, max_iters)
    return weiszfeld_numpy(V, z0, eps, tol, max_iters)
