"""Independent reference implementations used only by the tests."""

import itertools

import numpy as np
from scipy.optimize import minimize


def geomed_oracle(V):
    """Geometric median of the rows of ``V`` by vertex check plus quasi-Newton descent.

    A data point ``v_j`` is the minimiser iff the sum of unit vectors pointing
    from the other points to it has norm at most one.
    """
    V = np.asarray(V, dtype=float)
    for j, vj in enumerate(V):
        diff = vj - np.delete(V, j, axis=0)
        r = np.linalg.norm(diff, axis=1)
        if np.any(r == 0):
            continue
        if np.linalg.norm((diff / r[:, None]).sum(axis=0)) <= 1.0:
            return vj.copy()

    def f(z):
        return np.linalg.norm(V - z, axis=1).sum()

    def g(z):
        d = z - V
        return (d / np.linalg.norm(d, axis=1)[:, None]).sum(axis=0)

    res = minimize(f, V.mean(axis=0), jac=g, method="BFGS", options={"gtol": 1e-13, "maxiter": 10000})
    return res.x


def resample_enumeration(R, s):
    """All equally likely index plans: distinct orderings of the s-fold multiset, cut into (R, s)."""
    pool = np.repeat(np.arange(R), s)
    plans = {tuple(p) for p in itertools.permutations(pool)}
    return [np.array(p).reshape(R, s) for p in sorted(plans)]
