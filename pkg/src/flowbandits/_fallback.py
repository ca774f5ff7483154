"""Pure-Python versions of the hot kernels in ``_kernels.pyx``.

Both backends take the same arguments and mutate their array arguments in
place. Keep the arithmetic order identical to the Cython source so the two
agree to the last bit wherever the platform libm does.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfcx

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_TINY = math.ulp(0.0)


def blip_fold(mean: np.ndarray, var: np.ndarray, X: np.ndarray, y: np.ndarray, beta: float) -> None:
    """Apply probit moment-matching updates for each row of ``X`` in order.

    ``y`` holds +1 (success) or -1 (no success) per row.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        return
    if X.shape[1] != mean.shape[0] or X.shape[1] != var.shape[0]:
        raise ValueError("feature dimension does not match the posterior")
    rows, cols = np.nonzero(X)
    starts = np.searchsorted(rows, np.arange(n + 1)).tolist()
    cols_l = cols.tolist()
    vals_l = X[rows, cols].tolist()
    y_l = np.asarray(y, dtype=np.float64).tolist()
    mu = mean.tolist()
    nu = var.tolist()
    beta2 = beta * beta
    for r in range(n):
        lo, hi = starts[r], starts[r + 1]
        m = 0.0
        s2 = beta2
        for q in range(lo, hi):
            j = cols_l[q]
            b = vals_l[q]
            m += b * mu[j]
            s2 += b * b * nu[j]
        s = math.sqrt(s2)
        yr = y_l[r]
        t = yr * m / s
        v = _SQRT_2_OVER_PI / float(erfcx(-t * _INV_SQRT2))
        if v < _TINY:
            v = _TINY
        w = v * (v + t)
        if w < _TINY:
            w = _TINY
        for q in range(lo, hi):
            j = cols_l[q]
            b = vals_l[q]
            nj = nu[j]
            mu[j] = mu[j] + yr * b * (nj / s) * v
            nu[j] = nj * (1.0 - (b * b * nj / s2) * w)
    mean[:] = mu
    var[:] = nu


def q_fold(
    Q: np.ndarray,
    feasible: np.ndarray,
    page: np.ndarray,
    state: np.ndarray,
    ctx: np.ndarray,
    action: np.ndarray,
    reward: np.ndarray,
    terminal: np.ndarray,
    lr: float,
    gamma: float,
) -> None:
    """Sequential tabular Q-learning updates.

    ``Q`` has shape ``(pages, states, contexts, actions)``; state 0 is the
    flow start and state ``a + 1`` means action ``a`` was shown on the
    previous page. ``feasible[page, state, action]`` masks the max over next
    actions.
    """
    n = len(page)
    for k in range(n):
        i = int(page[k])
        s = int(state[k])
        c = int(ctx[k])
        a = int(action[k])
        target = float(reward[k])
        if not terminal[k]:
            ns = a + 1
            row = Q[i + 1, ns, c]
            best = -math.inf
            for a2 in range(Q.shape[3]):
                if feasible[i + 1, ns, a2] and row[a2] > best:
                    best = row[a2]
            target += gamma * best
        old = Q[i, s, c, a]
        Q[i, s, c, a] = old + lr * (target - old)
