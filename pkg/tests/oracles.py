"""Independent reference computations for the test suite.

Nothing here imports the code under test: tail values come from mpmath at
50 digits, posterior moments from adaptive quadrature, planning from
brute-force enumeration.
"""

import itertools
import math

import mpmath as mp
import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar
from scipy.special import log_ndtr

mp.mp.dps = 50


def mp_v(t):
    t = mp.mpf(t)
    return mp.npdf(t) / mp.ncdf(t)


def mp_w(t):
    t = mp.mpf(t)
    v = mp_v(t)
    return v * (v + t)


def tilted_moments(m, s2, y, beta):
    """Mean and variance of ``s ~ N(m, s2)`` reweighted by ``Phi(y s / beta)``, by quadrature.

    Works in the standardised variable ``z``; the integrand is log-concave
    with curvature >= 1, so a +-20 window around its mode holds all the mass
    even when the tilt pushes it far into the prior's tail.
    """
    s = math.sqrt(s2)

    def log_weight(z):
        return -0.5 * z * z + log_ndtr(y * (m + s * z) / beta)

    mode = minimize_scalar(lambda z: -log_weight(z), bounds=(-80, 80), method="bounded",
                           options={"xatol": 1e-10}).x
    peak = log_weight(mode)

    def weight(z):
        return math.exp(log_weight(z) - peak)

    lo, hi = mode - 20.0, mode + 20.0
    opts = dict(epsabs=1e-12, epsrel=1e-12, limit=400, points=[mode])
    z0 = quad(weight, lo, hi, **opts)[0]
    mean = quad(lambda z: (m + s * z) * weight(z), lo, hi, **opts)[0] / z0
    var = quad(lambda z: (m + s * z - mean) ** 2 * weight(z), lo, hi, **opts)[0] / z0
    return mean, var


def projected_update(mean, var, b, y, beta):
    """Per-coordinate moments of ``N(W; mean, diag var) * Phi(y b.W / beta)``.

    Reduces to the scalar ``s = b.W``: ``W | s`` is Gaussian with a mean
    linear in ``s``, so each coordinate's moments follow from the tilted
    moments of ``s``, which are integrated numerically.
    """
    m = sum(bj * mj for bj, mj in zip(b, mean))
    s2 = sum(bj * bj * vj for bj, vj in zip(b, var))
    es, vs = tilted_moments(m, s2, y, beta)
    out_m, out_v = [], []
    for bj, mj, vj in zip(b, mean, var):
        k = bj * vj / s2
        out_m.append(mj + k * (es - m))
        out_v.append(vj - k * bj * vj + k * k * vs)
    return np.array(out_m, dtype=float), np.array(out_v, dtype=float)


def moments_1d(mu, nu, b, y, beta):
    """Direct one-dimensional quadrature of ``N(w; mu, nu) * Phi(y b w / beta)``."""
    mu, nu, b, beta = map(mp.mpf, (mu, nu, b, beta))
    sd = mp.sqrt(nu)

    def dens(w):
        return mp.npdf(w, mu, sd) * mp.ncdf(y * b * w / beta)

    z0 = mp.quad(dens, [-mp.inf, mu, mp.inf])
    m1 = mp.quad(lambda w: w * dens(w), [-mp.inf, mu, mp.inf]) / z0
    m2 = mp.quad(lambda w: w * w * dens(w), [-mp.inf, mu, mp.inf]) / z0
    return float(m1), float(m2 - m1**2)


def layout_value(probs):
    """Long-term reward ``1 - prod(1 - R_i)`` of a layout with page success probabilities ``probs``."""
    out = 1.0
    for p in probs:
        out *= 1.0 - p
    return 1.0 - out


def brute_force_best(first, pages, masks=None):
    """Enumerate every feasible layout; return (best value, set of argmax layouts)."""
    sizes = [len(first)] + [t.shape[1] for t in pages]
    best, arg = -1.0, set()
    for traj in itertools.product(*(range(n) for n in sizes)):
        ok = all(masks is None or masks[i - 1][traj[i - 1], traj[i]] for i in range(1, len(traj)))
        if not ok:
            continue
        probs = [first[traj[0]]] + [pages[i - 1][traj[i - 1], traj[i]] for i in range(1, len(traj))]
        val = layout_value(probs)
        if val > best + 1e-13:
            best, arg = val, {traj}
        elif abs(val - best) <= 1e-13:
            arg.add(traj)
    return best, arg
