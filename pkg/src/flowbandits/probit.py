"""Standard normal pdf/cdf/inverse and the truncated-Gaussian corrections.

``v(t) = pdf(t) / cdf(t)`` and ``w(t) = v(t) * (v(t) + t)`` drive the probit
posterior update. The ratio is evaluated through the scaled complementary
error function so that it stays accurate deep in the lower tail, where
``cdf(t)`` itself underflows.

Scalar functions take and return Python floats; the ``*_array`` variants are
numpy-vectorised and used on the simulation hot path.
"""

from __future__ import annotations

import math
from statistics import NormalDist

import numpy as np
from scipy.special import erfcx, ndtr

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_INV_SQRT2 = 1.0 / math.sqrt(2.0)

# Smallest positive double. Quantities that are strictly positive in exact
# arithmetic but fall below the float64 range round up to this, not to zero.
TINY = math.ulp(0.0)

_STD_NORMAL = NormalDist()


def phi_pdf(t: float) -> float:
    """Standard normal density."""
    return max(_INV_SQRT_2PI * math.exp(-0.5 * t * t), TINY)


def phi_cdf(t: float) -> float:
    """Standard normal cdf, accurate to full relative precision in both tails."""
    return 0.5 * math.erfc(-t * _INV_SQRT2)


def phi_inv(p: float) -> float:
    """Inverse of :func:`phi_cdf` on the open interval (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"phi_inv requires 0 < p < 1, got {p!r}")
    return _STD_NORMAL.inv_cdf(p)


def v_correction(t: float) -> float:
    """Additive correction ``pdf(t) / cdf(t)``.

    Uses ``pdf(t)/cdf(t) = sqrt(2/pi) / erfcx(-t/sqrt(2))``, which never forms
    the (possibly underflowed) cdf explicitly.
    """
    return max(_SQRT_2_OVER_PI / float(erfcx(-t * _INV_SQRT2)), TINY)


def w_correction(t: float) -> float:
    """Multiplicative correction ``v(t) * (v(t) + t)``, in (0, 1)."""
    v = v_correction(t)
    return max(v * (v + t), TINY)


def phi_cdf_array(t: np.ndarray) -> np.ndarray:
    return ndtr(t)


def v_correction_array(t: np.ndarray) -> np.ndarray:
    return np.maximum(_SQRT_2_OVER_PI / erfcx(-np.asarray(t, dtype=float) * _INV_SQRT2), TINY)


def w_correction_array(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    v = v_correction_array(t)
    return np.maximum(v * (v + t), TINY)
