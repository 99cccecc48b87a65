"""Smooth replacements for max/min and the [0, 1] clamp.

``smooth_max(a, b, eps) = (a + b + sqrt((a - b)**2 + eps)) / 2`` is an
infinitely differentiable over-approximation of ``max`` for ``eps > 0``
and recovers the exact operator at ``eps = 0``.  Its error is bounded by
``sqrt(eps)/2``, attained at ``a == b``.  All functions broadcast like
numpy ufuncs.
"""

from __future__ import annotations

import numpy as np

__all__ = ["smooth_max", "smooth_min", "clamp01", "smooth_max_grad",
           "smooth_min_grad", "clamp01_grad"]


def smooth_max(a, b, eps):
    """Differentiable maximum; exact for eps = 0 (total function)."""
    d = np.asarray(a) - b
    return 0.5 * (a + b + np.sqrt(d * d + eps))


def smooth_min(a, b, eps):
    """Differentiable minimum, the max-dual: -smooth_max(-a, -b, eps)."""
    d = np.asarray(a) - b
    return 0.5 * (a + b - np.sqrt(d * d + eps))


def smooth_max_grad(a, b, eps):
    """(d/da, d/db) of smooth_max.  Requires eps > 0."""
    d = np.asarray(a) - b
    s = np.sqrt(d * d + eps)
    r = d / s
    return 0.5 * (1.0 + r), 0.5 * (1.0 - r)


def smooth_min_grad(a, b, eps):
    """(d/da, d/db) of smooth_min.  Requires eps > 0."""
    d = np.asarray(a) - b
    s = np.sqrt(d * d + eps)
    r = d / s
    return 0.5 * (1.0 - r), 0.5 * (1.0 + r)


def clamp01(x, eps):
    """Smoothed max(0, min(1, x)); the exact clamp at eps = 0.

    The inner min is applied first; the composition order matters at
    eps > 0 and is fixed by the model calibration.
    """
    return smooth_max(0.0, smooth_min(1.0, x, eps), eps)


def clamp01_grad(x, eps):
    """d/dx of clamp01.  Requires eps > 0."""
    inner = smooth_min(1.0, x, eps)
    _, dinner = smooth_min_grad(1.0, x, eps)
    _, douter = smooth_max_grad(0.0, inner, eps)
    return douter * dinner
