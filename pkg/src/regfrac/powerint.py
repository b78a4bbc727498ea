"""Closed-form integrals against power-law kernels, plus panel Gauss rules.

These are the exact building blocks for the singular integrals that appear
throughout the package: antiderivatives of ``|w|**gamma`` and ``w*|w|**gamma``
valid across the singularity at ``w = 0`` (for integrable exponents), moments
of ``t**gamma`` against polynomials expressed in the distance variable ``t``,
the second antiderivative used for cell-pair double integrals, and
geometrically graded quadrature grids for the remaining smooth integrals.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = [
    "abs_power_antideriv",
    "abs_power_first_moment",
    "pair_kernel_double_integral",
    "poly_power_integral",
    "gauss_rule",
    "panel_gauss_points",
    "geometric_edges",
]


def abs_power_antideriv(w, gamma: float):
    """Antiderivative of ``|w|**gamma``: ``sign(w) |w|**(gamma+1) / (gamma+1)``.

    Valid across w = 0 for gamma > -1.
    """
    w = np.asarray(w, dtype=float)
    return np.sign(w) * np.abs(w) ** (gamma + 1.0) / (gamma + 1.0)


def abs_power_first_moment(w, gamma: float):
    """Antiderivative of ``w * |w|**gamma``: ``|w|**(gamma+2) / (gamma+2)``."""
    w = np.asarray(w, dtype=float)
    return np.abs(w) ** (gamma + 2.0) / (gamma + 2.0)


def pair_kernel_double_integral(p, q, r, t, gamma: float):
    """Exact ``∬_{[p,q]×[r,t]} |sigma - tau|**gamma dsigma dtau`` for gamma > -1.

    Uses the second antiderivative ``G(w) = |w|**(gamma+2) /
    ((gamma+1)(gamma+2))``, which is C¹ across 0, so the formula holds for
    disjoint, touching, overlapping and identical intervals alike.
    """

    def G(w):
        w = np.asarray(w, dtype=float)
        return np.abs(w) ** (gamma + 2.0) / ((gamma + 1.0) * (gamma + 2.0))

    return G(q - r) - G(q - t) - G(p - r) + G(p - t)


def poly_power_integral(coeffs, gamma: float, t0: float, t1: float) -> float:
    """Exact ``∫_{t0}^{t1} (sum_m coeffs[m] t**m) * t**gamma dt`` with 0 <= t0 < t1.

    When ``t0 == 0`` and ``m + gamma < -1`` for some monomial, that moment
    diverges unless its coefficient vanishes; a tiny coefficient (pure
    roundoff) is dropped, anything larger raises.
    """
    if t0 < 0:
        raise ValueError("poly_power_integral needs 0 <= t0")
    total = 0.0
    scale = max(abs(c) for c in coeffs) + 1e-300
    for m, c in enumerate(coeffs):
        if c == 0.0:
            continue
        p = m + gamma + 1.0
        if t0 == 0.0 and p <= 0.0:
            if abs(c) < 1e-12 * scale:
                continue
            raise ValueError(
                f"divergent moment: exponent {m + gamma} at t0=0 "
                f"with coefficient {c}"
            )
        if abs(p) < 1e-12:
            total += c * (np.log(t1) - np.log(t0))
        else:
            total += c * (t1**p - (t0**p if t0 > 0.0 else 0.0)) / p
    return total


@lru_cache(maxsize=None)
def gauss_rule(order: int):
    """Gauss–Legendre nodes and weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def panel_gauss_points(edges: np.ndarray, order: int):
    """Gauss points/weights on each panel of a partition, flattened.

    Returns ``(points, weights)`` with ``len == order * (len(edges) - 1)``.
    """
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_rule(order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts


def geometric_edges(
    lo: float,
    hi: float,
    grade_lo: bool = False,
    grade_hi: bool = False,
    ratio: float = 2.0,
    rel_floor: float = 1e-13,
) -> np.ndarray:
    """Panel edges on [lo, hi], geometrically refined toward graded ends.

    Graded ends get panels shrinking by ``ratio`` down to a relative size of
    ``rel_floor`` of the panel length (smooth integrands need no grading;
    power-law behavior at an endpoint is resolved to near machine accuracy).
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    L = hi - lo
    pts = {lo, hi}
    mid = lo + 0.5 * L
    if grade_lo:
        d = 0.5 * L
        while d > rel_floor * L:
            pts.add(lo + d)
            d /= ratio
    if grade_hi:
        d = 0.5 * L
        while d > rel_floor * L:
            pts.add(hi - d)
            d /= ratio
    if not (grade_lo or grade_hi):
        pts.add(mid)
    return np.array(sorted(pts))
