"""Order ratios, oscillation and the Hilbert projective metric on the orthant.

For the standard cone the bounds ``m(u/v) = sup{a : a v <= u}`` and
``M(u/v) = inf{a : u <= a v}`` reduce to coordinate ratios over the support
of ``v``, subject to sign conditions on the coordinates where ``v``
vanishes.  Missing bounds are reported as ``None``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ordered_space import _as_array, _check_same_length, norm, normalize


class NotComparableError(ArithmeticError):
    """The pair is not comparable, so the requested quantity does not exist."""


@dataclass(frozen=True)
class RatioBounds:
    m_lower: Optional[float]
    M_upper: Optional[float]

    @property
    def both(self) -> bool:
        return self.m_lower is not None and self.M_upper is not None


def ratio_bounds(u, v) -> RatioBounds:
    a, b = _as_array(u), _as_array(v)
    _check_same_length(a, b)
    if np.any(b < 0):
        raise ValueError("the reference vector must lie in the cone")
    if not np.any(b > 0):
        raise ValueError("the reference vector must be nonzero")
    if not np.any(a != 0):
        raise ValueError("u must be nonzero")
    supp = b > 0
    r = a[supp] / b[supp]
    off = a[~supp]
    m = float(r.min()) if np.all(off >= 0) else None
    M = float(r.max()) if np.all(off <= 0) else None
    return RatioBounds(m, M)


def oscillation(u, v) -> float:
    rb = ratio_bounds(u, v)
    if not rb.both:
        raise NotComparableError("oscillation needs both ratio bounds")
    return rb.M_upper - rb.m_lower


def comparable(u, v) -> bool:
    a, b = _as_array(u), _as_array(v)
    if np.any(a < 0) or np.any(b < 0) or not np.any(a > 0) or not np.any(b > 0):
        return False
    rb = ratio_bounds(a, b)
    return rb.both and rb.m_lower > 0


def proj_distance(u, v) -> float:
    """Hilbert projective distance ``ln(M(u/v) / m(u/v))``."""
    a, b = _as_array(u), _as_array(v)
    _check_same_length(a, b)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("projective distance is defined on cone vectors")
    if not comparable(a, b):
        raise NotComparableError("vectors are not comparable")
    rb = ratio_bounds(a, b)
    return max(math.log(rb.M_upper / rb.m_lower), 0.0)


def proj_distance_rows(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Row-wise distances between arrays of cone vectors.

    Non-comparable rows give ``inf``.  Matching zero coordinates are
    ignored, which is the correct rule when both rows share a support.
    """
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    both = (U > 0) & (V > 0)
    neither = (U == 0) & (V == 0)
    ok = np.all(both | neither, axis=-1) & np.any(both, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = U / np.where(both, V, 1.0)
        hi = np.where(both, r, -np.inf).max(axis=-1)
        lo = np.where(both, r, np.inf).min(axis=-1)
        d = np.log(hi / lo)
    return np.where(ok, np.maximum(d, 0.0), np.inf)


def ray_distance(u, v, kind="ell2") -> float:
    """Norm distance between the unit vectors along two rays."""
    return norm(normalize(u, kind) - normalize(v, kind), kind)
