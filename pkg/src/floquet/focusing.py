"""Focusing constants, projective diameters and Birkhoff contraction ratios.

For a strictly positive matrix the projective diameter of its image cone is
attained on a pair of columns, and the Birkhoff contraction ratio is
``tanh(tau / 4)``.  The focusing constant ``kappa`` relative to a strictly
positive vector ``e`` is the largest ``M(Au/e) / m(Au/e)``, attained on a
column.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .cocycle import CocycleModel, OmegaPath
from .hilbert_metric import ratio_bounds
from .ordered_space import ones_unit


class FocusingError(ArithmeticError):
    """A sample violates the focusing assumption."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message if index is None else f"{message} (index {index})")
        self.index = index


class AssumptionError(ArithmeticError):
    """A runtime-checkable assumption fails for the given data."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message if index is None else f"{message} (index {index})")
        self.index = index


def _positive(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(a > 0):
        raise ValueError("matrix must be strictly positive")
    return a


def birkhoff_diameter(a) -> float:
    """Largest Hilbert distance between two columns of a positive matrix."""
    a = _positive(a)
    tau, _ = kernels.tau_kappa(np.ascontiguousarray(a[None]), np.ones(a.shape[0]))
    return float(tau[0])


def contraction_ratio(a) -> float:
    return math.tanh(birkhoff_diameter(a) / 4.0)


def kappa_beta(a, e, u) -> tuple[float, float]:
    """``(beta, kappa_u)`` with ``beta e <= Au <= kappa_u beta e`` tight."""
    a = np.asarray(a, dtype=float)
    e = np.asarray(e, dtype=float)
    if not np.all(e > 0):
        raise ValueError("focus vector must be strictly positive")
    img = a @ np.asarray(u, dtype=float)
    if not np.any(img != 0):
        raise FocusingError("the image of u vanishes")
    rb = ratio_bounds(img, e)
    if rb.m_lower is None or rb.m_lower <= 0:
        raise FocusingError("the image of u is not comparable with e")
    return rb.m_lower, rb.M_upper / rb.m_lower


def kappa(a, e=None) -> float:
    """Focusing constant of a single matrix; ``inf`` if it does not focus."""
    a = np.asarray(a, dtype=float)
    if e is None:
        e = np.ones(a.shape[0])
    _, kap = kernels.tau_kappa(np.ascontiguousarray(a[None]), np.asarray(e, dtype=float))
    return float(kap[0])


def primitivity_index(a) -> Optional[int]:
    """Smallest T with ``A^T > 0`` entrywise, or None past the Wielandt bound."""
    pat = np.asarray(a) > 0
    n = pat.shape[0]
    if not np.all(pat.any(axis=0)):
        raise ValueError("matrix has a zero column")
    p = pat.astype(np.int64)
    cur = p.copy()
    for t in range(1, (n - 1) ** 2 + 2):
        if np.all(cur > 0):
            return t
        cur = ((cur @ p) > 0).astype(np.int64)
    return None


def auto_step(model: CocycleModel) -> int:
    """Skeleton step for focusing: the primitivity index of the a.s. support."""
    t = primitivity_index(model.min_support())
    return 1 if t is None else t


@dataclass
class NuReport:
    nu_min: float
    nu_mean_log: float
    lower_bound: float
    horizon: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_A5(path: OmegaPath, e_bar=None, horizon: int = 1000, start: int = 0) -> NuReport:
    """Per-step ``nu_k = m(A_k e_bar / e_bar)`` along a path.

    The mean of ``ln nu`` is a lower bound for the principal exponent (per
    step of the path, i.e. per skeleton step when ``path.step > 1``).
    """
    n = path.n
    e_bar = ones_unit(n, path.norm) if e_bar is None else np.asarray(e_bar, dtype=float)
    if not np.all(e_bar > 0):
        raise ValueError("e_bar must be strictly positive")
    mats = path.window(start, start + horizon)
    nu = (mats @ e_bar / e_bar).min(axis=1)
    bad = np.flatnonzero(nu <= 0)
    if bad.size:
        raise AssumptionError("nu(omega) <= 0: the strong positivity condition fails for this e_bar",
                              int(start + bad[0]))
    logs = np.log(nu)
    return NuReport(float(nu.min()), float(logs.mean()), float(logs.mean()), int(horizon))


def _finite(x: float) -> Optional[float]:
    return float(x) if math.isfinite(x) else None


@dataclass
class FocusingReport:
    focus_vector: list
    kappa: float
    tau: float
    contraction_p: float
    attain_time: int
    kappa_star: float = math.inf
    samples: int = 0
    empirical: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    primitivity_index: Optional[int] = None

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        for key in ("kappa", "tau", "kappa_star"):
            d[key] = _finite(d[key])
        return d


def focusing_report(model: CocycleModel, seed: int = 0, samples: int = 1000,
                    step: Optional[int] = None, e=None) -> FocusingReport:
    """Sample ``kappa``, ``tau`` and the dual ``kappa*`` on the time-T skeleton."""
    n = model.dimension
    T = auto_step(model) if step is None else int(step)
    e = ones_unit(n, model.norm) if e is None else np.asarray(e, dtype=float)
    if not np.all(e > 0):
        raise ValueError("focus vector must be strictly positive")
    path = OmegaPath(model, seed, step=T)
    mats = path.window(0, samples)
    tau, kap = kernels.tau_kappa(mats, e)
    _, kap_star = kernels.tau_kappa(np.ascontiguousarray(mats.transpose(0, 2, 1)), e)
    with np.errstate(divide="ignore"):
        lk = np.log(kap)
    finite = np.isfinite(lk)
    empirical = {
        "mean_log_kappa": _finite(float(lk.mean())) if finite.all() else None,
        "std_log_kappa": float(lk.std()) if finite.all() else None,
        "max_log_kappa": _finite(float(lk.max())),
        "q99_log_kappa": float(np.quantile(lk, 0.99)) if finite.all() else None,
        "mean_log_q": float(np.mean(np.log(np.tanh(tau / 4.0)))) if np.isfinite(tau).all() and np.all(tau > 0) else None,
        "fraction_focusing": float(finite.mean()),
    }
    e_star = ones_unit(n, model.norm)
    verdicts = {
        "A2_nonnegative": bool(np.all(mats >= 0)),
        "A3_focusing": bool(np.all(np.isfinite(kap))),
        "A3_star_focusing": bool(np.all(np.isfinite(kap_star))),
        "A4_pairing_positive": bool(np.dot(e, e_star) > 0),
        "tau_finite": bool(np.all(np.isfinite(tau))),
    }
    tau_max = float(tau.max())
    return FocusingReport(
        focus_vector=e.tolist(),
        kappa=float(kap.max()),
        tau=tau_max,
        contraction_p=math.tanh(tau_max / 4.0) if math.isfinite(tau_max) else 1.0,
        attain_time=T,
        kappa_star=float(kap_star.max()),
        samples=int(samples),
        empirical=empirical,
        verdicts=verdicts,
        primitivity_index=primitivity_index(model.min_support()),
    )
