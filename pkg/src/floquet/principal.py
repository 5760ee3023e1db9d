"""Principal Floquet vector by pullback, and the principal Lyapunov exponent.

The principal vector at index ``k`` is the limit of
``A_{k-1} ... A_{k-d} e`` normalized, as the depth ``d`` grows.  Every
pullback carries a certificate bounding its norm distance to the limit:

    6 kappa(A_{k-1})**2 * ln kappa(A_{k-j}) * q(A_{k-j+1}) ... q(A_{k-1})

minimized over ``2 <= j <= d``, where ``q = tanh(tau / 4)`` is the Birkhoff
contraction ratio and ``kappa`` the focusing constant of each sample.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .cocycle import CocycleModel, OmegaPath
from .estimators import batch_means, map_replicates, merge
from .focusing import FocusingError, auto_step
from .ordered_space import NormKind, norm, normalize, ones_unit

DEFAULT_TOL = 1e-12
DEFAULT_CAP = 2 ** 14


@dataclass
class PrincipalVector:
    anchor_index: int
    w: np.ndarray
    depth: int
    error_bound: float
    cap_hit: bool = False

    def to_dict(self) -> dict:
        return {"anchor_index": self.anchor_index, "w": self.w.tolist(), "depth": self.depth,
                "error_bound": self.error_bound if math.isfinite(self.error_bound) else None,
                "cap_hit": self.cap_hit}


def _check_start(start, n: int, kind: NormKind) -> np.ndarray:
    if start is None:
        return ones_unit(n, kind)
    s = np.asarray(start, dtype=float)
    if s.shape != (n,) or np.any(s < 0) or not np.any(s > 0):
        raise ValueError("start must be a nonzero cone vector of the path dimension")
    return normalize(s, kind)


def pullback_certificates(mats: np.ndarray, e) -> np.ndarray:
    """Running-minimum certificates for depths ``1..len(mats)``.

    ``mats`` holds ``A_{k-d}, ..., A_{k-1}`` in path order.  Depth 1 gets the
    trivial bound 2 (two unit vectors).
    """
    d = mats.shape[0]
    tau, kap = kernels.tau_kappa(mats, np.asarray(e, dtype=float))
    rev_tau = tau[::-1]
    rev_kap = kap[::-1]          # rev_*[i] belongs to A_{k-1-i}
    out = np.full(d, 2.0)
    if d < 2:
        return out
    q = np.tanh(rev_tau / 4.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logq = np.log(q)
        cum = np.concatenate([[0.0], np.cumsum(logq)])   # cum[j-1] = sum_{i<j-1} ln q_i
        j = np.arange(2, d + 1)
        lnk = np.log(rev_kap[j - 1])
        lead = 2.0 * np.log(rev_kap[0]) + math.log(6.0)
        logb = lead + np.log(np.maximum(lnk, 0.0)) + cum[j - 1]
        b = np.exp(logb)
    # q == 0 anywhere along the product collapses the bound to 0
    zero_q = np.concatenate([[False], np.cumsum(q == 0) > 0])[j - 1]
    b = np.where(zero_q, 0.0, b)
    b = np.where(np.isnan(b), math.inf, b)
    out[1:] = np.minimum(np.minimum.accumulate(b), 2.0)
    return out


def certificate_series(path: OmegaPath, origin: int, first: int, last: int, e=None) -> np.ndarray:
    """Certificates of the pullbacks started at ``origin``, at indices ``first..last``.

    Same bound as :func:`pullback_certificates` at each index, evaluated in
    one pass with prefix sums of ``ln q``.
    """
    if not origin <= first <= last:
        raise ValueError("need origin <= first <= last")
    e = ones_unit(path.n, path.norm) if e is None else np.asarray(e, dtype=float)
    mats = path.window(origin, last)
    tau, kap = kernels.tau_kappa(mats, e)
    with np.errstate(divide="ignore", invalid="ignore"):
        lnq = np.maximum(np.log(np.tanh(tau / 4.0)), -1e6)
        P = np.cumsum(lnq)
        val = np.log(np.maximum(np.log(kap), 0.0)) - P
        runmin = np.minimum.accumulate(val)
        idx = np.arange(first, last + 1) - origin          # depth at each index
        out = np.full(idx.size, 2.0)
        ok = idx >= 2
        d = idx[ok]
        b = math.log(6.0) + 2.0 * np.log(kap[d - 1]) + runmin[d - 2] + P[d - 1]
        b = np.exp(b)
    b = np.where(np.isnan(b), math.inf, b)
    out[ok] = np.minimum(b, 2.0)
    return out


def pullback_principal(path: OmegaPath, k: int, depth: int, start=None, e=None) -> PrincipalVector:
    """Normalized ``A_{k-1} ... A_{k-depth} start`` with its certificate."""
    if depth < 1:
        raise ValueError("depth must be positive")
    n, kind = path.n, path.norm
    v0 = _check_start(start, n, kind)
    e = ones_unit(n, kind) if e is None else np.asarray(e, dtype=float)
    mats = path.window(k - depth, k)
    logs, v, _ = kernels.normalized_orbit(mats, v0, kind.code, False)
    bad = np.flatnonzero(~np.isfinite(logs))
    if bad.size:
        raise FocusingError("a cone vector was mapped to zero during pullback",
                            int(k - depth + bad[0]))
    cert = pullback_certificates(mats, e)
    return PrincipalVector(int(k), v, int(depth), float(cert[-1]))


def pullback_adaptive(path: OmegaPath, k: int, tol: float = DEFAULT_TOL,
                      cap: int = DEFAULT_CAP, start=None, e=None,
                      min_depth: int = 2) -> PrincipalVector:
    """Double the depth until the certificate drops below ``tol`` or ``cap`` is hit."""
    depth = max(1, min(min_depth, cap))
    while True:
        pv = pullback_principal(path, k, depth, start, e)
        if pv.error_bound < tol:
            return pv
        if depth >= cap:
            pv.cap_hit = True
            return pv
        depth = min(2 * depth, cap)


def forward_normalize(path: OmegaPath, pv: PrincipalVector, t: int, e=None) -> PrincipalVector:
    """Push a principal vector ``t`` steps forward and renormalize.

    The result is the depth ``depth + t`` pullback at ``k + t`` (same
    start), so its certificate is recomputed there.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return PrincipalVector(pv.anchor_index, pv.w.copy(), pv.depth, pv.error_bound, pv.cap_hit)
    kind = path.norm
    mats = path.window(pv.anchor_index, pv.anchor_index + t)
    logs, v, _ = kernels.normalized_orbit(mats, pv.w, kind.code, False)
    if not np.all(np.isfinite(logs)):
        raise FocusingError("a cone vector was mapped to zero", pv.anchor_index)
    k_new = pv.anchor_index + t
    depth = pv.depth + t
    e = ones_unit(path.n, kind) if e is None else e
    cert = pullback_certificates(path.window(k_new - depth, k_new), e)
    return PrincipalVector(k_new, v, depth, float(cert[-1]), pv.cap_hit)


# --------------------------------------------------------------------------
# growth along the principal direction


@dataclass
class GrowthLog:
    """``ln rho_1(theta_k omega)`` for ``k = start, start+1, ...``."""

    start: int
    ln_rho: np.ndarray
    certificate: Optional[np.ndarray] = None

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.ln_rho)

    def log_rho(self, s: int, t: int) -> float:
        """``ln rho_t(theta_s omega)`` as a partial sum."""
        i = s - self.start
        if i < 0 or i + t > self.ln_rho.size:
            raise IndexError("requested range is outside the log")
        return float(self.ln_rho[i: i + t].sum())

    def to_csv(self, path, every: int = 1) -> None:
        cum = self.cumulative
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["step", "ln_rho", "cumulative", "certificate"])
            for i in range(0, self.ln_rho.size, every):
                cert = "" if self.certificate is None else repr(float(self.certificate[i]))
                wr.writerow([self.start + i, repr(float(self.ln_rho[i])), repr(float(cum[i])), cert])


def growth_log(path: OmegaPath, pv: PrincipalVector, steps: int, store: bool = False,
               certificates: bool = False):
    """Forward-normalize from ``pv`` for ``steps`` steps.

    Returns ``(GrowthLog, final_vector, vectors_or_None)``.  With
    ``certificates`` the log also carries the error bound of the vector
    at each step.
    """
    mats = path.window(pv.anchor_index, pv.anchor_index + steps)
    logs, v, vecs = kernels.normalized_orbit(mats, pv.w, path.norm.code, store)
    bad = np.flatnonzero(~np.isfinite(logs))
    if bad.size:
        raise FocusingError("a cone vector was mapped to zero", int(pv.anchor_index + bad[0]))
    cert = None
    if certificates and steps > 0:
        k = pv.anchor_index
        cert = certificate_series(path, k - pv.depth, k, k + steps - 1)
    return GrowthLog(pv.anchor_index, logs, cert), v, vecs


def growth_rate(path: OmegaPath, u, t: int, k: int = 0) -> float:
    """``(1/t) ln ||U_{theta_k omega}(t) u||`` computed with renormalization."""
    u = np.asarray(u, dtype=float)
    r = norm(u, path.norm)
    logs, _, _ = kernels.normalized_orbit(path.window(k, k + t), u / r, path.norm.code, False)
    return float((logs.sum() + math.log(r)) / t)


@dataclass
class Estimate:
    """An estimate with its standard error and the per-replicate values."""

    mean: float
    se: float
    replicates: list = field(default_factory=list)
    step: int = 1
    flags: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.replicates)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "se": self.se, "count": self.count, "step": self.step,
                "replicates": self.replicates, "flags": self.flags}


def _replicate_top(seed: int, model: CocycleModel, horizon: int, burn_in: int, step: int,
                   tol: float, cap: int, batches: int, dual: bool = False) -> dict:
    path = OmegaPath(model, seed, step=step)
    steps = horizon // step
    burn = burn_in // step
    if dual:
        from .separation import dual_growth_log
        pv, log = dual_growth_log(path, 0, steps, tol=tol, cap=cap)
    else:
        pv = pullback_adaptive(path, 0, tol=tol, cap=cap)
        log, _, _ = growth_log(path, pv, steps)
    series = log.ln_rho[burn:] / step
    mean, se = batch_means(series, batches)
    if not math.isfinite(se):
        se = 0.0
    return {"seed": seed, "value": mean, "se": se, "steps": int(steps),
            "pullback_depth": pv.depth, "pullback_bound": pv.error_bound,
            "cap_hit": pv.cap_hit,
            "trend": _trend(series)}


def _trend(series: np.ndarray) -> float:
    """Difference of second-half and first-half means (drift diagnostic)."""
    h = series.size // 2
    if h == 0:
        return 0.0
    return float(series[h:].mean() - series[:h].mean())


def lyapunov_top(model: CocycleModel, seeds, horizon: int, burn_in: Optional[int] = None,
                 step: Optional[int] = None, tol: float = DEFAULT_TOL, cap: int = DEFAULT_CAP,
                 batches: int = 32, workers: int = 1, dual: bool = False) -> Estimate:
    """Principal exponent by Birkhoff averaging of ``ln rho_1`` after a pullback start.

    ``horizon`` and ``burn_in`` count base time steps; on the time-T
    skeleton the averaged log growth is divided by ``T``.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    T = auto_step(model) if step is None else int(step)
    burn = horizon // 10 if burn_in is None else int(burn_in)
    if horizon // T < burn // T + 1:
        raise ValueError("horizon must exceed burn_in by at least one step")
    reps = map_replicates(_replicate_top, seeds, workers, model=model, horizon=horizon,
                          burn_in=burn, step=T, tol=tol, cap=cap, batches=batches, dual=dual)
    mean, se = merge([r["value"] for r in reps], [r["se"] for r in reps])
    flags = {"cap_hit": any(r["cap_hit"] for r in reps),
             "diverging_negative": bool(mean < -50.0 and all(r["trend"] < 0 for r in reps))}
    return Estimate(mean, se, reps, T, flags)


# --------------------------------------------------------------------------
# entire orbits


@dataclass
class EntireOrbit:
    """Unit vectors ``w_j`` and log scales ``L_j`` with ``v(j) = exp(L_j) w_j``.

    Indices run over ``[k - m, k + t]``; ``L_k = 0``.
    """

    anchor: int
    first: int
    units: np.ndarray
    log_scale: np.ndarray

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.first, self.first + self.units.shape[0])

    def vector(self, j: int) -> np.ndarray:
        i = j - self.first
        return math.exp(self.log_scale[i]) * self.units[i]

    def to_dict(self) -> dict:
        return {"anchor": self.anchor,
                "points": [{"index": int(j), "unit": u.tolist(), "log_scale": float(l)}
                           for j, u, l in zip(self.indices, self.units, self.log_scale)]}


def entire_orbit(path: OmegaPath, k: int, backward_steps: int, forward_steps: int,
                 start=None, tol: float = DEFAULT_TOL, cap: int = DEFAULT_CAP) -> EntireOrbit:
    """Positive entire orbit through index ``k``, normalized so ``||v(k)|| = 1``.

    The backward part is the pullback principal vector at ``k - m`` pushed
    forward, which by equivariance reproduces the pullback vectors at every
    index in ``[k - m, k]``; the scalar growth on the one-dimensional
    principal line replaces matrix inversion.
    """
    m, t = int(backward_steps), int(forward_steps)
    if m < 0 or t < 0:
        raise ValueError("step counts must be nonnegative")
    pv = pullback_adaptive(path, k - m, tol=tol, cap=cap, start=start)
    log, _, vecs = growth_log(path, pv, m + t, store=True)
    cum = np.concatenate([[0.0], np.cumsum(log.ln_rho)])
    return EntireOrbit(int(k), int(k - m), vecs, cum - cum[m])


# --------------------------------------------------------------------------
# convergence trace


@dataclass
class PullbackTrace:
    depths: np.ndarray
    increments: np.ndarray
    certificates: np.ndarray
    log_q: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["depth", "increment", "certificate", "log_q"])
            for row in zip(self.depths, self.increments, self.certificates, self.log_q):
                wr.writerow([int(row[0])] + [repr(float(x)) for x in row[1:]])


def pullback_trace(path: OmegaPath, k: int, max_depth: int, start=None, e=None) -> PullbackTrace:
    """Increments ``||w^(s+1) - w^(s)||`` of the pullback sequence at ``k``.

    ``log_q[s-1]`` is ``ln q(A_{k-s})``.
    """
    n, kind = path.n, path.norm
    v0 = _check_start(start, n, kind)
    e = ones_unit(n, kind) if e is None else np.asarray(e, dtype=float)
    mats = path.window(k - max_depth, k)
    prod = np.eye(n)
    ws = []
    for s in range(1, max_depth + 1):
        prod = prod @ mats[max_depth - s]
        prod = prod / np.abs(prod).max()
        ws.append(normalize(prod @ v0, kind))
    ws = np.array(ws)
    inc = np.array([norm(ws[i + 1] - ws[i], kind) for i in range(max_depth - 1)])
    tau, _ = kernels.tau_kappa(mats, e)
    with np.errstate(divide="ignore"):
        log_q = np.log(np.tanh(tau[::-1] / 4.0))
    cert = pullback_certificates(mats, e)
    return PullbackTrace(np.arange(1, max_depth), inc, cert[:-1], log_q[:-1])
