"""Dual principal covector, the principal projection and exponential separation.

The dual cocycle runs the shift backwards: ``U*_{theta_k omega}(1)`` is
``A_{k-1}^T``.  Its pullback at ``k`` therefore consumes the forward samples
``A_k, A_{k+1}, ...``, and along a trajectory the covectors are generated by
walking the index down from the far end.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .cocycle import CocycleModel, OmegaPath
from .estimators import (batch_means, combined_se, ls_slope, map_replicates, merge,
                         spread_se)
from .focusing import FocusingError, auto_step
from .ordered_space import NormKind, norms_rows, ones_unit, operator_norm
from .principal import (DEFAULT_CAP, DEFAULT_TOL, Estimate, GrowthLog, PrincipalVector,
                        _check_start, lyapunov_top, pullback_adaptive,
                        pullback_certificates)


class DegeneratePairingError(ArithmeticError):
    """``<w, w*>`` vanished: the principal projection is undefined."""


class DominationError(ValueError):
    """Coupled samples are not ordered entrywise."""

    def __init__(self, index: int, seed: Optional[int] = None):
        where = f"index {index}" if seed is None else f"index {index} (seed {seed})"
        super().__init__(f"domination A_lo <= A_hi fails at {where}")
        self.index = index
        self.seed = seed


def _dual_sequence(mats: np.ndarray) -> np.ndarray:
    """Transposes of ``mats`` in reverse order, C-contiguous."""
    return np.ascontiguousarray(mats[::-1].transpose(0, 2, 1))


def dual_principal(path: OmegaPath, k: int, depth: int, start=None, e=None) -> PrincipalVector:
    """Normalized ``A_k^T A_{k+1}^T ... A_{k+depth-1}^T e*`` with its certificate."""
    if depth < 1:
        raise ValueError("depth must be positive")
    n, kind = path.n, path.norm
    v0 = _check_start(start, n, kind)
    e = ones_unit(n, kind) if e is None else np.asarray(e, dtype=float)
    seq = _dual_sequence(path.window(k, k + depth))
    logs, v, _ = kernels.normalized_orbit(seq, v0, kind.code, False)
    bad = np.flatnonzero(~np.isfinite(logs))
    if bad.size:
        raise FocusingError("a dual cone vector was mapped to zero", int(k + depth - 1 - bad[0]))
    return PrincipalVector(int(k), v, int(depth), float(pullback_certificates(seq, e)[-1]))


def dual_adaptive(path: OmegaPath, k: int, tol: float = DEFAULT_TOL, cap: int = DEFAULT_CAP,
                  start=None, e=None) -> PrincipalVector:
    depth = min(2, cap)
    while True:
        pv = dual_principal(path, k, depth, start, e)
        if pv.error_bound < tol:
            return pv
        if depth >= cap:
            pv.cap_hit = True
            return pv
        depth = min(2 * depth, cap)


def dual_growth_log(path: OmegaPath, k: int, steps: int, tol: float = DEFAULT_TOL,
                    cap: int = DEFAULT_CAP):
    """Dual principal growth ``ln rho*_1`` along ``k, k-1, ..., k-steps+1``.

    Returns the dual pullback at ``k`` and a GrowthLog whose entry ``i`` is
    ``ln ||A_{k-1-i}^T w*_{k-i}||``.
    """
    pv = dual_adaptive(path, k, tol=tol, cap=cap)
    seq = _dual_sequence(path.window(k - steps, k))
    logs, _, _ = kernels.normalized_orbit(seq, pv.w, path.norm.code, False)
    bad = np.flatnonzero(~np.isfinite(logs))
    if bad.size:
        raise FocusingError("a dual cone vector was mapped to zero", int(k - 1 - bad[0]))
    return pv, GrowthLog(k, logs)


# --------------------------------------------------------------------------
# projections


def principal_projection(w, w_star, u, tol: float = 1e-14) -> np.ndarray:
    """``u - <u, w*> / <w, w*> w``: projection onto ker<., w*> along span{w}."""
    w = np.asarray(w, dtype=float)
    w_star = np.asarray(w_star, dtype=float)
    p = float(np.dot(w, w_star))
    if not p > tol:
        raise DegeneratePairingError(f"<w, w*> = {p} is not positive")
    u = np.asarray(u, dtype=float)
    return u - (np.dot(u, w_star) / p) * w


def projection_matrix(w, w_star) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    w_star = np.asarray(w_star, dtype=float)
    p = float(np.dot(w, w_star))
    if not p > 0:
        raise DegeneratePairingError(f"<w, w*> = {p} is not positive")
    return np.eye(w.size) - np.outer(w, w_star) / p


@dataclass
class ProjectionFamily:
    """Principal vectors and covectors at indices ``start .. start + len - 1``."""

    start: int
    w: np.ndarray
    w_star: np.ndarray
    norm: NormKind = NormKind.ELL1
    ln_rho: Optional[np.ndarray] = None
    cap_hit: bool = False

    def __len__(self) -> int:
        return self.w.shape[0]

    @property
    def pairing(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.w, self.w_star)

    def apply(self, j: int, u) -> np.ndarray:
        i = j - self.start
        return principal_projection(self.w[i], self.w_star[i], u)

    def matrix(self, j: int) -> np.ndarray:
        i = j - self.start
        return projection_matrix(self.w[i], self.w_star[i])

    def projection_norm(self, j: int) -> float:
        return operator_norm(self.matrix(j), self.norm)


def projection_family(path: OmegaPath, steps: int, k: int = 0, tol: float = DEFAULT_TOL,
                      cap: int = DEFAULT_CAP) -> ProjectionFamily:
    """``w`` and ``w*`` at every index in ``[k, k + steps]``."""
    kind = path.norm
    pv = pullback_adaptive(path, k, tol=tol, cap=cap)
    mats = path.window(k, k + steps)
    logs, _, W = kernels.normalized_orbit(mats, pv.w, kind.code, True)
    if not np.all(np.isfinite(logs)):
        raise FocusingError("a cone vector was mapped to zero", k)
    dv = dual_adaptive(path, k + steps, tol=tol, cap=cap)
    _, _, WSr = kernels.normalized_orbit(_dual_sequence(mats), dv.w, kind.code, True)
    if not np.all(np.isfinite(WSr)):
        raise FocusingError("a dual cone vector was mapped to zero", k + steps)
    return ProjectionFamily(k, W, np.ascontiguousarray(WSr[::-1]), kind, logs,
                            pv.cap_hit or dv.cap_hit)


# --------------------------------------------------------------------------
# second exponent


def checkpoints(steps: int, points: int = 24) -> np.ndarray:
    return np.unique(np.round(np.geomspace(1, steps, points)).astype(np.int64))


def _log_opnorms(vals: np.ndarray, logs: np.ndarray, kind: NormKind) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.array([math.log(operator_norm(v, kind)) if np.any(v) else -math.inf
                         for v in vals]) + logs


@dataclass
class SeparationTrace:
    n: np.ndarray
    g: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["n", "g_n"])
            for a, b in zip(self.n, self.g):
                wr.writerow([int(a), repr(float(b))])


def _replicate_separation(seed: int, model: CocycleModel, horizon: int, step: int,
                          burn_in: int, tol: float, cap: int, points: int,
                          batches: int) -> dict:
    path = OmegaPath(model, seed, step=step)
    steps = horizon // step
    fam = projection_family(path, steps, 0, tol=tol, cap=cap)
    cps = checkpoints(steps, points)
    vals, logs = kernels.projected_products(path.window(0, steps), fam.w, fam.w_star, cps)
    g = _log_opnorms(vals, logs, path.norm)
    half = cps.size // 2
    tail = slice(half, None)
    if np.all(np.isfinite(g[tail])):
        slope, slope_se = ls_slope(cps[tail], g[tail])
    else:
        slope, slope_se = -math.inf, 0.0
    lam1, se1 = batch_means(fam.ln_rho[burn_in // step:] / step, batches)
    pn = [fam.projection_norm(j) for j in (0, steps // 4, steps // 2, steps)]
    return {"seed": seed, "lambda1": lam1, "lambda1_se": se1 if math.isfinite(se1) else 0.0,
            "lambda2": slope / step,
            "lambda2_se": slope_se / step if math.isfinite(slope_se) else 0.0,
            "trace_n": (cps * step).tolist(), "trace_g": g.tolist(),
            "pairing_min": float(fam.pairing.min()), "cap_hit": fam.cap_hit,
            "projection_norms": pn}


@dataclass
class SeparationEstimate:
    lambda1: Estimate
    lambda2: Estimate
    sigma: float
    sigma_se: float
    zero_separation: bool
    traces: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"lambda1": self.lambda1.to_dict(), "lambda2": self.lambda2.to_dict(),
                "sigma": self.sigma, "sigma_se": self.sigma_se,
                "zero_separation": self.zero_separation}


def second_exponent(model: CocycleModel, seeds, horizon: int, step: Optional[int] = None,
                    burn_in: Optional[int] = None, tol: float = DEFAULT_TOL,
                    cap: int = DEFAULT_CAP, points: int = 24, batches: int = 32,
                    workers: int = 1) -> SeparationEstimate:
    """Second exponent from the growth of ``||U(n) P(omega)||`` (Kingman surrogate).

    ``g_n = ln ||U_omega(n) P(omega)||`` is evaluated at geometrically spaced
    ``n``; the slope of a least-squares fit over the later half of those
    points estimates the exponent on the complement of the principal line.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    T = auto_step(model) if step is None else int(step)
    burn = horizon // 10 if burn_in is None else int(burn_in)
    reps = map_replicates(_replicate_separation, seeds, workers, model=model, horizon=horizon,
                          step=T, burn_in=burn, tol=tol, cap=cap, points=points,
                          batches=batches)
    l1, s1 = merge([r["lambda1"] for r in reps], [r["lambda1_se"] for r in reps])
    l2s = [r["lambda2"] for r in reps]
    l2 = float(np.mean(l2s))
    s2 = spread_se(l2s) if len(reps) > 1 else reps[0]["lambda2_se"]
    if not math.isfinite(s2):
        s2 = 0.0
    sigma = l1 - l2
    sig_se = float(np.sqrt(s1 ** 2 + s2 ** 2))
    zero = bool(sigma <= 3.0 * sig_se + 1e-9)
    traces = [SeparationTrace(np.array(r["trace_n"]), np.array(r["trace_g"])) for r in reps]
    lam1 = Estimate(l1, s1, [{"seed": r["seed"], "value": r["lambda1"], "se": r["lambda1_se"]}
                             for r in reps], T, {"cap_hit": any(r["cap_hit"] for r in reps)})
    lam2 = Estimate(l2, s2, [{"seed": r["seed"], "value": r["lambda2"], "se": r["lambda2_se"],
                              "pairing_min": r["pairing_min"]} for r in reps], T)
    return SeparationEstimate(lam1, lam2, sigma, sig_se, zero, traces)


# --------------------------------------------------------------------------
# QR oracle


def qr_oseledets_oracle(path: OmegaPath, k: int, horizon: int, count: int,
                        burn_in: Optional[int] = None, batches: int = 32) -> dict:
    """Top ``count`` exponents by the discrete QR method, per step of ``path``.

    Returns means, batch standard errors and the number of skipped
    (singular) steps.
    """
    n = path.n
    if not 1 <= count <= n:
        raise ValueError("count must be between 1 and the dimension")
    burn = horizon // 10 if burn_in is None else int(burn_in)
    q0, _ = np.linalg.qr(np.random.default_rng(20240607).standard_normal((n, count)))
    logs, q = kernels.qr_log_diagonals(path.window(k, k + horizon), np.ascontiguousarray(q0))
    skipped = int(np.isnan(logs[:, 0]).sum())
    tail = logs[burn:]
    tail = tail[~np.isnan(tail[:, 0])]
    means, ses = [], []
    for j in range(count):
        m, s = batch_means(tail[:, j], batches)
        means.append(m)
        ses.append(s if math.isfinite(s) else 0.0)
    return {"exponents": means, "se": ses, "skipped": skipped, "frame": q}


def qr_exponents(model: CocycleModel, seeds, horizon: int, count: int = 2,
                 step: Optional[int] = None, burn_in: Optional[int] = None,
                 workers: int = 1) -> list[Estimate]:
    """QR oracle over replicates, divided by the skeleton step."""
    T = auto_step(model) if step is None else int(step)
    burn = horizon // 10 if burn_in is None else int(burn_in)
    reps = map_replicates(_replicate_qr, list(seeds), workers, model=model,
                          horizon=horizon // T, burn_in=burn // T, step=T, count=count)
    out = []
    for j in range(count):
        vals = [r["exponents"][j] / T for r in reps]
        ses = [r["se"][j] / T for r in reps]
        m, s = merge(vals, ses)
        out.append(Estimate(m, s, [{"seed": r["seed"], "value": v, "se": e}
                                   for r, v, e in zip(reps, vals, ses)], T,
                            {"skipped": sum(r["skipped"] for r in reps)}))
    return out


def _replicate_qr(seed: int, model, horizon: int, burn_in: int, step: int, count: int) -> dict:
    res = qr_oseledets_oracle(OmegaPath(model, seed, step=step), 0, horizon, count, burn_in)
    res.pop("frame")
    res["seed"] = seed
    return res


# --------------------------------------------------------------------------
# temperedness and alignment


@dataclass
class TemperednessReport:
    verdict: bool
    eps: float
    checkpoints: list
    rates: list
    log_pairing_mean: float
    log_pairing_min: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def temperedness_check(model: CocycleModel, seeds, horizon: int, eps: float = 0.01,
                       step: Optional[int] = None, tol: float = DEFAULT_TOL,
                       cap: int = DEFAULT_CAP) -> TemperednessReport:
    """``|(1/n) ln ||P(theta_n omega)|| | <= eps`` at ``n = N/4, N/2, N``."""
    T = auto_step(model) if step is None else int(step)
    steps = horizon // T
    cps = [max(1, steps // 4), max(1, steps // 2), steps]
    rates, lp = [], []
    for seed in sorted(seeds):
        fam = projection_family(OmegaPath(model, seed, step=T), steps, 0, tol=tol, cap=cap)
        rates.append([math.log(fam.projection_norm(n)) / n for n in cps])
        lp.append(np.log(fam.pairing))
    lp = np.concatenate(lp)
    rates = np.array(rates)
    return TemperednessReport(bool(np.all(np.abs(rates) <= eps)), eps, cps,
                              rates.tolist(), float(lp.mean()), float(lp.min()))


def cone_alignment_defect(frame, v, samples=None, kind=NormKind.ELL2) -> float:
    """Infimum of ``||P u|| / ||u - P u||`` over sampled cone vectors.

    ``P`` projects onto ``span(frame)`` along ``span{v}``.  The extreme rays
    and the positive and negative parts of ``v`` are always included, so a
    top direction inside the cone gives (numerically) zero.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    F = np.asarray(frame, dtype=float).reshape(v.size, -1)
    n = v.size
    basis = np.column_stack([v, F])
    cands = [np.eye(n)]
    for part in (np.maximum(v, 0.0), np.maximum(-v, 0.0)):
        if np.any(part > 0):
            cands.append(part[None, :])
    if samples is not None:
        s = np.asarray(samples, dtype=float).reshape(-1, n)
        if np.any(s < 0):
            raise ValueError("samples must be cone vectors")
        cands.append(s[np.any(s > 0, axis=1)])
    U = np.vstack(cands)
    coef = np.linalg.lstsq(basis, U.T, rcond=None)[0]
    along = np.outer(v, coef[0]).T          # u - P u
    proj = U - along
    num = norms_rows(proj, kind)
    den = norms_rows(along, kind)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / den, np.inf)
    return float(ratio.min())


# --------------------------------------------------------------------------
# comparison and duality


@dataclass
class CompareResult:
    lambda_lo: Estimate
    lambda_hi: Estimate
    gap: float
    se: float
    ordered: bool

    def to_dict(self) -> dict:
        return {"lambda_lo": self.lambda_lo.to_dict(), "lambda_hi": self.lambda_hi.to_dict(),
                "gap": self.gap, "se": self.se, "ordered": self.ordered}


def check_domination(model_lo: CocycleModel, model_hi: CocycleModel, seed: int, a: int, b: int,
                     step: int = 1) -> None:
    lo = OmegaPath(model_lo, seed, step=step).window(a, b)
    hi = OmegaPath(model_hi, seed, step=step).window(a, b)
    bad = np.flatnonzero(np.any(lo > hi, axis=(1, 2)))
    if bad.size:
        raise DominationError(int(a + bad[0]), seed)


def compare_exponents(model_lo: CocycleModel, model_hi: CocycleModel, seeds, horizon: int,
                      step: Optional[int] = None, burn_in: Optional[int] = None,
                      tol: float = DEFAULT_TOL, cap: int = DEFAULT_CAP,
                      workers: int = 1, check_depth: int = 4096) -> CompareResult:
    """Principal exponents of two coupled, entrywise ordered models."""
    if model_lo.dimension != model_hi.dimension:
        raise ValueError("models must share the dimension")
    T = max(auto_step(model_lo), auto_step(model_hi)) if step is None else int(step)
    seeds = list(seeds)
    for s in seeds:
        check_domination(model_lo, model_hi, s, -check_depth, horizon // T, T)
    lo = lyapunov_top(model_lo, seeds, horizon, burn_in, T, tol, cap, workers=workers)
    hi = lyapunov_top(model_hi, seeds, horizon, burn_in, T, tol, cap, workers=workers)
    se = combined_se(lo.se, hi.se)
    gap = hi.mean - lo.mean
    return CompareResult(lo, hi, gap, se, bool(lo.mean <= hi.mean + 3.0 * se + 1e-12))


@dataclass
class DualityResult:
    lambda1: Estimate
    lambda1_star: Estimate
    gap: float
    se: float
    consistent: bool

    def to_dict(self) -> dict:
        return {"lambda1": self.lambda1.to_dict(), "lambda1_star": self.lambda1_star.to_dict(),
                "gap": self.gap, "se": self.se, "consistent": self.consistent}


def duality_check(model: CocycleModel, seeds, horizon: int, step: Optional[int] = None,
                  burn_in: Optional[int] = None, tol: float = DEFAULT_TOL,
                  cap: int = DEFAULT_CAP, workers: int = 1) -> DualityResult:
    """Principal exponents of the cocycle and of its dual on the same paths.

    ``consistent`` allows ``3`` combined standard errors plus ``1e-12`` of
    round-off, so deterministic models (zero standard error) compare exactly.
    """
    lam = lyapunov_top(model, seeds, horizon, burn_in, step, tol, cap, workers=workers)
    lam_s = lyapunov_top(model, seeds, horizon, burn_in, step, tol, cap, workers=workers,
                         dual=True)
    se = combined_se(lam.se, lam_s.se)
    gap = abs(lam.mean - lam_s.mean)
    return DualityResult(lam, lam_s, gap, se, bool(gap <= 3.0 * se + 1e-12))
