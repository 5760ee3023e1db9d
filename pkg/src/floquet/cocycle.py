"""Random matrix cocycles over a shift on bi-infinite sample paths.

A path is keyed by a seed; the matrix at index ``k`` depends only on
``(seed, k)`` (and, for Markov switching, on the chain of states linking
``k`` to index 0).  Shifting the base point is shifting the index, so the
forward product ``U_{theta_k omega}(t)`` is ``A_{k+t-1} ... A_k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar, Optional

import numpy as np

from . import kernels
from .ordered_space import NormKind, operator_norm

BLOCK = 4096


class ConfigError(ValueError):
    """A model or distribution specification is invalid."""


# --------------------------------------------------------------------------
# distributions


_DIST_PARAMS = {
    "constant": ("value",),
    "uniform": ("low", "high"),
    "lognormal": ("mean", "sigma"),
    "exponential": ("scale",),
    "gamma": ("shape", "scale"),
    "beta": ("a", "b"),
    "normal": ("loc", "scale"),
    "cauchy": ("loc", "scale"),
}


@dataclass(frozen=True)
class Dist:
    """A scalar distribution given by name and parameters."""

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in _DIST_PARAMS:
            raise ConfigError(f"unknown distribution {self.kind!r}")
        if len(self.params) != len(_DIST_PARAMS[self.kind]):
            raise ConfigError(f"{self.kind} needs parameters {_DIST_PARAMS[self.kind]}")
        p = dict(zip(_DIST_PARAMS[self.kind], self.params))
        if self.kind == "uniform" and not p["low"] <= p["high"]:
            raise ConfigError("uniform needs low <= high")
        for key in ("sigma", "scale", "shape", "a", "b"):
            if key in p and not p[key] > 0:
                raise ConfigError(f"{self.kind}: {key} must be positive")

    @classmethod
    def from_dict(cls, d) -> "Dist":
        if isinstance(d, (int, float)):
            return cls("constant", (float(d),))
        if not isinstance(d, dict) or "dist" not in d:
            raise ConfigError(f"distribution must be a mapping with 'dist': {d!r}")
        kind = d["dist"]
        names = _DIST_PARAMS.get(kind)
        if names is None:
            raise ConfigError(f"unknown distribution {kind!r}")
        extra = set(d) - set(names) - {"dist"}
        if extra:
            raise ConfigError(f"{kind}: unexpected keys {sorted(extra)}")
        try:
            return cls(kind, tuple(float(d[k]) for k in names))
        except KeyError as exc:
            raise ConfigError(f"{kind}: missing parameter {exc}") from None

    def to_dict(self) -> dict:
        return {"dist": self.kind, **dict(zip(_DIST_PARAMS[self.kind], self.params))}

    @property
    def support(self) -> tuple[float, float]:
        p = self.params
        if self.kind == "constant":
            return p[0], p[0]
        if self.kind == "uniform":
            return p[0], p[1]
        if self.kind == "beta":
            return 0.0, 1.0
        if self.kind in ("normal", "cauchy"):
            return -math.inf, math.inf
        return 0.0, math.inf

    @property
    def almost_surely_positive(self) -> bool:
        lo, _ = self.support
        if self.kind == "constant":
            return lo > 0
        return lo >= 0

    def mean(self) -> float:
        p = self.params
        if self.kind == "constant":
            return p[0]
        if self.kind == "uniform":
            return 0.5 * (p[0] + p[1])
        if self.kind == "lognormal":
            return math.exp(p[0] + 0.5 * p[1] ** 2)
        if self.kind == "exponential":
            return p[0]
        if self.kind == "gamma":
            return p[0] * p[1]
        if self.kind == "beta":
            return p[0] / (p[0] + p[1])
        if self.kind == "normal":
            return p[0]
        return math.nan

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        p = self.params
        if self.kind == "constant":
            return np.full(size, p[0])
        if self.kind == "uniform":
            return rng.uniform(p[0], p[1], size)
        if self.kind == "lognormal":
            return rng.lognormal(p[0], p[1], size)
        if self.kind == "exponential":
            return rng.exponential(p[0], size)
        if self.kind == "gamma":
            return rng.gamma(p[0], p[1], size)
        if self.kind == "beta":
            return rng.beta(p[0], p[1], size)
        if self.kind == "normal":
            return rng.normal(p[0], p[1], size)
        return p[0] + p[1] * rng.standard_cauchy(size)


def _require_nonnegative(d: Dist, what: str) -> None:
    if d.support[0] < 0:
        raise ConfigError(f"{what}: distribution {d.kind} has negative support")


def _matrix(x, what: str) -> np.ndarray:
    try:
        a = np.array(x, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{what}: not a numeric matrix") from None
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
        raise ConfigError(f"{what}: expected a square matrix of size >= 2, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"{what}: entries must be finite")
    return a


def _operator_norms(mats: np.ndarray, kind: NormKind) -> np.ndarray:
    if kind is NormKind.ELL1:
        return np.abs(mats).sum(axis=1).max(axis=1)
    if kind is NormKind.ELLINF:
        return np.abs(mats).sum(axis=2).max(axis=1)
    return np.linalg.norm(mats, 2, axis=(1, 2))


# --------------------------------------------------------------------------
# models


@dataclass(frozen=True, eq=False)
class CocycleModel:
    """Base class.  ``scale`` and ``offset`` give ``A -> scale*A + offset``.

    The transform is applied after sampling, so two models that differ only
    in ``scale >= 1`` or a nonnegative ``offset`` are coupled and ordered
    entrywise on every path.
    """

    variant: ClassVar[str] = ""
    norm: NormKind = NormKind.ELL1
    scale: float = 1.0
    offset: Optional[np.ndarray] = None

    @property
    def dimension(self) -> int:
        raise NotImplementedError

    def _check_common(self):
        object.__setattr__(self, "norm", NormKind.parse(self.norm))
        if not self.scale > 0:
            raise ConfigError("scale must be positive")
        if self.offset is not None:
            off = _matrix(self.offset, "offset")
            if off.shape != (self.dimension, self.dimension):
                raise ConfigError("offset shape does not match the dimension")
            if np.any(off < 0):
                raise ConfigError("offset must be entrywise nonnegative")
            object.__setattr__(self, "offset", off)
        support = self.min_support()
        if not np.all(support.any(axis=0)):
            raise ConfigError("sampled matrices may have a zero column")

    def _transform(self, mats: np.ndarray) -> np.ndarray:
        if self.scale != 1.0:
            mats = mats * self.scale
        if self.offset is not None:
            mats = mats + self.offset
        return mats

    def _raw_support(self) -> np.ndarray:
        raise NotImplementedError

    def min_support(self) -> np.ndarray:
        """Boolean pattern of entries that are almost surely positive."""
        s = self._raw_support()
        if self.offset is not None:
            s = s | (self.offset > 0)
        return s

    def sample_block(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def sample_log_norms(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``ln ||A||`` for ``size`` fresh samples (operator norm of ``self.norm``)."""
        mats = self.sample_block(rng, size)
        with np.errstate(divide="ignore"):
            return np.log(_operator_norms(mats, self.norm))

    def with_transform(self, scale: float = 1.0, offset=None) -> "CocycleModel":
        """A coupled copy with ``A -> scale*(current A) + offset``."""
        d = self.to_dict()
        new_off = np.zeros((self.dimension,) * 2) if self.offset is None else self.offset * scale
        if offset is not None:
            new_off = new_off + np.asarray(offset, dtype=float)
        d["scale"] = self.scale * scale
        d["offset"] = new_off.tolist() if np.any(new_off) else None
        return model_from_dict(d)

    def to_dict(self) -> dict:
        d = {"variant": self.variant, "norm": self.norm.value}
        if self.scale != 1.0:
            d["scale"] = self.scale
        if self.offset is not None:
            d["offset"] = np.asarray(self.offset).tolist()
        d.update(self._params_dict())
        return d

    def _params_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Deterministic(CocycleModel):
    variant: ClassVar[str] = "deterministic"
    matrix: np.ndarray = field(default=None, kw_only=True)

    def __post_init__(self):
        a = _matrix(self.matrix, "matrix")
        if np.any(a < 0):
            raise ConfigError("matrix must be entrywise nonnegative")
        object.__setattr__(self, "matrix", a)
        self._check_common()

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def _raw_support(self):
        return self.matrix > 0

    def sample_block(self, rng, size):
        return self._transform(np.broadcast_to(self.matrix, (size,) + self.matrix.shape).copy())

    def _params_dict(self):
        return {"matrix": self.matrix.tolist()}


@dataclass(frozen=True, eq=False)
class IIDEnsemble(CocycleModel):
    variant: ClassVar[str] = "iid"
    n: int = field(default=2, kw_only=True)
    entry: Dist = field(default=None, kw_only=True)

    def __post_init__(self):
        if int(self.n) < 2:
            raise ConfigError("dimension must be >= 2")
        object.__setattr__(self, "n", int(self.n))
        if self.entry is None:
            raise ConfigError("iid model needs an entry distribution")
        _require_nonnegative(self.entry, "entry")
        self._check_common()

    @property
    def dimension(self):
        return self.n

    def _raw_support(self):
        return np.full((self.n, self.n), self.entry.almost_surely_positive)

    def sample_block(self, rng, size):
        return self._transform(self.entry.sample(rng, (size, self.n, self.n)))

    def _params_dict(self):
        return {"dimension": self.n, "entry": self.entry.to_dict()}


@dataclass(frozen=True, eq=False)
class ScalarScaled(CocycleModel):
    """``A_k = c_k B`` with ``ln c_k`` drawn from ``log_scalar``."""

    variant: ClassVar[str] = "scalar_scaled"
    base: np.ndarray = field(default=None, kw_only=True)
    log_scalar: Dist = field(default=None, kw_only=True)

    def __post_init__(self):
        b = _matrix(self.base, "base")
        if np.any(b < 0):
            raise ConfigError("base must be entrywise nonnegative")
        object.__setattr__(self, "base", b)
        if self.log_scalar is None:
            raise ConfigError("scalar_scaled model needs log_scalar")
        self._check_common()

    @property
    def dimension(self):
        return self.base.shape[0]

    def _raw_support(self):
        return self.base > 0

    def sample_block(self, rng, size):
        c = np.exp(self.log_scalar.sample(rng, size))
        return self._transform(c[:, None, None] * self.base)

    def sample_log_norms(self, rng, size):
        if self.offset is not None:
            return super().sample_log_norms(rng, size)
        # log domain: heavy-tailed scalars overflow as matrices
        return (self.log_scalar.sample(rng, size) + math.log(self.scale)
                + math.log(operator_norm(self.base, self.norm)))

    def _params_dict(self):
        return {"base": self.base.tolist(), "log_scalar": self.log_scalar.to_dict()}


@dataclass(frozen=True, eq=False)
class LeslieRandom(CocycleModel):
    """Age-structured model: fecundities on row 0, survivals on the subdiagonal."""

    variant: ClassVar[str] = "leslie"
    fecundity: tuple = field(default=(), kw_only=True)
    survival: tuple = field(default=(), kw_only=True)

    def __post_init__(self):
        f, s = tuple(self.fecundity), tuple(self.survival)
        if len(f) < 2 or len(s) != len(f) - 1:
            raise ConfigError("leslie needs n >= 2 fecundities and n-1 survivals")
        for d in f:
            _require_nonnegative(d, "fecundity")
        for d in s:
            lo, hi = d.support
            if lo < 0 or hi > 1 or (d.kind == "constant" and lo == 0):
                raise ConfigError("survival distributions must be supported in (0, 1]")
        object.__setattr__(self, "fecundity", f)
        object.__setattr__(self, "survival", s)
        self._check_common()

    @property
    def dimension(self):
        return len(self.fecundity)

    def _raw_support(self):
        n = self.dimension
        pat = np.zeros((n, n), dtype=bool)
        pat[0] = [d.almost_surely_positive for d in self.fecundity]
        pat[np.arange(1, n), np.arange(n - 1)] = True
        return pat

    def sample_block(self, rng, size):
        n = self.dimension
        out = np.zeros((size, n, n))
        for j, d in enumerate(self.fecundity):
            out[:, 0, j] = d.sample(rng, size)
        for j, d in enumerate(self.survival):
            out[:, j + 1, j] = d.sample(rng, size)
        return self._transform(out)

    def _params_dict(self):
        return {"fecundity": [d.to_dict() for d in self.fecundity],
                "survival": [d.to_dict() for d in self.survival]}


@dataclass(frozen=True, eq=False)
class MarkovSwitch(CocycleModel):
    """Matrices chosen by a stationary two-sided Markov chain of states."""

    variant: ClassVar[str] = "markov"
    states: tuple = field(default=(), kw_only=True)
    transition: np.ndarray = field(default=None, kw_only=True)

    def __post_init__(self):
        mats = tuple(_matrix(a, "state matrix") for a in self.states)
        if len(mats) < 1 or len({a.shape for a in mats}) != 1:
            raise ConfigError("markov needs state matrices of one common shape")
        if any(np.any(a < 0) for a in mats):
            raise ConfigError("state matrices must be entrywise nonnegative")
        p = np.array(self.transition, dtype=float)
        if p.shape != (len(mats), len(mats)) or np.any(p < 0) or not np.allclose(p.sum(axis=1), 1.0):
            raise ConfigError("transition must be a row-stochastic matrix matching the states")
        object.__setattr__(self, "states", mats)
        object.__setattr__(self, "transition", p)
        self._check_common()

    @property
    def dimension(self):
        return self.states[0].shape[0]

    def _raw_support(self):
        return np.logical_and.reduce([a > 0 for a in self.states])

    @property
    def stationary(self) -> np.ndarray:
        vals, vecs = np.linalg.eig(self.transition.T)
        i = int(np.argmin(np.abs(vals - 1.0)))
        pi = np.abs(np.real(vecs[:, i]))
        return pi / pi.sum()

    @property
    def reversed_transition(self) -> np.ndarray:
        """Kernel of the time-reversed chain under the stationary law."""
        pi = self.stationary
        with np.errstate(divide="ignore", invalid="ignore"):
            r = (self.transition.T * pi[None, :]) / pi[:, None]
        return np.nan_to_num(r)

    def matrices_for(self, states: np.ndarray) -> np.ndarray:
        return self._transform(np.stack(self.states)[states])

    def _params_dict(self):
        return {"states": [a.tolist() for a in self.states],
                "transition": self.transition.tolist()}


VARIANTS = {cls.variant: cls for cls in
            (Deterministic, IIDEnsemble, ScalarScaled, LeslieRandom, MarkovSwitch)}


def model_from_dict(d: dict) -> CocycleModel:
    if not isinstance(d, dict):
        raise ConfigError("model must be a mapping")
    d = dict(d)
    variant = d.pop("variant", None)
    cls = VARIANTS.get(variant)
    if cls is None:
        raise ConfigError(f"unknown model variant {variant!r}; expected one of {sorted(VARIANTS)}")
    common = {}
    for key in ("norm", "scale", "offset"):
        if key in d and d[key] is not None:
            common[key] = d.pop(key)
        else:
            d.pop(key, None)
    if "norm" in common:
        try:
            common["norm"] = NormKind.parse(common["norm"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    try:
        if cls is Deterministic:
            kw = {"matrix": d.pop("matrix")}
        elif cls is IIDEnsemble:
            kw = {"n": d.pop("dimension"), "entry": Dist.from_dict(d.pop("entry"))}
        elif cls is ScalarScaled:
            kw = {"base": d.pop("base"), "log_scalar": Dist.from_dict(d.pop("log_scalar"))}
        elif cls is LeslieRandom:
            kw = {"fecundity": tuple(Dist.from_dict(x) for x in d.pop("fecundity")),
                  "survival": tuple(Dist.from_dict(x) for x in d.pop("survival"))}
        else:
            kw = {"states": tuple(d.pop("states")), "transition": d.pop("transition")}
    except KeyError as exc:
        raise ConfigError(f"{variant}: missing key {exc}") from None
    d.pop("dimension", None)
    if d:
        raise ConfigError(f"{variant}: unexpected keys {sorted(d)}")
    return cls(**common, **kw)


# --------------------------------------------------------------------------
# sample paths


def _zigzag(b: int) -> int:
    return 2 * b if b >= 0 else -2 * b - 1


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Generator for one block of indices; a pure function of (seed, block)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_zigzag(block),))
    return np.random.Generator(np.random.PCG64(ss))


def _chain(start: int, us: np.ndarray, cdf: np.ndarray) -> np.ndarray:
    """``x_i = next(x_{i-1}, u_i)`` with ``x_0 = start``, returns ``x_1..x_L``.

    Each step is a map on the (few) states; the maps are composed by a
    prefix scan in ``O(log L)`` vectorized passes instead of a Python loop.
    """
    last = cdf.shape[0] - 1
    if us.size == 0:
        return np.empty(0, dtype=np.int64)
    # F[i, s]: state after step i from state s
    F = np.minimum((cdf[None, :, :] <= us[:, None, None]).sum(axis=2), last).astype(np.int64)
    d = 1
    while d < F.shape[0]:
        F[d:] = np.take_along_axis(F[d:], F[:-d], axis=1)
        d *= 2
    return F[:, start].copy()


class OmegaPath:
    """A two-sided sample path of a model, materialized lazily.

    ``step > 1`` gives the time-``step`` skeleton: index ``k`` of the
    skeleton is the product ``A_{kT+T-1} ... A_{kT}`` of the base path.
    """

    def __init__(self, model: CocycleModel, seed: int, step: int = 1):
        if int(seed) < 0 or int(seed) >= 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if int(step) < 1:
            raise ConfigError("step must be a positive integer")
        self.model = model
        self.seed = int(seed)
        self.step = int(step)
        self._blocks: dict[int, np.ndarray] = {}
        self._states_fwd = None
        self._states_bwd = None

    @property
    def n(self) -> int:
        return self.model.dimension

    @property
    def norm(self) -> NormKind:
        return self.model.norm

    def clear(self) -> None:
        self._blocks.clear()

    # -- base path --------------------------------------------------------

    def _block(self, b: int) -> np.ndarray:
        blk = self._blocks.get(b)
        if blk is None:
            if isinstance(self.model, MarkovSwitch):
                blk = self.model.matrices_for(self._markov_states(b * BLOCK, (b + 1) * BLOCK))
            else:
                blk = self.model.sample_block(block_rng(self.seed, b), BLOCK)
            blk = np.ascontiguousarray(blk, dtype=float)
            blk.flags.writeable = False
            self._blocks[b] = blk
        return blk

    def _uniforms(self, b: int) -> np.ndarray:
        return block_rng(self.seed, b).random(BLOCK)

    def _markov_states(self, a: int, b: int) -> np.ndarray:
        """States at indices ``a..b-1`` of the two-sided stationary chain.

        Index 0 is drawn from the stationary law; index ``k > 0`` follows
        the forward kernel from ``k - 1`` and index ``k < 0`` the reversed
        kernel from ``k + 1``, each driven by the uniform stored at ``k``.
        Blocks are generated in order away from 0, so the result does not
        depend on the order of queries.
        """
        m = self.model
        if self._states_fwd is None:
            u0 = self._uniforms(0)[0]
            s0 = min(int(np.searchsorted(np.cumsum(m.stationary), u0, side="right")),
                     len(m.states) - 1)
            self._states_fwd = {}
            self._states_bwd = {}
            self._s0 = s0
        for blk in range(0, (b - 1) // BLOCK + 1):
            if blk not in self._states_fwd:
                u = self._uniforms(blk)
                if blk == 0:
                    start, us = self._s0, u[1:]
                    head = [self._s0]
                else:
                    start, us = int(self._states_fwd[blk - 1][-1]), u
                    head = []
                seq = _chain(start, us, np.cumsum(m.transition, axis=1))
                self._states_fwd[blk] = np.concatenate([np.array(head, dtype=np.int64), seq])
        for blk in range(-1, a // BLOCK - 1, -1):
            if blk not in self._states_bwd:
                u = self._uniforms(blk)[::-1]          # indices (blk+1)*B - 1 down to blk*B
                start = self._s0 if blk == -1 else int(self._states_bwd[blk + 1][0])
                seq = _chain(start, u, np.cumsum(m.reversed_transition, axis=1))
                self._states_bwd[blk] = seq[::-1]
        out = np.empty(b - a, dtype=np.int64)
        for blk in range(a // BLOCK, (b - 1) // BLOCK + 1):
            arr = self._states_fwd[blk] if blk >= 0 else self._states_bwd[blk]
            lo, hi = max(a, blk * BLOCK), min(b, (blk + 1) * BLOCK)
            out[lo - a: hi - a] = arr[lo - blk * BLOCK: hi - blk * BLOCK]
        return out

    def _base_window(self, a: int, b: int) -> np.ndarray:
        if b <= a:
            return np.empty((0, self.n, self.n))
        b0, b1 = a // BLOCK, (b - 1) // BLOCK
        parts = [self._block(j) for j in range(b0, b1 + 1)]
        full = parts[0] if len(parts) == 1 else np.concatenate(parts)
        off = a - b0 * BLOCK
        return full[off: off + (b - a)]

    # -- public -------------------------------------------------------------

    def window(self, a: int, b: int) -> np.ndarray:
        """Matrices ``A_a, ..., A_{b-1}`` as a C-contiguous ``(b-a, n, n)`` array."""
        a, b = int(a), int(b)
        if self.step == 1:
            return np.ascontiguousarray(self._base_window(a, b))
        T = self.step
        base = self._base_window(a * T, b * T).reshape(b - a, T, self.n, self.n)
        out = base[:, 0].copy()
        for j in range(1, T):
            out = np.matmul(base[:, j], out)
        return np.ascontiguousarray(out)

    def sample(self, k: int) -> np.ndarray:
        return self.window(k, k + 1)[0].copy()

    def shifted(self, model: CocycleModel) -> "OmegaPath":
        """The same seed and step with a different (coupled) model."""
        return OmegaPath(model, self.seed, self.step)


def sample_matrix(path: OmegaPath, k: int) -> np.ndarray:
    return path.sample(k)


# --------------------------------------------------------------------------
# products


@dataclass(frozen=True)
class CocycleProduct:
    """A matrix product stored as ``value * exp(log_scale)``."""

    value: np.ndarray
    log_scale: float

    def matrix(self) -> np.ndarray:
        return self.value * math.exp(self.log_scale)

    def apply(self, u) -> tuple[np.ndarray, float]:
        """``(value @ u, log_scale)``."""
        return self.value @ np.asarray(u, dtype=float), self.log_scale

    def compose(self, first: "CocycleProduct") -> "CocycleProduct":
        """``self @ first`` with the scales combined."""
        return CocycleProduct(self.value @ first.value, self.log_scale + first.log_scale)

    @property
    def T(self) -> "CocycleProduct":
        return CocycleProduct(self.value.T.copy(), self.log_scale)


def forward_product(path: OmegaPath, k: int, t: int) -> CocycleProduct:
    """``U_{theta_k omega}(t) = A_{k+t-1} ... A_k``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    value, log_scale = kernels.log_scaled_product(path.window(k, k + t))
    return CocycleProduct(value, float(log_scale))


def dual_product(path: OmegaPath, k: int, t: int) -> CocycleProduct:
    """``U*_{theta_k omega}(t) = (A_{k-1} ... A_{k-t})^T``."""
    return forward_product(path, k - t, t).T


# --------------------------------------------------------------------------
# integrability


@dataclass
class IntegrabilityReport:
    mean: float
    doubling_means: list
    doubling_counts: list
    tail_quantile_999: float
    max_value: float
    heavy_tail: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_A1_integrability(model: CocycleModel, replicates: int = 1000,
                           seed: int = 0, doublings: int = 8) -> IntegrabilityReport:
    """Empirical mean of ``ln+ ||A||`` with a doubling-divergence flag.

    Nested sample means at ``replicates * 2**j`` draws are compared: with a
    finite mean the last three doublings move the mean by O(1/sqrt(count));
    a divergent mean keeps drifting by a roughly constant amount per
    doubling.  The flag fires when the drift exceeds six robust standard
    errors.
    """
    if replicates < 1:
        raise ValueError("replicates must be positive")
    total = replicates * 2 ** doublings
    if isinstance(model, MarkovSwitch):
        mats = OmegaPath(model, seed).window(0, total)
        with np.errstate(divide="ignore"):
            logs = np.log(_operator_norms(mats, model.norm))
    else:
        nblocks = -(-total // BLOCK)
        logs = np.concatenate([model.sample_log_norms(block_rng(seed, b), BLOCK)
                               for b in range(nblocks)])[:total]
    vals = np.maximum(logs, 0.0)
    counts = [replicates * 2 ** j for j in range(doublings + 1)]
    means = [float(vals[:c].mean()) for c in counts]
    q75, q25 = np.percentile(vals, [75, 25])
    spread = (q75 - q25) / 1.349
    if spread == 0.0:
        spread = float(vals.std())
    ref = counts[max(0, doublings - 3)]
    drift = abs(means[-1] - means[max(0, doublings - 3)])
    heavy = (not np.all(np.isfinite(vals))) or drift > 6.0 * spread / math.sqrt(ref) + 1e-12
    return IntegrabilityReport(
        mean=means[-1],
        doubling_means=means,
        doubling_counts=counts,
        tail_quantile_999=float(np.quantile(vals, 0.999)),
        max_value=float(vals.max()),
        heavy_tail=bool(heavy),
    )
