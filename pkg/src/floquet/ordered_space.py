"""The standard cone on R^n: order, lattice parts and lattice norms.

Every function here accepts either a :class:`ConeVector` or anything
``numpy.asarray`` understands.  The dual space is identified with R^n
through the dot product, so the same machinery serves covectors.
"""
from __future__ import annotations

import enum

import numpy as np


class DimensionError(ValueError):
    """Operands of different lengths were combined."""


class NormKind(str, enum.Enum):
    ELL1 = "ell1"
    ELL2 = "ell2"
    ELLINF = "ellinf"

    @property
    def code(self) -> int:
        # integer tag understood by the compiled kernels
        return _NORM_CODES[self]

    @classmethod
    def parse(cls, value) -> "NormKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown norm kind {value!r}; expected one of "
                             f"{[k.value for k in cls]}") from None


_NORM_CODES = {NormKind.ELL1: 0, NormKind.ELL2: 1, NormKind.ELLINF: 2}


class ConeVector:
    """Immutable coordinate vector of fixed length n >= 2."""

    __slots__ = ("_coords",)

    def __init__(self, coords):
        arr = np.array(coords, dtype=float).reshape(-1)
        if arr.size < 2:
            raise DimensionError("a ConeVector needs at least two coordinates")
        arr.flags.writeable = False
        self._coords = arr

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    def __len__(self) -> int:
        return self._coords.size

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._coords
        return self._coords.astype(dtype)

    def __iter__(self):
        return iter(self._coords.tolist())

    def __repr__(self) -> str:
        return f"ConeVector({self._coords.tolist()})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConeVector):
            return NotImplemented
        return len(self) == len(other) and bool(np.all(self._coords == other._coords))

    def __hash__(self):
        return hash(self._coords.tobytes())

    def _binary(self, other, op):
        b = _as_array(other)
        _check_same_length(self._coords, b)
        return ConeVector(op(self._coords, b))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return ConeVector(self._coords * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return ConeVector(-self._coords)


def _as_array(u) -> np.ndarray:
    if isinstance(u, ConeVector):
        return u.coords
    return np.asarray(u, dtype=float)


def _check_same_length(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")


def cone_contains(u, atol: float = 0.0) -> bool:
    """True iff every coordinate is >= -atol (exact by default)."""
    return bool(np.all(_as_array(u) >= -atol))


def order_leq(u, v, atol: float = 0.0) -> bool:
    """u <= v in the cone order, i.e. v - u lies in the cone."""
    a, b = _as_array(u), _as_array(v)
    _check_same_length(a, b)
    return cone_contains(b - a, atol)


def lattice_parts(u):
    """Return ``(u_plus, u_minus, u_abs)`` with u = u_plus - u_minus."""
    a = _as_array(u)
    plus = np.maximum(a, 0.0)
    minus = np.maximum(-a, 0.0)
    return ConeVector(plus), ConeVector(minus), ConeVector(plus + minus)


def norm(u, kind=NormKind.ELL1) -> float:
    a = _as_array(u)
    kind = NormKind.parse(kind)
    if kind is NormKind.ELL1:
        return float(np.sum(np.abs(a)))
    if kind is NormKind.ELL2:
        return float(norms_rows(a[None, :], kind)[0]) if a.size else 0.0
    return float(np.max(np.abs(a)))


def norms_rows(x: np.ndarray, kind=NormKind.ELL1) -> np.ndarray:
    """Row-wise norms of a 2-D array."""
    kind = NormKind.parse(kind)
    x = np.asarray(x, dtype=float)
    if kind is NormKind.ELL1:
        return np.abs(x).sum(axis=-1)
    if kind is NormKind.ELL2:
        # scaled so that tiny or huge entries neither underflow nor overflow
        top = np.abs(x).max(axis=-1, keepdims=True)
        safe = np.where(top > 0, top, 1.0)
        return safe[..., 0] * np.sqrt(((x / safe) ** 2).sum(axis=-1))
    return np.abs(x).max(axis=-1)


def normalize(u, kind=NormKind.ELL1) -> np.ndarray:
    a = _as_array(u)
    r = norm(a, kind)
    if r == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return a / r


def operator_norm(a: np.ndarray, kind=NormKind.ELL1) -> float:
    """Operator norm of a matrix induced by the chosen vector norm."""
    kind = NormKind.parse(kind)
    a = np.asarray(a, dtype=float)
    if kind is NormKind.ELL1:
        return float(np.abs(a).sum(axis=0).max())
    if kind is NormKind.ELLINF:
        return float(np.abs(a).sum(axis=1).max())
    return float(np.linalg.norm(a, 2))


def ones_unit(n: int, kind=NormKind.ELL1) -> np.ndarray:
    """The all-ones vector scaled to unit norm; the default focus vector."""
    return normalize(np.ones(n), kind)


def pairing(u, u_star) -> float:
    a, b = _as_array(u), _as_array(u_star)
    _check_same_length(a, b)
    return float(np.dot(a, b))
