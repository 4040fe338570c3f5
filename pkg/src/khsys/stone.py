"""Finite Stone algebras C(Omega).

On a finite discrete base set every bounded net that order-converges does so
pointwise and eventually, so suprema, infima and the normalization limits used
for supports reduce to plain pointwise arithmetic. Nothing here models the
general (infinite) Stonean case.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import BaseMismatch, DomainError

DEFAULT_TOL = 1e-9


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class BaseSet:
    """Ordered finite set of point labels.

    The order given at construction is canonical: every vector or matrix
    indexed by the base set uses it.
    """

    __slots__ = ("points", "_index")

    def __init__(self, points: Iterable[str]):
        pts = tuple(points)
        if not pts:
            raise ValueError("base set needs at least one point")
        for p in pts:
            if not isinstance(p, str) or not p:
                raise ValueError(f"point labels must be non-empty strings, got {p!r}")
        if len(set(pts)) != len(pts):
            raise ValueError("point labels must be unique")
        self.points = pts
        self._index = {p: i for i, p in enumerate(pts)}

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __eq__(self, other):
        return isinstance(other, BaseSet) and self.points == other.points

    def __hash__(self):
        return hash(self.points)

    def __repr__(self):
        return f"BaseSet({list(self.points)!r})"

    def index(self, label: str) -> int:
        return self._index[label]


def _check_base(a, b):
    if a.base != b.base:
        raise BaseMismatch(f"{a.base!r} != {b.base!r}")


class StoneElement:
    """A complex-valued function on a finite base set."""

    __slots__ = ("base", "values")

    def __init__(self, base: BaseSet, values):
        vals = np.array(values, dtype=complex).reshape(-1)
        if vals.shape[0] != len(base):
            raise ValueError(f"expected {len(base)} values, got {vals.shape[0]}")
        self.base = base
        self.values = _frozen(vals)

    @classmethod
    def constant(cls, base: BaseSet, c=1.0) -> "StoneElement":
        return cls(base, np.full(len(base), c, dtype=complex))

    @classmethod
    def _real(cls, base, values) -> "StoneElement":
        out = cls(base, values)
        out.values.setflags(write=True)
        out.values.imag[:] = 0.0
        out.values.setflags(write=False)
        return out

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    def __repr__(self):
        return f"StoneElement({dict(zip(self.base.points, self.values.tolist()))})"

    def __len__(self):
        return len(self.values)

    def __getitem__(self, label: str) -> complex:
        return self.values[self.base.index(label)]

    # arithmetic -----------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, StoneElement):
            _check_base(self, other)
            return other.values
        if isinstance(other, Idempotent):
            _check_base(self, other)
            return other.mask.astype(float)
        if np.isscalar(other):
            return other
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return StoneElement(self.base, self.values + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return StoneElement(self.base, self.values - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return StoneElement(self.base, o - self.values)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return StoneElement(self.base, self.values * o)

    __rmul__ = __mul__

    def __neg__(self):
        return StoneElement(self.base, -self.values)

    def conj(self) -> "StoneElement":
        return StoneElement(self.base, self.values.conj())

    def __abs__(self) -> "StoneElement":
        return StoneElement._real(self.base, np.abs(self.values))

    def sup(self, other: "StoneElement") -> "StoneElement":
        _check_base(self, other)
        return StoneElement._real(self.base, np.maximum(self.values.real, other.values.real))

    def inf(self, other: "StoneElement") -> "StoneElement":
        _check_base(self, other)
        return StoneElement._real(self.base, np.minimum(self.values.real, other.values.real))

    def sqrt(self, tol: float = DEFAULT_TOL) -> "StoneElement":
        """Square root of a positive element; tiny negative noise is clipped."""
        v = self.values
        if np.any(np.abs(v.imag) > tol) or np.any(v.real < -tol):
            raise DomainError("sqrt requires a positive element")
        return StoneElement._real(self.base, np.sqrt(np.clip(v.real, 0.0, None)))

    def norm(self) -> float:
        """Sup norm."""
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0

    def compose(self, perm: Sequence[int]) -> "StoneElement":
        """Return ``f o perm`` where ``perm[i]`` is an index into the base."""
        return StoneElement(self.base, self.values[np.asarray(perm, dtype=int)])

    def allclose(self, other, atol: float = 1e-10) -> bool:
        o = self._coerce(other)
        return bool(np.all(np.abs(self.values - o) <= atol))

    def le(self, other, tol: float = 0.0) -> bool:
        """Pointwise ``self <= other`` on real parts, up to ``tol``."""
        o = self._coerce(other)
        return bool(np.all(self.values.real <= np.real(o) + tol))

    def support(self, tol: float = DEFAULT_TOL) -> "Idempotent":
        return support_of(self, tol)


class Idempotent:
    """A 0/1-valued element of C(Omega), stored as a boolean mask."""

    __slots__ = ("base", "mask")

    def __init__(self, base: BaseSet, mask):
        m = np.array(mask, dtype=bool).reshape(-1)
        if m.shape[0] != len(base):
            raise ValueError(f"expected {len(base)} entries, got {m.shape[0]}")
        self.base = base
        self.mask = _frozen(m)

    @classmethod
    def one(cls, base: BaseSet) -> "Idempotent":
        return cls(base, np.ones(len(base), dtype=bool))

    @classmethod
    def zero(cls, base: BaseSet) -> "Idempotent":
        return cls(base, np.zeros(len(base), dtype=bool))

    @classmethod
    def indicator(cls, base: BaseSet, labels: Iterable[str]) -> "Idempotent":
        m = np.zeros(len(base), dtype=bool)
        for lab in labels:
            m[base.index(lab)] = True
        return cls(base, m)

    def __repr__(self):
        on = [p for p, b in zip(self.base.points, self.mask) if b]
        return f"Idempotent({on!r})"

    def __eq__(self, other):
        return (isinstance(other, Idempotent) and self.base == other.base
                and bool(np.array_equal(self.mask, other.mask)))

    def __hash__(self):
        return hash((self.base, self.mask.tobytes()))

    def __invert__(self) -> "Idempotent":
        return Idempotent(self.base, ~self.mask)

    complement = __invert__

    def __and__(self, other: "Idempotent") -> "Idempotent":
        _check_base(self, other)
        return Idempotent(self.base, self.mask & other.mask)

    def __or__(self, other: "Idempotent") -> "Idempotent":
        _check_base(self, other)
        return Idempotent(self.base, self.mask | other.mask)

    meet = __and__
    join = __or__

    def __bool__(self):
        return bool(self.mask.any())

    def as_element(self) -> StoneElement:
        return StoneElement(self.base, self.mask.astype(float))

    def __mul__(self, other):
        if isinstance(other, Idempotent):
            return self & other
        return self.as_element() * other

    __rmul__ = __mul__

    def le(self, other: "Idempotent") -> bool:
        _check_base(self, other)
        return bool(np.all(~self.mask | other.mask))


# functional-calculus style entry points ------------------------------------

def add(f: StoneElement, g: StoneElement) -> StoneElement:
    return f + g


def mul(f: StoneElement, g: StoneElement) -> StoneElement:
    return f * g


def conj(f: StoneElement) -> StoneElement:
    return f.conj()


def absolute(f: StoneElement) -> StoneElement:
    return abs(f)


def sup(f: StoneElement, g: StoneElement) -> StoneElement:
    return f.sup(g)


def inf(f: StoneElement, g: StoneElement) -> StoneElement:
    return f.inf(g)


def sqrt(f: StoneElement, tol: float = DEFAULT_TOL) -> StoneElement:
    return f.sqrt(tol)


def support_of(f: StoneElement, tol: float = DEFAULT_TOL) -> Idempotent:
    """The idempotent ``1_[|f| > tol]``."""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    return Idempotent(f.base, np.abs(f.values) > tol)


def invert_on_support(f: StoneElement, tol: float = DEFAULT_TOL) -> StoneElement:
    """``1/f`` on ``[|f| > tol]`` and zero elsewhere."""
    mask = np.abs(f.values) > tol
    out = np.zeros(len(f.values), dtype=complex)
    out[mask] = 1.0 / f.values[mask]
    return StoneElement(f.base, out)
