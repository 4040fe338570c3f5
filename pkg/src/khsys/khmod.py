"""Kaplansky-Hilbert modules over a finite Stone algebra.

A KH-module over C(Omega) with Omega finite is the same thing as a Hilbert
bundle: one finite-dimensional complex Hilbert space per base point. A module
element is a section, i.e. one vector per point. The A-valued inner product
and lattice norm are computed fiberwise.

Order closure is trivial here (every submodule of a finite bundle is already
order-closed), so the closure subtleties of the general theory have no code
path of their own.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import NotSuborthonormal, ShapeMismatch
from .stone import DEFAULT_TOL, BaseSet, Idempotent, StoneElement


class KhModuleShape:
    """Base set plus fiber dimensions; two modules are equal iff shapes are."""

    __slots__ = ("base", "dims", "offsets")

    def __init__(self, base: BaseSet, dims: Sequence[int]):
        d = tuple(int(k) for k in dims)
        if len(d) != len(base):
            raise ValueError(f"expected {len(base)} fiber dims, got {len(d)}")
        if any(k < 0 for k in d):
            raise ValueError("fiber dims must be non-negative")
        self.base = base
        self.dims = d
        self.offsets = tuple(np.concatenate([[0], np.cumsum(d)]).astype(int).tolist())

    @property
    def total_dim(self) -> int:
        return self.offsets[-1]

    def __eq__(self, other):
        return (isinstance(other, KhModuleShape) and self.base == other.base
                and self.dims == other.dims)

    def __hash__(self):
        return hash((self.base, self.dims))

    def __repr__(self):
        return f"KhModuleShape({list(self.base.points)!r}, dims={list(self.dims)})"

    def dim_element(self) -> StoneElement:
        return StoneElement(self.base, np.array(self.dims, dtype=float))


class KhVector:
    """A section of a finite Hilbert bundle: one complex vector per point."""

    __slots__ = ("shape", "fibers")

    def __init__(self, shape: KhModuleShape, fibers: Iterable):
        fs = []
        for k, (d, f) in enumerate(zip(shape.dims, fibers)):
            arr = np.array(f, dtype=complex).reshape(-1)
            if arr.shape[0] != d:
                raise ShapeMismatch(f"fiber {k} has length {arr.shape[0]}, expected {d}")
            arr.setflags(write=False)
            fs.append(arr)
        if len(fs) != len(shape.dims):
            raise ShapeMismatch(f"expected {len(shape.dims)} fibers, got {len(fs)}")
        self.shape = shape
        self.fibers = tuple(fs)

    @classmethod
    def zeros(cls, shape: KhModuleShape) -> "KhVector":
        return cls(shape, [np.zeros(d, dtype=complex) for d in shape.dims])

    @classmethod
    def from_flat(cls, shape: KhModuleShape, flat) -> "KhVector":
        flat = np.asarray(flat, dtype=complex).reshape(-1)
        if flat.shape[0] != shape.total_dim:
            raise ShapeMismatch("flat vector length does not match module")
        o = shape.offsets
        return cls(shape, [flat[o[k]:o[k + 1]] for k in range(len(shape.dims))])

    @classmethod
    def random(cls, shape: KhModuleShape, rng: np.random.Generator) -> "KhVector":
        return cls(shape, [rng.standard_normal(d) + 1j * rng.standard_normal(d)
                           for d in shape.dims])

    def flat(self) -> np.ndarray:
        if not self.fibers:
            return np.zeros(0, dtype=complex)
        return np.concatenate(self.fibers)

    def __repr__(self):
        return f"KhVector({[f.tolist() for f in self.fibers]!r})"

    def _check(self, other):
        if not isinstance(other, KhVector):
            raise TypeError(f"expected KhVector, got {type(other).__name__}")
        if self.shape != other.shape:
            raise ShapeMismatch(f"{self.shape!r} != {other.shape!r}")

    def __add__(self, other):
        self._check(other)
        return KhVector(self.shape, [a + b for a, b in zip(self.fibers, other.fibers)])

    def __sub__(self, other):
        self._check(other)
        return KhVector(self.shape, [a - b for a, b in zip(self.fibers, other.fibers)])

    def __neg__(self):
        return KhVector(self.shape, [-a for a in self.fibers])

    def __mul__(self, c):
        if isinstance(c, (StoneElement, Idempotent)):
            if c.base != self.shape.base:
                raise ShapeMismatch("module and algebra element live on different bases")
            vals = c.values if isinstance(c, StoneElement) else c.mask.astype(float)
            return KhVector(self.shape, [v * a for v, a in zip(vals, self.fibers)])
        if np.isscalar(c):
            return KhVector(self.shape, [c * a for a in self.fibers])
        return NotImplemented

    __rmul__ = __mul__

    def conj(self) -> "KhVector":
        return KhVector(self.shape, [a.conj() for a in self.fibers])

    def allclose(self, other: "KhVector", atol: float = 1e-10) -> bool:
        self._check(other)
        return all(np.allclose(a, b, rtol=0.0, atol=atol)
                   for a, b in zip(self.fibers, other.fibers))

    def norm(self) -> float:
        """Scalar norm ``max_w |x|(w)``."""
        return lattice_norm(self).norm()

    def is_zero(self, tol: float = DEFAULT_TOL) -> bool:
        return all(np.linalg.norm(a) <= tol for a in self.fibers)


def inner_product(x: KhVector, y: KhVector) -> StoneElement:
    """``(x|y)(w) = <x_w, y_w>``, linear in ``x`` and conjugate-linear in ``y``."""
    x._check(y)
    return StoneElement(x.shape.base, [np.vdot(b, a) for a, b in zip(x.fibers, y.fibers)])


def lattice_norm(x: KhVector) -> StoneElement:
    return StoneElement._real(x.shape.base, [np.linalg.norm(a) for a in x.fibers])


def normalize(x: KhVector, tol: float = DEFAULT_TOL):
    """Return ``(x/|x|, supp(x))``.

    Fibers with ``|x|(w) <= tol`` are treated as zero.
    """
    fibers, mask = [], []
    for a in x.fibers:
        n = np.linalg.norm(a)
        if n > tol:
            fibers.append(a / n)
            mask.append(True)
        else:
            fibers.append(np.zeros_like(a))
            mask.append(False)
    return KhVector(x.shape, fibers), Idempotent(x.shape.base, mask)


def _check_shapes(xs: Sequence[KhVector], shape=None) -> KhModuleShape | None:
    if shape is None and xs:
        shape = xs[0].shape
    for x in xs:
        if x.shape != shape:
            raise ShapeMismatch(f"{x.shape!r} != {shape!r}")
    return shape


def is_suborthonormal(basis: Sequence[KhVector], tol: float = 1e-8) -> bool:
    """Pairwise orthogonal with idempotent lattice norms (up to ``tol``)."""
    if not basis:
        return True
    _check_shapes(basis)
    for w in range(len(basis[0].shape.dims)):
        if basis[0].shape.dims[w] == 0:
            continue
        m = np.stack([e.fibers[w] for e in basis], axis=1)
        gram = m.conj().T @ m
        diag = np.real(np.diag(gram))
        if np.any(np.minimum(np.abs(diag), np.abs(diag - 1.0)) > tol):
            return False
        off = gram - np.diag(np.diag(gram))
        if np.any(np.abs(off) > tol):
            return False
    return True


def _require_suborthonormal(basis, shape=None):
    _check_shapes(basis, shape)
    if not is_suborthonormal(basis):
        raise NotSuborthonormal("family is not suborthonormal")


def gram_schmidt(xs: Sequence[KhVector], tol: float = DEFAULT_TOL) -> list[KhVector]:
    """Module Gram-Schmidt with support-aware normalization.

    Each candidate is orthogonalized twice against the accepted vectors, then
    normalized fiberwise; it is dropped only if nothing survives anywhere.
    """
    _check_shapes(xs)
    out: list[KhVector] = []
    for x in xs:
        y = x
        for _ in range(2):
            for e in out:
                y = y - inner_product(y, e) * e
        u, p = normalize(y, tol)
        if p:
            out.append(u)
    return out


def basis_from_frames(shape: KhModuleShape, frames: Sequence[np.ndarray]) -> list[KhVector]:
    """Assemble a suborthonormal family from fiberwise orthonormal column frames.

    The k-th output vector takes column k of every frame that has one, so
    supports decrease along the list.
    """
    ranks = [f.shape[1] for f in frames]
    n = max(ranks, default=0)
    out = []
    for k in range(n):
        fibers = [frames[w][:, k] if ranks[w] > k else np.zeros(shape.dims[w], dtype=complex)
                  for w in range(len(shape.dims))]
        out.append(KhVector(shape, fibers))
    return out


def fiber_frame(basis: Sequence[KhVector], w: int, d: int, tol: float = 0.5) -> np.ndarray:
    """Columns of the basis that are nonzero at point ``w`` (normalized vectors)."""
    cols = [e.fibers[w] for e in basis if np.linalg.norm(e.fibers[w]) > tol]
    if not cols:
        return np.zeros((d, 0), dtype=complex)
    return np.stack(cols, axis=1)


def extend_to_basis(partial: Sequence[KhVector], shape: KhModuleShape,
                    tol: float = DEFAULT_TOL) -> list[KhVector]:
    """Extend a suborthonormal family to a suborthonormal basis of the module.

    The added vectors are produced greedily: each one is a normalized element
    of the current orthocomplement with the largest possible support, which
    fiberwise amounts to completing an orthonormal basis of every fiber.
    """
    partial = list(partial)
    _require_suborthonormal(partial, shape)
    frames = []
    for w, d in enumerate(shape.dims):
        q = fiber_frame(partial, w, d)
        if q.shape[1] >= d:
            frames.append(np.zeros((d, 0), dtype=complex))
            continue
        comp = np.eye(d, dtype=complex) - q @ q.conj().T
        u, s, _ = np.linalg.svd(comp)
        frames.append(u[:, : d - q.shape[1]])
    return partial + basis_from_frames(shape, frames)


def project_onto(x: KhVector, basis: Sequence[KhVector]) -> KhVector:
    """``Px = sum_e (x|e) e`` for a suborthonormal ``basis``."""
    _require_suborthonormal(basis, x.shape)
    out = KhVector.zeros(x.shape)
    for e in basis:
        out = out + inner_product(x, e) * e
    return out


def dimension_function(basis: Sequence[KhVector], shape: KhModuleShape | None = None,
                       tol: float = 1e-6) -> StoneElement:
    """``dim = sum_e |e|^2``; integer-valued for a suborthonormal family."""
    basis = list(basis)
    if shape is None:
        if not basis:
            raise ValueError("shape is required for an empty basis")
        shape = basis[0].shape
    _require_suborthonormal(basis, shape)
    total = np.zeros(len(shape.base))
    for e in basis:
        total += lattice_norm(e).real ** 2
    rounded = np.rint(total)
    if np.any(np.abs(total - rounded) > tol):
        raise NotSuborthonormal("dimension function is not integer-valued")
    return StoneElement(shape.base, rounded)


def homogeneous_components(basis: Sequence[KhVector], shape: KhModuleShape | None = None):
    """Split the span of ``basis`` into its homogeneous components.

    Returns ``[(q_k, [v_1, ..., v_k]), ...]`` for every ``k`` with ``q_k != 0``,
    where ``q_k = 1_[dim = k]`` and the ``v_i`` form a homogeneous suborthonormal
    basis of ``q_k E`` (every ``|v_i|`` equals ``q_k``). At each point the
    basis vectors alive there are dealt out to the slots ``v_1..v_k`` in order
    of decreasing support size, so incomparable supports are handled too.
    """
    basis = list(basis)
    if shape is None:
        if not basis:
            raise ValueError("shape is required for an empty basis")
        shape = basis[0].shape
    dims = dimension_function(basis, shape).real.astype(int)
    order = sorted(range(len(basis)),
                   key=lambda i: -int(np.sum(lattice_norm(basis[i]).real > 0.5)))
    ordered = [basis[i] for i in order]
    out = []
    for k in sorted(set(dims.tolist())):
        q = Idempotent(shape.base, dims == k)
        slots = []
        frames = [fiber_frame(ordered, w, d) if q.mask[w] else None
                  for w, d in enumerate(shape.dims)]
        for i in range(k):
            fibers = [frames[w][:, i] if q.mask[w] else np.zeros(d, dtype=complex)
                      for w, d in enumerate(shape.dims)]
            slots.append(KhVector(shape, fibers))
        out.append((q, slots))
    return out
