"""Bounded module homomorphisms as fiberwise matrices.

Every A-linear map between finite Hilbert bundles over the same base is a
family of matrices, one per point, and every one is Hilbert-Schmidt. The
operator lattice norm is the fiberwise spectral norm and the HS inner product
is the fiberwise Frobenius inner product.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import BaseMismatch, ShapeMismatch
from .khmod import KhModuleShape, KhVector, inner_product, lattice_norm
from .stone import DEFAULT_TOL, Idempotent, StoneElement


class ModuleHom:
    """A homomorphism ``domain -> codomain`` given by one block per point."""

    __slots__ = ("domain", "codomain", "blocks")

    def __init__(self, domain: KhModuleShape, codomain: KhModuleShape, blocks: Iterable):
        if domain.base != codomain.base:
            raise BaseMismatch("domain and codomain live on different bases")
        bs = []
        for k, (m, n, b) in enumerate(zip(codomain.dims, domain.dims, blocks)):
            arr = np.array(b, dtype=complex).reshape(m, n) if m * n == 0 else np.array(b, dtype=complex)
            if arr.shape != (m, n):
                raise ShapeMismatch(f"block {k} has shape {arr.shape}, expected {(m, n)}")
            arr.setflags(write=False)
            bs.append(arr)
        if len(bs) != len(domain.dims):
            raise ShapeMismatch(f"expected {len(domain.dims)} blocks, got {len(bs)}")
        self.domain = domain
        self.codomain = codomain
        self.blocks = tuple(bs)

    @classmethod
    def identity(cls, shape: KhModuleShape) -> "ModuleHom":
        return cls(shape, shape, [np.eye(d, dtype=complex) for d in shape.dims])

    @classmethod
    def zeros(cls, domain: KhModuleShape, codomain: KhModuleShape | None = None) -> "ModuleHom":
        codomain = domain if codomain is None else codomain
        return cls(domain, codomain, [np.zeros((m, n), dtype=complex)
                                      for m, n in zip(codomain.dims, domain.dims)])

    @classmethod
    def random(cls, domain, codomain=None, rng=None) -> "ModuleHom":
        codomain = domain if codomain is None else codomain
        rng = np.random.default_rng() if rng is None else rng
        return cls(domain, codomain, [rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
                                      for m, n in zip(codomain.dims, domain.dims)])

    def __repr__(self):
        return f"ModuleHom({self.domain!r} -> {self.codomain!r})"

    @property
    def is_square(self) -> bool:
        return self.domain == self.codomain

    def _check_same(self, other):
        if not isinstance(other, ModuleHom):
            raise TypeError(f"expected ModuleHom, got {type(other).__name__}")
        if self.domain != other.domain or self.codomain != other.codomain:
            raise ShapeMismatch("homomorphisms have different shapes")

    def __add__(self, other):
        self._check_same(other)
        return ModuleHom(self.domain, self.codomain,
                         [a + b for a, b in zip(self.blocks, other.blocks)])

    def __sub__(self, other):
        self._check_same(other)
        return ModuleHom(self.domain, self.codomain,
                         [a - b for a, b in zip(self.blocks, other.blocks)])

    def __neg__(self):
        return ModuleHom(self.domain, self.codomain, [-a for a in self.blocks])

    def __mul__(self, c):
        if isinstance(c, (StoneElement, Idempotent)):
            vals = c.values if isinstance(c, StoneElement) else c.mask.astype(float)
            return ModuleHom(self.domain, self.codomain,
                             [v * a for v, a in zip(vals, self.blocks)])
        if np.isscalar(c):
            return ModuleHom(self.domain, self.codomain, [c * a for a in self.blocks])
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, ModuleHom):
            return compose(self, other)
        if isinstance(other, KhVector):
            return apply(self, other)
        return NotImplemented

    def __call__(self, x: KhVector) -> KhVector:
        return apply(self, x)

    @property
    def H(self) -> "ModuleHom":
        return adjoint(self)

    def allclose(self, other: "ModuleHom", atol: float = 1e-10) -> bool:
        self._check_same(other)
        return all(np.allclose(a, b, rtol=0.0, atol=atol) for a, b in zip(self.blocks, other.blocks))

    def norm(self) -> float:
        """``||T|| = max_w |T|(w)``."""
        return op_lattice_norm(self).norm()

    def hs_sup(self) -> float:
        """``max_w |T|_HS(w)``."""
        return max((float(np.linalg.norm(b)) for b in self.blocks), default=0.0)

    def dense(self) -> np.ndarray:
        """Block-diagonal matrix on the total space."""
        out = np.zeros((self.codomain.total_dim, self.domain.total_dim), dtype=complex)
        ro, co = self.codomain.offsets, self.domain.offsets
        for k, b in enumerate(self.blocks):
            out[ro[k]:ro[k + 1], co[k]:co[k + 1]] = b
        return out


def apply(T: ModuleHom, x: KhVector) -> KhVector:
    if x.shape != T.domain:
        raise ShapeMismatch(f"{x.shape!r} is not the domain {T.domain!r}")
    return KhVector(T.codomain, [b @ f for b, f in zip(T.blocks, x.fibers)])


def compose(S: ModuleHom, T: ModuleHom) -> ModuleHom:
    """``S o T``."""
    if T.codomain != S.domain:
        raise ShapeMismatch("cannot compose: codomain of T is not domain of S")
    return ModuleHom(T.domain, S.codomain, [a @ b for a, b in zip(S.blocks, T.blocks)])


def adjoint(T: ModuleHom) -> ModuleHom:
    return ModuleHom(T.codomain, T.domain, [b.conj().T for b in T.blocks])


def op_lattice_norm(T: ModuleHom) -> StoneElement:
    """``|T|(w)`` = largest singular value of ``T_w``."""
    vals = [float(np.linalg.norm(b, 2)) if b.size else 0.0 for b in T.blocks]
    return StoneElement._real(T.domain.base, vals)


def hs_inner(A: ModuleHom, B: ModuleHom) -> StoneElement:
    """Fiberwise Frobenius inner product ``tr(B_w^* A_w)``."""
    A._check_same(B)
    return StoneElement(A.domain.base, [np.vdot(b, a) for a, b in zip(A.blocks, B.blocks)])


def hs_norm(A: ModuleHom) -> StoneElement:
    return StoneElement._real(A.domain.base, [np.linalg.norm(a) for a in A.blocks])


def rank_one(y: KhVector, z: KhVector) -> ModuleHom:
    """``A_{y,z}: x -> (x|z) y``."""
    if y.shape.base != z.shape.base:
        raise BaseMismatch("vectors live on different bases")
    return ModuleHom(z.shape, y.shape, [np.outer(a, b.conj()) for a, b in zip(y.fibers, z.fibers)])


def projection_onto(basis: Sequence[KhVector], shape: KhModuleShape | None = None) -> ModuleHom:
    """Orthogonal projection ``sum_e A_{e,e}`` onto the span of a suborthonormal family."""
    if shape is None:
        if not basis:
            raise ValueError("shape is required for an empty family")
        shape = basis[0].shape
    P = ModuleHom.zeros(shape)
    for e in basis:
        P = P + rank_one(e, e)
    return P


def tensor_to_hs(pairs: Sequence[tuple[KhVector, KhVector]],
                 domain: KhModuleShape | None = None,
                 codomain: KhModuleShape | None = None) -> ModuleHom:
    """``V(sum_i y_i (x) conj(z_i)) = sum_i A_{y_i, z_i}``."""
    if not pairs:
        if domain is None:
            raise ValueError("shapes are required for an empty pair list")
        return ModuleHom.zeros(domain, codomain)
    y0, z0 = pairs[0]
    out = ModuleHom.zeros(z0.shape, y0.shape)
    for y, z in pairs:
        if y.shape != y0.shape or z.shape != z0.shape:
            raise ShapeMismatch("inconsistent shapes in pair list")
        out = out + rank_one(y, z)
    return out


def hs_to_tensor(A: ModuleHom, tol: float = DEFAULT_TOL) -> list[tuple[KhVector, KhVector]]:
    """Minimal pair list reproducing ``A`` from fiberwise SVDs truncated at ``tol``.

    The i-th pair carries ``s_i u_i`` and ``v_i`` at every point whose block has
    an i-th singular value above ``tol``.
    """
    svds = []
    for b in A.blocks:
        if b.size == 0:
            svds.append((np.zeros((b.shape[0], 0)), np.zeros(0), np.zeros((0, b.shape[1]))))
            continue
        u, s, vh = np.linalg.svd(b, full_matrices=False)
        r = int(np.sum(s > tol))
        svds.append((u[:, :r], s[:r], vh[:r]))
    n = max((len(s) for _, s, _ in svds), default=0)
    pairs = []
    for i in range(n):
        ys, zs = [], []
        for (u, s, vh), m, k in zip(svds, A.codomain.dims, A.domain.dims):
            if len(s) > i:
                ys.append(s[i] * u[:, i])
                zs.append(vh[i].conj())
            else:
                ys.append(np.zeros(m, dtype=complex))
                zs.append(np.zeros(k, dtype=complex))
        pairs.append((KhVector(A.codomain, ys), KhVector(A.domain, zs)))
    return pairs


def tensor_inner(u: Sequence[tuple[KhVector, KhVector]],
                 v: Sequence[tuple[KhVector, KhVector]]) -> StoneElement:
    """Inner product of ``sum y_i (x) conj(z_i)`` and ``sum y'_j (x) conj(z'_j)``.

    Uses ``(y (x) conj z | y' (x) conj z') = (y|y') (z'|z)``.
    """
    if not u or not v:
        base = (u or v)[0][0].shape.base if (u or v) else None
        if base is None:
            raise ValueError("cannot infer base from two empty lists")
        return StoneElement.constant(base, 0.0)
    total = StoneElement.constant(u[0][0].shape.base, 0.0)
    for y, z in u:
        for y2, z2 in v:
            total = total + inner_product(y, y2) * inner_product(z2, z)
    return total


def lattice_norm_of_image(T: ModuleHom, x: KhVector) -> StoneElement:
    return lattice_norm(apply(T, x))


class HsElement:
    """A homomorphism viewed as an element of the KH-module ``HS(E; F)``.

    In finite dimensions every homomorphism is Hilbert-Schmidt; the wrapper
    only caches ``|A|_HS`` and supplies the module operations.
    """

    __slots__ = ("hom", "hs_abs")

    def __init__(self, hom: ModuleHom):
        self.hom = hom
        self.hs_abs = hs_norm(hom)

    def __add__(self, other: "HsElement") -> "HsElement":
        return HsElement(self.hom + other.hom)

    def __mul__(self, c) -> "HsElement":
        return HsElement(self.hom * c)

    __rmul__ = __mul__

    def inner(self, other: "HsElement") -> StoneElement:
        return hs_inner(self.hom, other.hom)
