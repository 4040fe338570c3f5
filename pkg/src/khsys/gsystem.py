"""Covariant unitary group representations on finite KH-modules.

A generator ``t`` acts on the base by a permutation ``sigma_t`` and on the
module by fiber unitaries ``U_{t,w}: H_w -> H_{sigma_t(w)}``:

    (T_t x)_{sigma_t(w)} = U_{t,w} x_w,    (S_t f)(sigma_t(w)) = f(w).

Words are sequences of letters ``"t"`` or ``"t^-1"``; the rightmost letter is
applied first, as in ``T_{ab} = T_a T_b``.

Linear problems (fixed vectors, intertwiners) decouple over the orbits of the
base action, so they are solved orbit by orbit. Every returned basis element
is supported on a single orbit, which makes the family a basis over
``fix(S)`` (functions constant on orbits) and not only over the scalars.
"""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .errors import NotIntertwining, ShapeMismatch, UnknownGenerator, ValidationError
from .homs import ModuleHom, projection_onto
from .khmod import KhModuleShape, KhVector, basis_from_frames, extend_to_basis
from .spectral import SpectralDecomposition, nullspace, spectral_decompose
from .stone import DEFAULT_TOL, BaseSet, StoneElement

GROUP_KINDS = ("free", "Z", "finite-presented-unchecked")


class BaseAction:
    """Named permutations of a finite base set.

    ``generators[name][i]`` is the index of ``sigma_name(points[i])``.
    """

    def __init__(self, base: BaseSet, generators: Mapping[str, Sequence[int]],
                 group_kind: str = "free"):
        if group_kind not in GROUP_KINDS:
            raise ValueError(f"unknown group kind {group_kind!r}")
        if group_kind == "Z" and len(generators) != 1:
            raise ValueError("a Z-action has exactly one generator")
        gens = {}
        for name, perm in generators.items():
            if not name or "^" in name:
                raise ValueError(f"invalid generator name {name!r}")
            p = np.asarray(perm, dtype=int)
            if p.shape != (len(base),) or sorted(p.tolist()) != list(range(len(base))):
                raise ValidationError("bijection", f"generator {name!r} is not a permutation")
            p.setflags(write=False)
            gens[name] = p
        self.base = base
        self.generators = gens
        self.group_kind = group_kind

    @property
    def names(self) -> list[str]:
        return list(self.generators)

    def inverse(self, name: str) -> np.ndarray:
        p = self.generators[name]
        inv = np.empty_like(p)
        inv[p] = np.arange(len(p))
        return inv

    def act(self, name: str, f: StoneElement, inverse: bool = False) -> StoneElement:
        """``S_t f = f o sigma_t^{-1}``."""
        p = self.inverse(name) if not inverse else self.generators[name]
        return f.compose(p)

    def orbits(self) -> list[list[int]]:
        n = len(self.base)
        seen = np.zeros(n, dtype=bool)
        out = []
        for start in range(n):
            if seen[start]:
                continue
            orbit, stack = [], [start]
            seen[start] = True
            while stack:
                i = stack.pop()
                orbit.append(i)
                for p in self.generators.values():
                    for j in (int(p[i]), int(np.where(p == i)[0][0])):
                        if not seen[j]:
                            seen[j] = True
                            stack.append(j)
            out.append(sorted(orbit))
        return out

    def is_fixed(self, f: StoneElement, atol: float = 1e-10) -> bool:
        return all(np.allclose(f.values[p], f.values, rtol=0, atol=atol)
                   for p in self.generators.values())


def parse_word(word) -> list[tuple[str, bool]]:
    """``["a", "b^-1"]`` -> ``[("a", False), ("b", True)]``."""
    if isinstance(word, str):
        word = [w for w in word.split() if w]
    out = []
    for letter in word:
        if isinstance(letter, tuple):
            out.append((letter[0], bool(letter[1])))
        elif letter.endswith("^-1"):
            out.append((letter[:-3], True))
        else:
            out.append((letter, False))
    return out


class GSystem:
    """A KH-dynamical system: base action plus fiber unitaries.

    Parameters
    ----------
    action : BaseAction
    shape : KhModuleShape
        Must live on ``action.base``.
    unitaries : mapping
        ``unitaries[t][w]`` is the matrix ``U_{t,w}`` of shape
        ``(d(sigma_t w), d(w))``.
    tol : float
        Unitarity tolerance checked at construction.
    """

    def __init__(self, action: BaseAction, shape: KhModuleShape,
                 unitaries: Mapping[str, Sequence], tol: float = 1e-8):
        if shape.base != action.base:
            raise ShapeMismatch("module and action live on different bases")
        if set(unitaries) != set(action.generators):
            raise UnknownGenerator("unitaries must be given for exactly the declared generators")
        us = {}
        for name, perm in action.generators.items():
            mats = []
            for w, u in enumerate(unitaries[name]):
                d, d2 = shape.dims[w], shape.dims[perm[w]]
                if d != d2:
                    raise ValidationError("fiber dims", f"generator {name!r} maps dim {d} to {d2}")
                m = np.array(u, dtype=complex).reshape(d, d)
                if d and not np.allclose(m.conj().T @ m, np.eye(d), atol=tol):
                    raise ValidationError("unitarity", f"U[{name!r}] at {shape.base.points[w]!r}")
                m.setflags(write=False)
                mats.append(m)
            if len(mats) != len(shape.dims):
                raise ShapeMismatch(f"generator {name!r} needs one unitary per point")
            us[name] = tuple(mats)
        self.action = action
        self.shape = shape
        self.unitaries = us

    @property
    def base(self) -> BaseSet:
        return self.shape.base

    def _lookup(self, name):
        if name not in self.unitaries:
            raise UnknownGenerator(f"unknown generator {name!r}")
        return self.action.generators[name], self.unitaries[name]

    def apply_generator(self, name: str, x: KhVector, inverse: bool = False) -> KhVector:
        perm, us = self._lookup(name)
        if x.shape != self.shape:
            raise ShapeMismatch("vector does not belong to this module")
        out = [None] * len(perm)
        if not inverse:
            for w, u in enumerate(us):
                out[perm[w]] = u @ x.fibers[w]
        else:
            for w, u in enumerate(us):
                out[w] = u.conj().T @ x.fibers[perm[w]]
        return KhVector(self.shape, out)

    def operator_matrix(self, name: str, inverse: bool = False) -> np.ndarray:
        """Dense matrix of ``T_t`` on the total space."""
        perm, us = self._lookup(name)
        o = self.shape.offsets
        M = np.zeros((self.shape.total_dim,) * 2, dtype=complex)
        for w, u in enumerate(us):
            s = perm[w]
            M[o[s]:o[s + 1], o[w]:o[w + 1]] = u
        return M.conj().T if inverse else M

    def conjugate_by(self, name: str, A: ModuleHom) -> ModuleHom:
        """``T_t A T_t^{-1}``."""
        perm, us = self._lookup(name)
        blocks = [None] * len(perm)
        for w, u in enumerate(us):
            blocks[perm[w]] = u @ A.blocks[w] @ u.conj().T
        return ModuleHom(self.shape, self.shape, blocks)


def apply_group(sys: GSystem, word, x: KhVector) -> KhVector:
    """Apply ``T_word`` to ``x``; the rightmost letter acts first."""
    for name, inv in reversed(parse_word(word)):
        x = sys.apply_generator(name, x, inverse=inv)
    return x


def act_base(action: BaseAction, word, f: StoneElement) -> StoneElement:
    for name, inv in reversed(parse_word(word)):
        if name not in action.generators:
            raise UnknownGenerator(f"unknown generator {name!r}")
        f = action.act(name, f, inverse=inv)
    return f


def orbits(sys: GSystem) -> list[list[int]]:
    return sys.action.orbits()


def _orbit_positions(sys, orbit):
    d = sys.shape.dims[orbit[0]]
    pos = {w: k for k, w in enumerate(orbit)}
    return d, pos


def fixed_submodule(sys: GSystem, tol: float = DEFAULT_TOL) -> list[KhVector]:
    """Suborthonormal basis of ``fix(T)``, one block of vectors per base orbit.

    On an orbit ``O`` the unknowns are the fibers ``x_w`` (``w`` in ``O``) and
    the equations are ``U_{t,w} x_w - x_{sigma_t w} = 0``. Nullspace vectors
    are Euclidean-orthonormal; since ``|x|`` is constant on ``O`` for a fixed
    ``x``, scaling by ``sqrt(|O|)`` makes every lattice norm equal ``1_O``.
    """
    out = []
    for orbit in orbits(sys):
        d, pos = _orbit_positions(sys, orbit)
        if d == 0:
            continue
        n = len(orbit) * d
        rows = []
        for name, perm in sys.action.generators.items():
            us = sys.unitaries[name]
            for w in orbit:
                r = np.zeros((d, n), dtype=complex)
                i, j = pos[w], pos[int(perm[w])]
                r[:, i * d:(i + 1) * d] += us[w]
                r[:, j * d:(j + 1) * d] -= np.eye(d)
                rows.append(r)
        M = np.vstack(rows) if rows else np.zeros((0, n), dtype=complex)
        K = nullspace(M, tol)
        for c in range(K.shape[1]):
            col = K[:, c] * np.sqrt(len(orbit))
            fibers = [np.zeros(k, dtype=complex) for k in sys.shape.dims]
            for w in orbit:
                fibers[w] = col[pos[w] * d:(pos[w] + 1) * d]
            out.append(KhVector(sys.shape, fibers))
    return out


def _commutant_equations(sys: GSystem, orbit) -> np.ndarray:
    """Row-major vectorized ``A_{sigma w} U_w - U_w A_w = 0`` on one orbit."""
    d, pos = _orbit_positions(sys, orbit)
    nb = d * d
    n = len(orbit) * nb
    eye = np.eye(d)
    rows = []
    for name, perm in sys.action.generators.items():
        us = sys.unitaries[name]
        for w in orbit:
            u = us[w]
            r = np.zeros((nb, n), dtype=complex)
            i, j = pos[w], pos[int(perm[w])]
            # vec(M X N) = (M kron N^T) vec(X) for row-major vec
            r[:, j * nb:(j + 1) * nb] += np.kron(eye, u.T)
            r[:, i * nb:(i + 1) * nb] -= np.kron(u, eye)
            rows.append(r)
    return np.vstack(rows) if rows else np.zeros((0, n), dtype=complex)


def intertwiner_basis(sys: GSystem, tol: float = DEFAULT_TOL) -> list[ModuleHom]:
    """Basis of ``HS_T(E)``, the homomorphisms commuting with every ``T_t``.

    Each element is supported on one base orbit; within an orbit block the
    elements are orthonormal for the HS inner product up to the ``1_O``
    normalization, i.e. ``(A_i|A_j)_HS = delta_ij 1_O``. The number of
    elements is the complex dimension of the commutant.
    """
    out = []
    for orbit in orbits(sys):
        d, pos = _orbit_positions(sys, orbit)
        if d == 0:
            continue
        nb = d * d
        K = nullspace(_commutant_equations(sys, orbit), tol)
        for c in range(K.shape[1]):
            col = K[:, c] * np.sqrt(len(orbit))
            blocks = [np.zeros((k, k), dtype=complex) for k in sys.shape.dims]
            for w in orbit:
                blocks[w] = col[pos[w] * nb:(pos[w] + 1) * nb].reshape(d, d)
            out.append(ModuleHom(sys.shape, sys.shape, blocks))
    return out


def equivariance_residuals(sys: GSystem, A: ModuleHom) -> dict[str, float]:
    """``max_w ||(T_t A - A T_t)_w||`` for every generator."""
    res = {}
    for name, perm in sys.action.generators.items():
        us = sys.unitaries[name]
        r = 0.0
        for w, u in enumerate(us):
            if u.size:
                r = max(r, float(np.linalg.norm(A.blocks[perm[w]] @ u - u @ A.blocks[w], 2)))
        res[name] = r
    return res


def _column_frames(sys, homs, tol):
    frames = []
    for w, d in enumerate(sys.shape.dims):
        cols = [A.blocks[w] for A in homs if A.blocks[w].size]
        if d == 0 or not cols:
            frames.append(np.zeros((d, 0), dtype=complex))
            continue
        M = np.hstack(cols)
        u, s, _ = np.linalg.svd(M, full_matrices=False)
        r = int(np.sum(s > tol * max(s[0], 1.0))) if s.size else 0
        frames.append(u[:, :r])
    return frames


def ds_wm_decomposition(sys: GSystem, tol: float = DEFAULT_TOL,
                        intertwiners: list[ModuleHom] | None = None):
    """Split ``E = E_ds + E_wm``.

    ``E_ds`` is the span of the ranges of all intertwiners and ``E_wm`` is
    its orthogonal complement. In finite dimensions the identity intertwines,
    so ``E_wm`` always comes out empty.

    Returns
    -------
    (ds_basis, wm_basis) : tuple of lists of KhVector
    """
    if intertwiners is None:
        intertwiners = intertwiner_basis(sys, tol)
    ds = basis_from_frames(sys.shape, _column_frames(sys, intertwiners, tol))
    full = extend_to_basis(ds, sys.shape, tol)
    return ds, full[len(ds):]


def wm_by_tensor_criterion(sys: GSystem, tol: float = DEFAULT_TOL,
                           intertwiners: list[ModuleHom] | None = None) -> list[KhVector]:
    """Basis of ``{x | x (x) conj(x) is orthogonal to fix(T (x) conj T)}``.

    Through the HS identification the condition reads
    ``(A_{x,x} | A)_HS = conj(x^* A x) = 0`` for every intertwiner ``A``. The
    commutant is a *-algebra, so this holds for all ``A`` iff it holds for
    every ``A^* A``, i.e. iff ``x`` lies in the kernel of ``sum_k A_k^* A_k``.
    """
    if intertwiners is None:
        intertwiners = intertwiner_basis(sys, tol)
    frames = []
    for w, d in enumerate(sys.shape.dims):
        G = np.zeros((d, d), dtype=complex)
        for A in intertwiners:
            G += A.blocks[w].conj().T @ A.blocks[w]
        if d == 0:
            frames.append(np.zeros((0, 0), dtype=complex))
            continue
        w_, v = np.linalg.eigh(G)
        # eigenvalues of G are squared singular values; threshold on that scale
        sv = np.sqrt(np.clip(w_, 0.0, None))
        frames.append(v[:, sv <= tol * max(float(sv.max()), 1.0)])
    return basis_from_frames(sys.shape, frames)


def equivariant_spectral(sys: GSystem, A: ModuleHom, max_terms: int | None = None,
                         tol: float = DEFAULT_TOL) -> SpectralDecomposition:
    """Spectral decomposition of a self-adjoint intertwiner.

    The levels ``lambda_j`` are then ``S``-fixed and every ``P_j^+-`` again
    intertwines; see :func:`spectral_equivariance`.
    """
    res = equivariance_residuals(sys, A)
    worst = max(res.values(), default=0.0)
    if worst > tol * max(1.0, A.norm()):
        raise NotIntertwining(f"commutation residual {worst:.3e} exceeds tolerance")
    return spectral_decompose(A, max_terms=max_terms, tol=tol)


def spectral_equivariance(sys: GSystem, dec: SpectralDecomposition) -> dict[str, float]:
    """Worst ``|lambda_j o sigma_t - lambda_j|`` and ``||[P_j^+-, T_t]||``."""
    lam_res = 0.0
    proj_res = 0.0
    for lam in dec.lambdas:
        for perm in sys.action.generators.values():
            lam_res = max(lam_res, float(np.max(np.abs(lam.values[perm] - lam.values))))
    for P in list(dec.pos_projections) + list(dec.neg_projections):
        proj_res = max(proj_res, max(equivariance_residuals(sys, P).values(), default=0.0))
    return {"lambda_invariance": lam_res, "projection_commutation": proj_res}


def tensor_system(sys: GSystem) -> GSystem:
    """The system ``E (x) conj(E)``, realized on ``HS(E)`` by row-major vec.

    ``T_t`` acts as ``A -> U A U^*``, whose matrix is ``U kron conj(U)``.
    """
    shape = KhModuleShape(sys.base, [d * d for d in sys.shape.dims])
    us = {name: [np.kron(u, u.conj()) for u in mats] for name, mats in sys.unitaries.items()}
    return GSystem(sys.action, shape, us)


def hom_to_tensor_vector(A: ModuleHom) -> KhVector:
    shape = KhModuleShape(A.domain.base, [d * d for d in A.domain.dims])
    return KhVector(shape, [b.reshape(-1) for b in A.blocks])


def tensor_vector_to_hom(x: KhVector, shape: KhModuleShape) -> ModuleHom:
    return ModuleHom(shape, shape, [f.reshape(d, d) for f, d in zip(x.fibers, shape.dims)])


def u_of_family(basis: Sequence[KhVector], shape: KhModuleShape | None = None) -> ModuleHom:
    """``u_B = sum_{e in B} e (x) conj(e)``, as a homomorphism."""
    return projection_onto(list(basis), shape)
