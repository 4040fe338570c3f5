"""Finite measure-preserving systems, extensions, couplings and joinings.

Functions on a finite probability space are plain arrays indexed by atoms.
Generators act on atoms by permutations ``phi_t`` and on functions by the
Koopman operator ``T_t f = f o phi_t^{-1}``. An extension is given by a
factor map ``pi: X -> Y`` that is equivariant and pushes ``mu_X`` to
``mu_Y``; its Markov embedding is ``J g = g o pi`` and ``E_Y = J^*`` is the
fiberwise weighted average.

Masses are floats by default. With ``exact=True`` they are kept as
:class:`fractions.Fraction` and every identity in this module holds with
``==`` on object arrays of fractions.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .errors import (BottomMismatch, EquivarianceViolation, InvalidMarkov,
                     ValidationError)
from .gsystem import BaseAction, GSystem
from .homs import ModuleHom
from .khmod import KhModuleShape, KhVector
from .stone import BaseSet

MASS_TOL = 1e-12


def as_fraction(v) -> Fraction:
    """Exact value of an int, a fraction, an ``"a/b"`` string or a decimal float."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, str):
        return Fraction(v.strip())
    return Fraction(repr(float(v)))


class FiniteProbSpace:
    """Ordered atoms with positive masses summing to one."""

    def __init__(self, atoms: Sequence[str], masses: Sequence, exact: bool = False):
        atoms = tuple(atoms)
        if len(set(atoms)) != len(atoms) or not atoms:
            raise ValidationError("atoms", "atom labels must be unique and non-empty")
        if len(masses) != len(atoms):
            raise ValidationError("atoms", "one mass per atom is required")
        if exact:
            ms = tuple(as_fraction(m) for m in masses)
            total = sum(ms, Fraction(0))
            if total != 1:
                raise ValidationError("mass sum", f"masses sum to {total}, not 1")
        else:
            ms = tuple(float(m) if not isinstance(m, str) else float(Fraction(m)) for m in masses)
            total = sum(ms)
            if abs(total - 1.0) > MASS_TOL:
                raise ValidationError("mass sum", f"masses sum to {total!r}, not 1")
        for a, m in zip(atoms, ms):
            if m <= MASS_TOL:
                raise ValidationError("positive mass", f"atom {a!r} has mass {m}")
        self.atoms = atoms
        self.masses = ms
        self.exact = exact
        self.p = np.array([float(m) for m in ms])
        self._index = {a: i for i, a in enumerate(atoms)}

    def __len__(self):
        return len(self.atoms)

    def __eq__(self, other):
        return (isinstance(other, FiniteProbSpace) and self.atoms == other.atoms
                and all(_mass_eq(a, b) for a, b in zip(self.masses, other.masses)))

    def __repr__(self):
        return f"FiniteProbSpace({len(self.atoms)} atoms)"

    def index(self, label: str) -> int:
        return self._index[label]

    def mass_array(self) -> np.ndarray:
        """Masses as float array, or as an object array of fractions in exact mode."""
        if self.exact:
            return np.array(self.masses, dtype=object)
        return self.p.copy()

    def integral(self, f):
        return sum((m * v for m, v in zip(self.masses, f)), Fraction(0) if self.exact else 0.0)

    def inner(self, f, g):
        """``<f, g> = sum mu(x) f(x) conj(g(x))``."""
        return self.integral([a * np.conj(b) if not isinstance(b, Fraction) else a * b
                              for a, b in zip(f, g)])


def _mass_eq(a, b) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(float(a) - float(b)) <= MASS_TOL


def _inverse_perm(p: np.ndarray) -> np.ndarray:
    inv = np.empty_like(p)
    inv[p] = np.arange(len(p))
    return inv


class MpSystem:
    """A finite probability space with named measure-preserving permutations.

    ``generators[t][i]`` is the index of ``phi_t(atoms[i])``.
    """

    def __init__(self, space: FiniteProbSpace, generators: Mapping[str, Sequence[int]],
                 group_kind: str = "free"):
        gens = {}
        for name, perm in generators.items():
            p = np.asarray(perm, dtype=int)
            if p.shape != (len(space),) or sorted(p.tolist()) != list(range(len(space))):
                raise ValidationError("bijection", f"generator {name!r} is not a permutation")
            for i, j in enumerate(p):
                if not _mass_eq(space.masses[i], space.masses[j]):
                    raise ValidationError(
                        "measure preservation",
                        f"generator {name!r} maps {space.atoms[i]!r} to {space.atoms[j]!r}")
            p.setflags(write=False)
            gens[name] = p
        if group_kind == "Z" and len(gens) != 1:
            raise ValidationError("group", "a Z-action has exactly one generator")
        self.space = space
        self.generators = gens
        self.group_kind = group_kind

    def koopman(self, name: str, f, inverse: bool = False) -> np.ndarray:
        """``T_t f = f o phi_t^{-1}`` (or ``f o phi_t`` for the inverse)."""
        p = self.generators[name]
        f = np.asarray(f)
        return f[p] if inverse else f[_inverse_perm(p)]

    def koopman_matrix(self, name: str) -> np.ndarray:
        p = self.generators[name]
        K = np.zeros((len(p), len(p)))
        K[p, np.arange(len(p))] = 1.0
        return K

    def base_action(self) -> BaseAction:
        return BaseAction(BaseSet(self.space.atoms), self.generators, self.group_kind)

    def orbits(self) -> list[list[int]]:
        return self.base_action().orbits()


def same_system(a: MpSystem, b: MpSystem) -> bool:
    return (a.space == b.space and set(a.generators) == set(b.generators)
            and all(np.array_equal(a.generators[t], b.generators[t]) for t in a.generators))


class FiniteExtension:
    """An extension ``J: (Y; S) -> (X; T)`` given by a factor map ``pi: X -> Y``.

    Parameters
    ----------
    top, bottom : MpSystem
        Systems on ``X`` and ``Y`` with the same generator names.
    factor : sequence of int
        ``factor[i]`` is the index of ``pi(x_i)`` in the bottom space.
    """

    def __init__(self, top: MpSystem, bottom: MpSystem, factor: Sequence[int]):
        f = np.asarray(factor, dtype=int)
        X, Y = top.space, bottom.space
        if f.shape != (len(X),) or np.any(f < 0) or np.any(f >= len(Y)):
            raise ValidationError("factor map", "factor map must send every top atom to a bottom atom")
        if set(top.generators) != set(bottom.generators):
            raise ValidationError("equivariance", "top and bottom have different generators")
        fibers = [[] for _ in range(len(Y))]
        for i, y in enumerate(f):
            fibers[y].append(i)
        for y, fib in enumerate(fibers):
            if not fib:
                raise ValidationError("pushforward", f"empty fiber over {Y.atoms[y]!r}")
            push = sum((X.masses[i] for i in fib), Fraction(0) if X.exact else 0.0)
            if not _mass_eq(push, Y.masses[y]):
                raise ValidationError("pushforward",
                                      f"fiber over {Y.atoms[y]!r} has mass {push}, expected {Y.masses[y]}")
        for t, p in top.generators.items():
            q = bottom.generators[t]
            bad = np.nonzero(f[p] != q[f])[0]
            if bad.size:
                raise ValidationError("equivariance",
                                      f"generator {t!r} at atom {X.atoms[int(bad[0])]!r}")
        f.setflags(write=False)
        self.top = top
        self.bottom = bottom
        self.factor = f
        self.fibers = [tuple(fib) for fib in fibers]

    @property
    def exact(self) -> bool:
        return self.top.space.exact

    @property
    def generator_names(self) -> list[str]:
        return list(self.top.generators)

    def embed(self, g) -> np.ndarray:
        """``J g = g o pi``."""
        return np.asarray(g)[self.factor]

    def is_isomorphism(self) -> bool:
        return all(len(fib) == 1 for fib in self.fibers)


def conditional_expectation(ext: FiniteExtension, f) -> np.ndarray:
    """``(E_Y f)(y) = sum_{x in pi^-1 y} mu(x) f(x) / mu(y)``."""
    X, Y = ext.top.space, ext.bottom.space
    f = np.asarray(f)
    exact = X.exact and f.dtype == object
    out = []
    for y, fib in enumerate(ext.fibers):
        s = sum((X.masses[i] * f[i] for i in fib), Fraction(0) if exact else 0.0)
        out.append(s / Y.masses[y])
    return np.array(out, dtype=object if exact else (complex if np.iscomplexobj(f) else float))


class ConditionalModule:
    """``L^2(X|Y)`` as a KH-module over ``C(Y)`` with its Koopman dynamics.

    The fiber over ``y`` holds functions on ``pi^-1(y)`` with the inner product
    ``<u, v>_y = sum_x (mu(x)/mu(y)) u(x) conj(v(x))``. Coordinates are taken
    in the orthonormal basis ``sqrt(mu(y)/mu(x)) 1_x``, so a function ``f``
    has coordinates ``sqrt(mu(x)/mu(y)) f(x)``.

    Attributes
    ----------
    shape : KhModuleShape
    system : GSystem
        Koopman dynamics; the fiber unitaries are permutation matrices.
    """

    def __init__(self, ext: FiniteExtension):
        X, Y = ext.top.space, ext.bottom.space
        base = BaseSet(Y.atoms)
        self.ext = ext
        self.shape = KhModuleShape(base, [len(fib) for fib in ext.fibers])
        self.position = np.zeros(len(X), dtype=int)
        for fib in ext.fibers:
            for k, i in enumerate(fib):
                self.position[i] = k
        self.weights = np.array([np.sqrt(X.p[i] / Y.p[ext.factor[i]]) for i in range(len(X))])
        unitaries = {}
        for t, p in ext.top.generators.items():
            q = ext.bottom.generators[t]
            mats = []
            for y, fib in enumerate(ext.fibers):
                d = len(fib)
                U = np.zeros((d, d))
                for i in fib:
                    U[self.position[p[i]], self.position[i]] = 1.0
                mats.append(U)
                assert len(ext.fibers[q[y]]) == d
            unitaries[t] = mats
        action = BaseAction(base, ext.bottom.generators, ext.bottom.group_kind)
        self.system = GSystem(action, self.shape, unitaries)

    def __iter__(self):
        return iter((self.shape, self.system, self))

    def to_vector(self, f) -> KhVector:
        f = np.asarray(f, dtype=complex)
        c = self.weights * f
        return KhVector(self.shape, [c[list(fib)] for fib in self.ext.fibers])

    def to_function(self, x: KhVector) -> np.ndarray:
        out = np.zeros(len(self.ext.top.space), dtype=complex)
        for fib, v in zip(self.ext.fibers, x.fibers):
            for i, c in zip(fib, v):
                out[i] = c / self.weights[i]
        return out

    def indicator(self, i: int) -> KhVector:
        f = np.zeros(len(self.ext.top.space))
        f[i] = 1.0
        return self.to_vector(f)


def conditional_module(ext: FiniteExtension) -> ConditionalModule:
    return ConditionalModule(ext)


class MarkovOperator:
    """A Markov operator ``P: L^1(X) -> L^1(X')`` acting on functions.

    ``matrix[j, i]`` is ``P[x'_j, x_i]`` and ``(Pf)(x') = sum_x P[x', x] f(x)``.
    Rows sum to one (``P 1 = 1``) and ``sum_{x'} mu'(x') P[x', x] = mu(x)``
    (``P' mu' = mu``).
    """

    def __init__(self, source: FiniteProbSpace, target: FiniteProbSpace, matrix, tol: float = 1e-12):
        exact = source.exact and target.exact
        if exact:
            M = np.array([[as_fraction(v) for v in row] for row in matrix], dtype=object)
        else:
            M = np.array(matrix, dtype=float)
        if M.shape != (len(target), len(source)):
            raise InvalidMarkov(f"matrix shape {M.shape} does not match spaces")
        zero = Fraction(0) if exact else -tol
        if any(v < zero for v in M.ravel()):
            raise InvalidMarkov("negative entry")
        for j in range(M.shape[0]):
            s = sum(M[j], Fraction(0) if exact else 0.0)
            if (s != 1) if exact else abs(s - 1.0) > tol:
                raise InvalidMarkov(f"row {target.atoms[j]!r} does not sum to 1")
        for i in range(M.shape[1]):
            s = sum((target.masses[j] * M[j, i] for j in range(M.shape[0])),
                    Fraction(0) if exact else 0.0)
            if (s != source.masses[i]) if exact else abs(s - source.masses[i]) > tol:
                raise InvalidMarkov(f"P' mu' differs from mu at {source.atoms[i]!r}")
        self.source = source
        self.target = target
        self.matrix = M
        self.exact = exact

    def __call__(self, f):
        return self.matrix.dot(np.asarray(f, dtype=self.matrix.dtype))


class Coupling:
    """A probability space ``Z`` with embeddings of ``X`` and ``X'``.

    ``left[k]`` and ``right[k]`` are the indices of the ``X`` and ``X'``
    coordinates of atom ``k`` of ``Z``.
    """

    def __init__(self, space: FiniteProbSpace, left, right,
                 source: FiniteProbSpace, target: FiniteProbSpace):
        self.space = space
        self.left = np.asarray(left, dtype=int)
        self.right = np.asarray(right, dtype=int)
        self.source = source
        self.target = target

    def embed_left(self, f) -> np.ndarray:
        return np.asarray(f)[self.left]

    def embed_right(self, g) -> np.ndarray:
        return np.asarray(g)[self.right]

    def _marginal(self, idx, n):
        out = [Fraction(0) if self.space.exact else 0.0 for _ in range(n)]
        for k, i in enumerate(idx):
            out[i] += self.space.masses[k]
        return out

    def left_marginal(self) -> list:
        return self._marginal(self.left, len(self.source))

    def right_marginal(self) -> list:
        return self._marginal(self.right, len(self.target))

    def expect_right(self, h) -> np.ndarray:
        """``E_{X'} h`` for a function ``h`` on ``Z``."""
        exact = self.space.exact
        h = np.asarray(h)
        out = [Fraction(0) if exact else 0.0 for _ in range(len(self.target))]
        for k, j in enumerate(self.right):
            out[j] += self.space.masses[k] * h[k]
        return np.array([v / m for v, m in zip(out, self.target.masses)],
                        dtype=object if exact else h.dtype)

    def recovered_operator(self) -> np.ndarray:
        """Matrix of ``E_{X'} o I_X``, to compare with the input Markov operator."""
        exact = self.space.exact
        n = len(self.source)
        cols = []
        for i in range(n):
            e = np.array([Fraction(int(k == i)) if exact else float(k == i) for k in range(n)],
                         dtype=object if exact else float)
            cols.append(self.expect_right(self.embed_left(e)))
        return np.stack(cols, axis=1)

    def pair_masses(self) -> dict:
        """Pushforward of ``mu_Z`` to ``X x X'``."""
        out: dict = {}
        for k, (i, j) in enumerate(zip(self.left, self.right)):
            out[(int(i), int(j))] = out.get((int(i), int(j)), 0) + self.space.masses[k]
        return out


def coupling_from_markov(P: MarkovOperator) -> Coupling:
    """The coupling ``mu_Z(x, x') = mu'(x') P[x', x]`` whose operator is ``P``.

    Pairs of mass zero are not materialized.
    """
    X, Xp = P.source, P.target
    atoms, masses, left, right = [], [], [], []
    for i, j in product(range(len(X)), range(len(Xp))):
        m = Xp.masses[j] * P.matrix[j, i]
        if (m != 0) if P.exact else m > MASS_TOL:
            atoms.append(f"({X.atoms[i]},{Xp.atoms[j]})")
            masses.append(m)
            left.append(i)
            right.append(j)
    if not P.exact:
        s = float(sum(masses))
        masses = [m / s for m in masses]
    Z = FiniteProbSpace(atoms, masses, exact=P.exact)
    return Coupling(Z, left, right, X, Xp)


def couplings_isomorphic(c1: Coupling, c2: Coupling) -> bool:
    """Whether two couplings of the same pair of spaces are isomorphic.

    Both must be generated by their two embeddings (no two atoms share a pair
    of coordinates), and then an isomorphism respecting the embeddings exists
    iff the pushforwards to ``X x X'`` agree.
    """
    if c1.source != c2.source or c1.target != c2.target:
        return False
    for c in (c1, c2):
        pairs = list(zip(c.left.tolist(), c.right.tolist()))
        if len(set(pairs)) != len(pairs):
            return False
    m1, m2 = c1.pair_masses(), c2.pair_masses()
    return set(m1) == set(m2) and all(_mass_eq(m1[k], m2[k]) for k in m1)


def markov_from_extensions(extA: FiniteExtension, extB: FiniteExtension) -> MarkovOperator:
    """``J_{X'} o E_Y``, the Markov operator of the relatively independent joining."""
    X, Xp, Y = extA.top.space, extB.top.space, extA.bottom.space
    exact = X.exact and Xp.exact
    zero = Fraction(0) if exact else 0.0
    M = [[zero] * len(X) for _ in range(len(Xp))]
    for j in range(len(Xp)):
        y = extB.factor[j]
        for i in extA.fibers[y]:
            M[j][i] = X.masses[i] / Y.masses[y]
    return MarkovOperator(X, Xp, M)


def lift_dynamics(coupling: Coupling, P: MarkovOperator,
                  left_gens: Mapping[str, np.ndarray],
                  right_gens: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Lift ``phi_t x phi'_t`` to the coupling when ``R^* P L = P``.

    Here ``L`` and ``R`` are the Koopman operators of one generator on ``X``
    and ``X'``; for permutations the condition is ``P[phi' x', phi x] =
    P[x', x]``. Raises EquivarianceViolation otherwise.
    """
    index = {(int(i), int(j)): k for k, (i, j) in enumerate(zip(coupling.left, coupling.right))}
    out = {}
    for t in left_gens:
        p, q = np.asarray(left_gens[t]), np.asarray(right_gens[t])
        M = P.matrix
        lhs = M[np.ix_(q, p)]
        ok = np.all(lhs == M) if P.exact else np.allclose(lhs.astype(float), M.astype(float),
                                                           rtol=0, atol=1e-12)
        if not ok:
            raise EquivarianceViolation(f"R* P L != P for generator {t!r}")
        perm = np.empty(len(coupling.left), dtype=int)
        for k, (i, j) in enumerate(zip(coupling.left, coupling.right)):
            target = (int(p[i]), int(q[j]))
            if target not in index:
                raise EquivarianceViolation(f"generator {t!r} leaves the coupling support")
            perm[k] = index[target]
        out[t] = perm
    return out


class Joining(FiniteExtension):
    """The relatively independent joining ``X x_Y X'`` as an extension of ``Y``.

    Extra attributes ``left``/``right`` index the two coordinates and
    ``ext_a``/``ext_b`` are the joined extensions.
    """

    def __init__(self, top, bottom, factor, coupling: Coupling, ext_a, ext_b):
        super().__init__(top, bottom, factor)
        self.coupling = coupling
        self.left = coupling.left
        self.right = coupling.right
        self.ext_a = ext_a
        self.ext_b = ext_b

    def tensor(self, f, g) -> np.ndarray:
        """``(f (x) g)(x, x') = f(x) g(x')`` on the joining."""
        return np.asarray(f)[self.left] * np.asarray(g)[self.right]


def rel_indep_joining(extA: FiniteExtension, extB: FiniteExtension) -> Joining:
    """Relatively independent joining of two extensions of the same system."""
    if not same_system(extA.bottom, extB.bottom):
        raise BottomMismatch("extensions have different bottom systems")
    P = markov_from_extensions(extA, extB)
    C = coupling_from_markov(P)
    gens = lift_dynamics(C, P, extA.top.generators, extB.top.generators)
    top = MpSystem(C.space, gens, extA.top.group_kind)
    factor = extA.factor[C.left]
    return Joining(top, extA.bottom, factor, C, extA, extB)


def self_joining(ext: FiniteExtension) -> Joining:
    return rel_indep_joining(ext, ext)


class TensorJoiningIso:
    """The unitary ``W: L^2(X|Y) (x) L^2(X'|Y) -> L^2(X x_Y X'|Y)``.

    Elements of the tensor module are stored through the HS identification:
    ``f (x) g`` has fiber ``c_f c_g^T`` at ``y`` (flattened row-major), where
    ``c_f`` are the coordinates of ``f``. The tensor dynamics are then
    ``U_t (x) U'_t``. The blocks ``W_y`` are assembled by evaluating the
    function-level product ``(J f)(J' g)`` on indicator tensors.
    """

    def __init__(self, extA: FiniteExtension, extB: FiniteExtension):
        if not same_system(extA.bottom, extB.bottom):
            raise BottomMismatch("extensions have different bottom systems")
        self.ma = conditional_module(extA)
        self.mb = conditional_module(extB)
        self.joining = rel_indep_joining(extA, extB)
        self.mz = conditional_module(self.joining)
        base = self.ma.shape.base
        self.tensor_shape = KhModuleShape(base, [a * b for a, b in zip(self.ma.shape.dims,
                                                                          self.mb.shape.dims)])
        us = {t: [np.kron(ua, ub) for ua, ub in zip(self.ma.system.unitaries[t],
                                                    self.mb.system.unitaries[t])]
              for t in self.ma.system.unitaries}
        self.tensor_system = GSystem(self.ma.system.action, self.tensor_shape, us)
        blocks = [np.zeros((dz, dt)) for dz, dt in zip(self.mz.shape.dims, self.tensor_shape.dims)]
        for y, (fa, fb) in enumerate(zip(extA.fibers, extB.fibers)):
            for a, i in enumerate(fa):
                for b, j in enumerate(fb):
                    fi = np.zeros(len(extA.top.space))
                    fi[i] = 1.0
                    gj = np.zeros(len(extB.top.space))
                    gj[j] = 1.0
                    t_in = self.tensor_vector(fi, gj).fibers[y]
                    z_out = self.mz.to_vector(self.joining.tensor(fi, gj)).fibers[y]
                    col = a * len(fb) + b
                    blocks[y][:, col] = (z_out / t_in[col]).real
        self.W = ModuleHom(self.tensor_shape, self.mz.shape, blocks)

    def tensor_vector(self, f, g) -> KhVector:
        ca, cb = self.ma.to_vector(f), self.mb.to_vector(g)
        return KhVector(self.tensor_shape, [np.outer(a, b).reshape(-1)
                                            for a, b in zip(ca.fibers, cb.fibers)])

    def __call__(self, u: KhVector) -> KhVector:
        return self.W(u)

    def isometry_residual(self) -> float:
        """``max_y ||W_y^* W_y - I||``; W is onto, so this also certifies unitarity."""
        r = 0.0
        for b in self.W.blocks:
            if b.size:
                r = max(r, float(np.linalg.norm(b.conj().T @ b - np.eye(b.shape[1]), 2)))
                r = max(r, float(np.linalg.norm(b @ b.conj().T - np.eye(b.shape[0]), 2)))
        return r

    def intertwining_residual(self) -> float:
        """``max_t ||W T_t - T^Z_t W||`` over the generators."""
        r = 0.0
        for t, perm in self.tensor_system.action.generators.items():
            ut = self.tensor_system.unitaries[t]
            uz = self.mz.system.unitaries[t]
            for y, b in enumerate(self.W.blocks):
                if b.size:
                    lhs = self.W.blocks[perm[y]] @ ut[y]
                    rhs = uz[y] @ b
                    r = max(r, float(np.linalg.norm(lhs - rhs, 2)))
        return r


def tensor_joining_iso(extA: FiniteExtension, extB: FiniteExtension) -> TensorJoiningIso:
    return TensorJoiningIso(extA, extB)


def extensions_equivalent(e1: FiniteExtension, e2: FiniteExtension) -> bool:
    """Search for an isomorphism of top systems commuting with the factor maps.

    The search assigns one atom at a time and propagates the assignment
    along the generators, backtracking on conflicts.
    """
    if not same_system(e1.bottom, e2.bottom):
        return False
    X1, X2 = e1.top.space, e2.top.space
    if len(X1) != len(X2) or set(e1.top.generators) != set(e2.top.generators):
        return False
    n = len(X1)
    gens1 = [(e1.top.generators[t], _inverse_perm(e1.top.generators[t])) for t in e1.top.generators]
    gens2 = [(e2.top.generators[t], _inverse_perm(e2.top.generators[t])) for t in e1.top.generators]

    def compatible(i, j):
        return e1.factor[i] == e2.factor[j] and _mass_eq(X1.masses[i], X2.masses[j])

    def undo(assign, used, new):
        for a in new:
            used[assign[a]] = False
            assign[a] = -1

    def propagate(assign, used, i, j):
        stack = [(i, j)]
        new = []
        while stack:
            a, b = stack.pop()
            if assign[a] >= 0:
                if assign[a] != b:
                    undo(assign, used, new)
                    return None
                continue
            if used[b] or not compatible(a, b):
                undo(assign, used, new)
                return None
            assign[a] = b
            used[b] = True
            new.append(a)
            for (p1, q1), (p2, q2) in zip(gens1, gens2):
                stack.append((int(p1[a]), int(p2[b])))
                stack.append((int(q1[a]), int(q2[b])))
        return new

    def solve(assign, used):
        free = np.nonzero(assign < 0)[0]
        if not free.size:
            return True
        a = int(free[0])
        for b in range(n):
            if used[b] or not compatible(a, b):
                continue
            new = propagate(assign, used, a, b)
            if new is None:
                continue
            if solve(assign, used):
                return True
            undo(assign, used, new)
        return False

    return solve(np.full(n, -1), np.zeros(n, dtype=bool))
