"""Small test systems: named examples and seeded random families."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .gsystem import BaseAction, GSystem, intertwiner_basis
from .homs import ModuleHom, adjoint
from .khmod import KhModuleShape
from .measure import FiniteExtension, FiniteProbSpace, MpSystem
from .stone import BaseSet


def _space(atoms, masses, exact):
    return FiniteProbSpace(atoms, masses if exact else [float(m) for m in masses], exact=exact)


def skew_torus(n: int, exact: bool = True) -> FiniteExtension:
    """``T(y, z) = (y + 1, z + y)`` on ``Z_n x Z_n`` over the rotation on ``Z_n``."""
    if n < 1:
        raise ValueError("n must be positive")
    top_atoms = [f"{y},{z}" for y in range(n) for z in range(n)]
    perm = [((y + 1) % n) * n + (z + y) % n for y in range(n) for z in range(n)]
    X = _space(top_atoms, [Fraction(1, n * n)] * (n * n), exact)
    Y = _space([str(y) for y in range(n)], [Fraction(1, n)] * n, exact)
    top = MpSystem(X, {"T": perm}, "Z")
    bottom = MpSystem(Y, {"T": [(y + 1) % n for y in range(n)]}, "Z")
    return FiniteExtension(top, bottom, [y for y in range(n) for _ in range(n)])


def identity_extension(n: int = 3, exact: bool = True) -> FiniteExtension:
    """The rotation on ``Z_n`` as an extension of itself."""
    Y = _space([str(y) for y in range(n)], [Fraction(1, n)] * n, exact)
    rot = [(y + 1) % n for y in range(n)]
    sys = MpSystem(Y, {"T": rot}, "Z")
    return FiniteExtension(sys, sys, list(range(n)))


def four_two_extension(exact: bool = True) -> FiniteExtension:
    """Four uniform atoms over two, with an order-4 map over the swap."""
    X = _space(["x0", "x1", "x2", "x3"], [Fraction(1, 4)] * 4, exact)
    Y = _space(["a", "b"], [Fraction(1, 2)] * 2, exact)
    top = MpSystem(X, {"T": [2, 3, 1, 0]}, "Z")
    bottom = MpSystem(Y, {"T": [1, 0]}, "Z")
    return FiniteExtension(top, bottom, [0, 0, 1, 1])


def random_extension(seed: int, exact: bool = True, max_bottom: int = 4,
                     max_fiber: int = 3, n_generators: int | None = None,
                     trivial_prob: float = 0.2) -> FiniteExtension:
    """A seeded random finite extension.

    The bottom is uniform on at most ``max_bottom`` atoms with random
    permutations. On each orbit of the bottom action all fibers share one
    size and one local mass pattern (with deliberate repeats); the top
    generators move each fiber onto the fiber of the image point by a random
    permutation that only mixes atoms of equal mass. With probability
    ``trivial_prob`` every fiber has a single atom, so isomorphic extensions
    occur in the family.
    """
    rng = np.random.default_rng(seed)
    ny = int(rng.integers(1, max_bottom + 1))
    ng = int(rng.integers(1, 3)) if n_generators is None else n_generators
    names = ["T"] if ng == 1 else [f"T{k}" for k in range(ng)]
    psi = {t: rng.permutation(ny) for t in names}
    action = BaseAction(BaseSet([f"y{k}" for k in range(ny)]), psi)
    trivial = rng.random() < trivial_prob
    patterns = {}
    for orbit in action.orbits():
        k = 1 if trivial else int(rng.integers(1, max_fiber + 1))
        w = rng.integers(1, 3, size=k)
        for y in orbit:
            patterns[y] = w
    top_atoms, masses, factor, start = [], [], [], {}
    for y in range(ny):
        w = patterns[y]
        start[y] = len(top_atoms)
        for j, wj in enumerate(w):
            top_atoms.append(f"y{y}.{j}")
            masses.append(Fraction(int(wj), int(w.sum()) * ny))
            factor.append(y)
    phi = {}
    for t in names:
        perm = np.empty(len(top_atoms), dtype=int)
        for y in range(ny):
            w = patterns[y]
            local = np.arange(len(w))
            for val in np.unique(w):
                idx = np.nonzero(w == val)[0]
                local[idx] = rng.permutation(idx)
            ty = int(psi[t][y])
            for j in range(len(w)):
                perm[start[y] + j] = start[ty] + local[j]
        phi[t] = perm
    kind = "Z" if ng == 1 else "free"
    X = _space(top_atoms, masses, exact)
    Y = _space([f"y{k}" for k in range(ny)], [Fraction(1, ny)] * ny, exact)
    return FiniteExtension(MpSystem(X, phi, kind), MpSystem(Y, psi, kind), factor)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR with phase correction."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def _structured_unitary(d, rng, style):
    if style == "identity":
        return np.eye(d, dtype=complex)
    if style == "permutation":
        return np.eye(d, dtype=complex)[rng.permutation(d)]
    if style == "diagonal":
        return np.diag(np.exp(2j * np.pi * rng.integers(0, 4, size=d) / 4))
    return random_unitary(d, rng)


def random_gsystem(seed: int, max_points: int = 6, max_dim: int = 3,
                   n_generators: int | None = None) -> GSystem:
    """A seeded random KH-dynamical system.

    Fiber dimensions are constant on base orbits. Each orbit picks one style
    of fiber unitaries (Haar, identity, permutation or diagonal phases), so
    commutants range from scalars to full matrix algebras.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_points + 1))
    ng = int(rng.integers(1, 3)) if n_generators is None else n_generators
    names = ["t"] if ng == 1 else [f"t{k}" for k in range(ng)]
    base = BaseSet([f"w{k}" for k in range(n)])
    action = BaseAction(base, {t: rng.permutation(n) for t in names}, "Z" if ng == 1 else "free")
    dims = [0] * n
    styles = {}
    for orbit in action.orbits():
        d = int(rng.integers(0, max_dim + 1))
        style = ["haar", "identity", "permutation", "diagonal"][int(rng.integers(0, 4))]
        for w in orbit:
            dims[w] = d
            styles[w] = style
    shape = KhModuleShape(base, dims)
    us = {t: [_structured_unitary(dims[w], rng, styles[w]) for w in range(n)] for t in names}
    return GSystem(action, shape, us)


def random_intertwiner(sys: GSystem, rng: np.random.Generator, hermitian: bool = True,
                       basis: list[ModuleHom] | None = None) -> ModuleHom:
    """A random element of the commutant, optionally made self-adjoint."""
    basis = intertwiner_basis(sys) if basis is None else basis
    A = ModuleHom.zeros(sys.shape)
    for B in basis:
        A = A + B * complex(rng.standard_normal() + 1j * rng.standard_normal())
    if hermitian:
        A = (A + adjoint(A)) * 0.5
    return A
