"""Relative Kronecker subspace, weak mixing and towers for finite extensions.

Everything runs on the conditional module ``L^2(X|Y)`` and on the
relatively independent self-joining ``Z = X x_Y X``. Because every fiber of a
finite extension is finite-dimensional, the identity is an intertwiner and
the Kronecker subspace is always all of ``L^2(X)``. The code does not assume
this: it computes the subspace and reports the outcome together with the
cross-checks between its different characterizations.

Two simplifications specific to finite spaces: ``L^infty = L^2`` so no
truncation of fixed functions is ever needed, and every function lies in
``L^2(X|Y)``, so the squared and unsquared Cesaro criteria apply to all ``f``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import EquivarianceViolation, NotCylinder, NotSingleGenerator
from .generators import random_intertwiner
from .gsystem import (ds_wm_decomposition, equivariant_spectral, intertwiner_basis,
                      parse_word, spectral_equivariance, wm_by_tensor_criterion)
from .homs import projection_onto
from .khmod import (KhVector, basis_from_frames, dimension_function, gram_schmidt,
                    homogeneous_components, project_onto)
from .measure import (ConditionalModule, FiniteExtension, FiniteProbSpace, Joining, MpSystem,
                      as_fraction, conditional_expectation, conditional_module, self_joining)
from .spectral import nullspace
from .stone import DEFAULT_TOL

SONS_TOL = 1e-12


# partitions and quotients ---------------------------------------------------

def canonical_partition(labels: Sequence) -> tuple[int, ...]:
    """Renumber block labels by order of first appearance."""
    seen: dict = {}
    return tuple(seen.setdefault(b, len(seen)) for b in labels)


def partition_by_functions(ext: FiniteExtension, functions: Sequence[np.ndarray],
                           tol: float = 1e-8) -> tuple[int, ...]:
    """Common level sets of ``functions`` refined by the factor map.

    Two atoms share a block iff they lie over the same point of ``Y`` and
    every function takes the same value on both (up to ``tol`` times the
    largest modulus of that function). Products and moduli of the functions
    do not split blocks any further, so this is the partition of the unital
    sublattice generated by ``L^infty(Y)`` and the functions.
    """
    n = len(ext.top.space)
    scales = [max(float(np.max(np.abs(f))), 1.0) if len(f) else 1.0 for f in functions]
    block = [-1] * n
    nxt = 0
    for fib in ext.fibers:
        reps: list[int] = []
        for i in fib:
            for r in reps:
                if all(abs(f[i] - f[r]) <= tol * s for f, s in zip(functions, scales)):
                    block[i] = block[r]
                    break
            else:
                block[i] = nxt
                nxt += 1
                reps.append(i)
    return canonical_partition(block)


def quotient_system(system: MpSystem, partition: Sequence[int]) -> MpSystem:
    """Factor of ``system`` whose atoms are the blocks of an invariant partition."""
    X = system.space
    nb = max(partition) + 1
    members = [[] for _ in range(nb)]
    for i, b in enumerate(partition):
        members[b].append(i)
    zero = Fraction(0) if X.exact else 0.0
    masses = [sum((X.masses[i] for i in m), zero) for m in members]
    labels = ["[" + "|".join(X.atoms[i] for i in m) + "]" for m in members]
    gens = {}
    for t, p in system.generators.items():
        perm = np.empty(nb, dtype=int)
        for b, m in enumerate(members):
            images = {partition[int(p[i])] for i in m}
            if len(images) != 1:
                raise EquivarianceViolation(f"partition is not invariant under {t!r}")
            perm[b] = images.pop()
        gens[t] = perm
    return MpSystem(FiniteProbSpace(labels, masses, exact=X.exact), gens, system.group_kind)


def intermediate_factor(ext: FiniteExtension, partition: Sequence[int]):
    """Split ``Y -> X`` through the quotient ``Q`` of ``X`` by ``partition``.

    ``partition`` must refine the fibers of the factor map. Returns the pair
    of extensions ``(Y -> Q, Q -> X)``.
    """
    Q = quotient_system(ext.top, partition)
    nb = len(Q.space)
    to_y = np.empty(nb, dtype=int)
    for i, b in enumerate(partition):
        to_y[b] = ext.factor[i]
    lower = FiniteExtension(Q, ext.bottom, to_y)
    upper = FiniteExtension(ext.top, Q, list(partition))
    return lower, upper


def fiber_partition(ext: FiniteExtension) -> tuple[int, ...]:
    return canonical_partition(ext.factor.tolist())


def discrete_partition(ext: FiniteExtension) -> tuple[int, ...]:
    return tuple(range(len(ext.top.space)))


# joining helpers ------------------------------------------------------------

def joining_orbits(J: Joining) -> list[list[int]]:
    return J.top.orbits()


def koopman_residual(system: MpSystem, f) -> float:
    """``max_t max |T_t f - f|``."""
    f = np.asarray(f)
    return max((float(np.max(np.abs(system.koopman(t, f) - f))) for t in system.generators),
               default=0.0)


def joining_fixed_projection(J: Joining, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Mean ergodic projection onto ``fix(T x_Y T)`` as a dense matrix on functions.

    Computed as the orthogonal projection onto the common nullspace of
    ``K_t - I`` in the coordinates ``sqrt(mu) h`` (where Koopman operators
    are permutation matrices), then conjugated back to plain function values.
    """
    n = len(J.top.space)
    rows = [J.top.koopman_matrix(t) - np.eye(n) for t in J.top.generators]
    M = np.vstack(rows) if rows else np.zeros((0, n))
    K = nullspace(M, tol)
    P = K @ K.conj().T
    s = np.sqrt(J.top.space.p)
    return (P * s[None, :]) / s[:, None]


# Kronecker subspace ---------------------------------------------------------

@dataclass
class KroneckerReport:
    """Outcome of :func:`kronecker_subspace`.

    Attributes
    ----------
    ds_basis, wm_basis : list of KhVector
        Bases of the discrete-spectrum part and its complement in ``L^2(X|Y)``.
    factor : FiniteExtension
        The relative Kronecker factor as an extension ``Y -> Kro``.
    embedding : FiniteExtension
        ``Kro -> X``.
    partition : tuple of int
        Blocks of ``X`` that are the atoms of ``Kro``.
    per_rank_counts : dict
        Number of harvested homogeneous invariant families of each rank.
    families : list of list of KhVector
        The harvested families ``B`` (each with ``u_B`` fixed).
    checks : dict
        Cross-validation results; booleans and residuals.
    """

    ds_basis: list
    wm_basis: list
    factor: FiniteExtension
    embedding: FiniteExtension
    partition: tuple
    per_rank_counts: dict
    families: list
    checks: dict
    module: ConditionalModule = field(repr=False)

    @property
    def is_full(self) -> bool:
        return not self.wm_basis


def _range_basis(P, tol):
    frames = []
    for b in P.blocks:
        if b.size == 0:
            frames.append(np.zeros((b.shape[0], 0), dtype=complex))
            continue
        w, v = np.linalg.eigh((b + b.conj().T) / 2)
        frames.append(v[:, w > 0.5])
    return basis_from_frames(P.domain, frames)


def u_function(J: Joining, cm: ConditionalModule, family: Sequence[KhVector]) -> np.ndarray:
    """``u_B(x, x') = sum_{e in B} e(x) conj(e(x'))`` on the self-joining."""
    u = np.zeros(len(J.top.space), dtype=complex)
    for e in family:
        f = cm.to_function(e)
        u += f[J.left] * np.conj(f[J.right])
    return u


def kronecker_subspace(ext: FiniteExtension, tol: float = DEFAULT_TOL,
                       seed: int = 0) -> KroneckerReport:
    """Compute the relative Kronecker subspace and factor of an extension.

    The subspace is the span of the ranges of all intertwiners of the
    Koopman system on ``L^2(X|Y)``. Independently, a seeded generic
    self-adjoint intertwiner is decomposed spectrally; the ranges of its
    spectral projections split into homogeneous invariant families ``B``
    whose functions ``u_B`` are checked to be fixed by the joining dynamics,
    and whose union must span the same module.

    Parameters
    ----------
    ext : FiniteExtension
    tol : float
        Rank and clustering tolerance.
    seed : int
        Seed for the generic intertwiner.

    Returns
    -------
    KroneckerReport
    """
    cm = conditional_module(ext)
    sys = cm.system
    inter = intertwiner_basis(sys, tol)
    ds, wm = ds_wm_decomposition(sys, tol, intertwiners=inter)
    wm_tensor = wm_by_tensor_criterion(sys, tol, intertwiners=inter)

    rng = np.random.default_rng(seed)
    H = random_intertwiner(sys, rng, hermitian=True, basis=inter)
    dec = equivariant_spectral(sys, H, tol=tol)
    eq = spectral_equivariance(sys, dec)

    J = self_joining(ext)
    families, counts = [], {}
    u_res = 0.0
    sons_res = 0.0
    for P in list(dec.pos_projections) + list(dec.neg_projections):
        basis = _range_basis(P, tol)
        if not basis:
            continue
        for q, slots in homogeneous_components(basis, sys.shape):
            k = len(slots)
            if k == 0:
                continue
            families.append(slots)
            counts[k] = counts.get(k, 0) + 1
            u_res = max(u_res, koopman_residual(J.top, u_function(J, cm, slots)))
            s = sum(np.abs(cm.to_function(e)) ** 2 for e in slots)
            sons_res = max(sons_res, koopman_residual(ext.top, s))

    union = gram_schmidt([e for fam in families for e in fam], tol)
    P1 = projection_onto(ds, sys.shape).dense()
    P4 = projection_onto(union, sys.shape).dense()
    P_wm = projection_onto(wm, sys.shape).dense()
    P_wm_tensor = projection_onto(wm_tensor, sys.shape).dense()

    funcs = [cm.to_function(e) for e in ds]
    one = np.ones(len(ext.top.space))
    one_res = float(np.linalg.norm(cm.to_function(project_onto(cm.to_vector(one), ds)) - one))
    lattice_res = 0.0
    invariance_res = 0.0
    for e, f in zip(ds, funcs):
        a = cm.to_vector(np.abs(f))
        lattice_res = max(lattice_res, (a - project_onto(a, ds)).norm())
        for t in sys.action.generators:
            te = sys.apply_generator(t, e)
            invariance_res = max(invariance_res, (te - project_onto(te, ds)).norm())

    partition = partition_by_functions(ext, funcs)
    factor, embedding = intermediate_factor(ext, partition)
    dims = dimension_function(ds, sys.shape).real if ds else np.zeros(len(sys.shape.dims))

    checks = {
        "wm_empty": not wm,
        "ds_dimension_matches_fibers": bool(np.array_equal(dims, np.array(sys.shape.dims, float))),
        "wm_tensor_criterion_distance": float(np.linalg.norm(P_wm - P_wm_tensor)),
        "characterization_distance": float(np.linalg.norm(P1 - P4)),
        "u_B_fixed_residual": u_res,
        "sons_linfty_residual": sons_res,
        "sons_linfty_passed": sons_res <= SONS_TOL,
        "contains_one_residual": one_res,
        "sublattice_residual": lattice_res,
        "invariance_residual": invariance_res,
        "spectral_residual": dec.residual_norm,
        "lambda_invariance": eq["lambda_invariance"],
        "projection_commutation": eq["projection_commutation"],
        "commutant_dimension": len(inter),
    }
    return KroneckerReport(ds, wm, factor, embedding, partition, dict(sorted(counts.items())),
                           families, checks, cm)


# orthogonality criteria -----------------------------------------------------

def _l2_y(ext, h):
    Y = ext.bottom.space
    return float(np.sqrt(np.sum(Y.p * np.abs(h) ** 2)))


def _sup(h):
    return float(np.max(np.abs(h))) if len(h) else 0.0


def orthogonality_criteria(ext: FiniteExtension, f, F: Sequence[np.ndarray] | None = None,
                           max_word_length: int = 3, tol: float = DEFAULT_TOL,
                           report: KroneckerReport | None = None) -> dict:
    """Evaluate the five equivalent tests for ``f`` orthogonal to the Kronecker subspace.

    Each entry carries the numerical value of the test and the verdict
    ``orthogonal = value <= tol``:

    ``a``  norm of the projection of ``f`` onto the Kronecker subspace;
    ``b``  ``max_O sup |E_Y((f (x) conj f) 1_O)|`` over orbits ``O`` of the self-joining;
    ``c``  ``max_O |<f (x) conj f, 1_O>|``;
    ``d``  ``||P(f (x) conj f)||_1`` with ``P`` the mean ergodic projection of the joining;
    ``e``  ``min_w max_{g in F} ||E_Y((T_w f) g)||_2`` over words of length at most
           ``max_word_length``; ``F`` defaults to the atom indicators.
    """
    f = np.asarray(f, dtype=complex)
    rep = kronecker_subspace(ext, tol) if report is None else report
    cm = rep.module
    X = ext.top.space
    proj = cm.to_function(project_onto(cm.to_vector(f), rep.ds_basis))
    a = float(np.sqrt(np.sum(X.p * np.abs(proj) ** 2)))

    J = self_joining(ext)
    ff = f[J.left] * np.conj(f[J.right])
    orbs = joining_orbits(J)
    b_vals, c_vals = [], []
    for O in orbs:
        ind = np.zeros(len(J.top.space))
        ind[O] = 1.0
        b_vals.append(_sup(conditional_expectation(J, ff * ind)))
        c_vals.append(float(abs(J.top.space.integral(ff * ind))))
    b = max(b_vals, default=0.0)
    c = max(c_vals, default=0.0)
    Pz = joining_fixed_projection(J, tol)
    d = float(np.sum(J.top.space.p * np.abs(Pz @ ff)))

    if F is None:
        F = [np.eye(len(X))[i] for i in range(len(X))]
    words = _words(list(ext.top.generators), max_word_length)
    e = np.inf
    for w in words:
        tf = _apply_word(ext.top, w, f)
        val = max((_l2_y(ext, conditional_expectation(ext, tf * g)) for g in F), default=0.0)
        e = min(e, val)
    e = float(e)
    out = {}
    for key, val in zip("abcde", (a, b, c, d, e)):
        out[key] = {"value": float(val), "orthogonal": bool(val <= tol)}
    verdicts = {v["orthogonal"] for v in out.values()}
    out["agree"] = len(verdicts) == 1
    out["exact_pairing"] = float(np.real(np.vdot(ff, J.top.space.p * (Pz @ ff))))
    return out


def _words(names, L):
    words = [[]]
    frontier = [[]]
    letters = names + [n + "^-1" for n in names]
    for _ in range(L):
        nxt = []
        for w in frontier:
            for a in letters:
                if w and (a == w[0] + "^-1" or w[0] == a + "^-1"):
                    continue
                nxt.append([a] + w)
        words.extend(nxt)
        frontier = nxt
    return words


def _apply_word(system: MpSystem, word, f):
    for name, inv in reversed(parse_word(word)):
        f = system.koopman(name, f, inverse=inv)
    return f


# Folner diagnostics ---------------------------------------------------------

def _single_generator(ext):
    if len(ext.top.generators) != 1:
        raise NotSingleGenerator("the Folner diagnostic needs a single-generator action")
    return next(iter(ext.top.generators))


def permutation_order(p: np.ndarray) -> int:
    """Order of a permutation (lcm of its cycle lengths)."""
    n = len(p)
    seen = np.zeros(n, dtype=bool)
    order = 1
    for s in range(n):
        if seen[s]:
            continue
        k, i = 0, s
        while not seen[i]:
            seen[i] = True
            i = int(p[i])
            k += 1
        order = int(np.lcm(order, k))
    return order


def folner_diagnostic(ext: FiniteExtension, f, g, N_max: int, tol: float = DEFAULT_TOL) -> dict:
    """Cesaro curves along ``N_k = {0, ..., k-1}`` and their exact limits.

    ``curve[k-1] = int_Y (1/k) sum_{n<k} |E_Y((T^n f) conj g)|^2`` for
    ``k = 1..N_max``. The exact limit is ``<P(f (x) conj f), g (x) conj g>``
    on the self-joining, computed with the dense mean ergodic projection and
    independently from orbit indicators. The curves ``g_curve`` and
    ``h_curve`` are the unsquared and squared self-correlation averages
    ``int_Y (1/k) sum |E_Y((T^n f) conj f)|`` and ``...|^2``; their limits are
    the means over one period of the generator.
    """
    t = _single_generator(ext)
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    Y = ext.bottom.space
    p = permutation_order(ext.top.generators[t])
    n_seq = max(N_max, p)
    seq_f, seq_g, seq_h = [], [], []
    tf = f
    for _ in range(n_seq):
        cf = conditional_expectation(ext, tf * np.conj(g))
        cs = conditional_expectation(ext, tf * np.conj(f))
        seq_f.append(float(np.sum(Y.p * np.abs(cf) ** 2)))
        seq_g.append(float(np.sum(Y.p * np.abs(cs))))
        seq_h.append(float(np.sum(Y.p * np.abs(cs) ** 2)))
        tf = ext.top.koopman(t, tf)

    def curve(seq):
        return (np.cumsum(seq[:N_max]) / np.arange(1, N_max + 1)).tolist()

    J = self_joining(ext)
    ff = f[J.left] * np.conj(f[J.right])
    gg = g[J.left] * np.conj(g[J.right])
    Pz = joining_fixed_projection(J, tol)
    mz = J.top.space.p
    limit = float(np.real(np.vdot(gg, mz * (Pz @ ff))))
    limit_orbit = 0.0
    for O in joining_orbits(J):
        mO = float(np.sum(mz[O]))
        limit_orbit += float(np.real(np.sum(mz[O] * ff[O]) * np.conj(np.sum(mz[O] * gg[O])))) / mO
    return {
        "order": p,
        "curve": curve(seq_f),
        "limit": limit,
        "limit_orbit": limit_orbit,
        "curve_at_order": float(np.mean(seq_f[:p])),
        "g_curve": curve(seq_g),
        "g_limit": float(np.mean(seq_g[:p])),
        "h_curve": curve(seq_h),
        "h_limit": float(np.mean(seq_h[:p])),
    }


# weak mixing and towers -----------------------------------------------------

def is_weakly_mixing(ext: FiniteExtension) -> tuple[bool, dict]:
    """Decide weak mixing by comparing ``fix(T x_Y T)`` with the lift of ``fix(S)``.

    Both are spanned by orbit indicators, and the lift is injective, so the
    extension is weakly mixing iff the self-joining has as many orbits as
    ``Y``. When it is not, the witness is ``u_B`` for ``B`` the fiberwise
    orthonormal basis of ``L^2(X|Y)``, i.e. ``u_B(x, x') = delta_{xx'}
    mu(y)/mu(x)``: a fixed function that is not constant on fibers of ``Z -> Y``.
    """
    J = self_joining(ext)
    nz = len(joining_orbits(J))
    ny = len(ext.bottom.orbits())
    wm = nz == ny
    info = {"joining_orbits": nz, "bottom_orbits": ny}
    if not wm:
        X, Y = ext.top.space, ext.bottom.space
        u = np.array([float(Y.p[ext.factor[i]] / X.p[i]) if i == j else 0.0
                      for i, j in zip(J.left, J.right)])
        lifted = not any(len({round(u[k], 12) for k in fib}) > 1 for fib in J.fibers)
        info["witness"] = u
        info["witness_fixed_residual"] = koopman_residual(J.top, u)
        info["witness_is_lift"] = lifted
    return wm, info


@dataclass
class TowerReport:
    """Levels of the tower as partitions of ``X`` from ``Y`` upwards."""

    levels: list
    stabilized_at: int
    is_full: bool
    factors: list = field(repr=False)
    step_discrete_spectrum: list = field(default_factory=list)


def furstenberg_tower(ext: FiniteExtension, tol: float = DEFAULT_TOL,
                      max_levels: int = 16) -> TowerReport:
    """Iterate the relative Kronecker factor from ``Y`` until it stabilizes.

    Each level is a partition of ``X``; the next one is the Kronecker
    partition of ``X`` over the current level. Every step ``Q_k -> Q_{k+1}``
    is re-checked to have relative discrete spectrum.
    """
    levels = [fiber_partition(ext)]
    factors = [ext.bottom]
    steps = []
    current = ext
    while len(levels) < max_levels:
        rep = kronecker_subspace(current, tol)
        new = rep.partition
        if new == levels[-1]:
            break
        steps.append(kronecker_subspace(rep.factor, tol).is_full)
        levels.append(new)
        factors.append(rep.factor.top)
        current = rep.embedding
    full = levels[-1] == discrete_partition(ext)
    return TowerReport(levels, len(levels) - 1, full, factors, steps)


# Bernoulli shift oracle -----------------------------------------------------

def _check_cylinder(terms, alphabet):
    out = []
    for term in terms:
        if len(term) != 3:
            raise NotCylinder(f"cylinder term must be (offset, pattern, coefficient), got {term!r}")
        off, pat, coef = term
        if not isinstance(off, (int, np.integer)):
            raise NotCylinder(f"offset must be an integer, got {off!r}")
        pat = tuple(pat)
        for s in pat:
            if not isinstance(s, (int, np.integer)) or not 0 <= s < alphabet:
                raise NotCylinder(f"symbol {s!r} outside the alphabet")
        out.append((int(off), pat, coef))
    return out


def _cyl_integral(a, b, shift, probs):
    """``int 1_{a shifted by shift} 1_b`` under the product measure."""
    constraint: dict[int, int] = {}
    for (off, pat) in ((a[0] + shift, a[1]), (b[0], b[1])):
        for k, s in enumerate(pat):
            pos = off + k
            if constraint.setdefault(pos, s) != s:
                return Fraction(0)
    out = Fraction(1)
    for s in constraint.values():
        out *= probs[s]
    return out


def cylinder_mean(f, probs) -> Fraction:
    total = Fraction(0)
    for off, pat, coef in f:
        m = Fraction(1)
        for s in pat:
            m *= probs[s]
        total += coef * m
    return total


def _conj(c):
    return c.conjugate() if isinstance(c, complex) else c


def shift_correlations(symbols: Sequence, f, g, N_max: int) -> dict:
    """Exact correlations ``c(n) = int (T^n f) conj g`` on a Bernoulli shift.

    Parameters
    ----------
    symbols : sequence
        Symbol probabilities (fractions, ints or ``"a/b"`` strings); the
        alphabet is ``0..len(symbols)-1``.
    f, g : list of (offset, pattern, coefficient)
        Cylinder functions ``sum coef * 1[x_{off+k} = pattern[k] for all k]``;
        an empty pattern is the constant ``coef``. ``T^n`` adds ``n`` to offsets.
    N_max : int
        Length of the returned sequences.

    Returns
    -------
    dict
        ``correlations`` (``c(0..N_max-1)``), ``mean_product`` (``int f int conj g``)
        and ``cesaro`` with ``cesaro[N-1] = (1/N) sum_{n<N} |c(n) - int f int conj g|``.
    """
    probs = [as_fraction(p) for p in symbols]
    if sum(probs) != 1 or any(p < 0 for p in probs):
        raise NotCylinder("symbol distribution must be a probability vector")
    fa = _check_cylinder(f, len(probs))
    ga = _check_cylinder(g, len(probs))
    fa = [(o, p, as_fraction(c) if not isinstance(c, complex) else c) for o, p, c in fa]
    ga = [(o, p, as_fraction(c) if not isinstance(c, complex) else c) for o, p, c in ga]
    mean = cylinder_mean(fa, probs) * _conj(cylinder_mean(ga, probs))
    corr = []
    for n in range(N_max):
        c = Fraction(0)
        for a in fa:
            for b in ga:
                c += a[2] * _conj(b[2]) * _cyl_integral(a[:2], b[:2], n, probs)
        corr.append(c)
    ces, acc = [], Fraction(0)
    for n, c in enumerate(corr):
        acc += abs(c - mean)
        ces.append(acc / (n + 1))
    return {"correlations": corr, "mean_product": mean, "cesaro": ces}


def parse_cylinder(expr: str) -> list:
    """Parse ``"0@0"`` or ``"01@3"`` (pattern ``@`` offset) into one cylinder term.

    Several terms may be joined with ``+``; a term may carry a coefficient as
    ``"1/2*01@3"``.
    """
    terms = []
    for part in expr.split("+"):
        part = part.strip()
        if not part:
            continue
        coef = Fraction(1)
        if "*" in part:
            c, part = part.split("*", 1)
            coef = Fraction(c)
        if "@" not in part:
            raise NotCylinder(f"cylinder term {part!r} lacks '@offset'")
        pat, off = part.split("@", 1)
        try:
            terms.append((int(off), tuple(int(ch) for ch in pat), coef))
        except ValueError as exc:
            raise NotCylinder(f"cannot parse cylinder term {part!r}") from exc
    return terms
