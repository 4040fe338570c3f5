"""Mean ergodic projections and the spectral algorithm on KH-modules.

The spectral algorithm starts with ``B_1 = A``, ``lambda_1 = |B_1|`` and
splits off the projections onto ``fix(+-B_j/|B_j|)``. At a single point of
the base this peels off the eigenvalues of ``A_w`` in order of decreasing
modulus, so the production path eigendecomposes each fiber once and reads
the sequence ``lambda_j(w)`` off the distinct absolute eigenvalues.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotContraction, NotSelfAdjoint, ShapeMismatch
from .homs import ModuleHom, adjoint, hs_norm
from .stone import DEFAULT_TOL, Idempotent, StoneElement


def nullspace(M: np.ndarray, tol: float = DEFAULT_TOL, relative: bool = True) -> np.ndarray:
    """Orthonormal basis (as columns) of ``ker M`` via SVD.

    Singular values up to ``tol * max(s_max, 1)`` (or ``tol`` when
    ``relative`` is false) count as zero. The floor at 1 keeps a matrix made
    only of rounding noise from being declared full rank.
    """
    n = M.shape[1]
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    if M.shape[0] == 0:
        return np.eye(n, dtype=complex)
    _, s, vh = np.linalg.svd(M)
    smax = s[0] if s.size else 0.0
    thresh = tol * max(smax, 1.0) if relative else tol
    rank = int(np.sum(s > thresh))
    return vh[rank:].conj().T


def fixed_projection_dense(M: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthogonal projection onto ``ker(M - I)`` for a contraction ``M``."""
    n = M.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    K = nullspace(M - np.eye(n), tol, relative=False)
    return K @ K.conj().T


def cesaro_average_dense(M: np.ndarray, n_steps: int) -> np.ndarray:
    """``(1/n) sum_{j<n} M^j``."""
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    n = M.shape[0]
    acc = np.zeros((n, n), dtype=complex)
    power = np.eye(n, dtype=complex)
    for _ in range(n_steps):
        acc += power
        power = M @ power
    return acc / n_steps


def mean_ergodic_projection(T: ModuleHom, mode: str = "exact", n_steps: int = 1000,
                            tol: float = DEFAULT_TOL) -> ModuleHom:
    """Projection onto ``fix(T)`` for a fiberwise contraction ``T``.

    Parameters
    ----------
    T : ModuleHom
        Square homomorphism with ``|T| <= 1`` up to ``tol``.
    mode : {"exact", "cesaro"}
        ``exact`` solves ``(T_w - I) x = 0`` in every fiber; ``cesaro``
        returns the average of the first ``n_steps`` powers, which agrees with
        the exact projection once ``n_steps`` is a multiple of the order of a
        finite-order ``T``.
    n_steps : int
        Number of powers averaged in Cesaro mode.
    tol : float
        Contraction slack and nullspace threshold.

    Returns
    -------
    ModuleHom
    """
    if not T.is_square:
        raise ShapeMismatch("mean ergodic projection needs a square homomorphism")
    for k, b in enumerate(T.blocks):
        if b.size and np.linalg.norm(b, 2) > 1.0 + tol:
            raise NotContraction(f"|T| exceeds 1 at point {T.domain.base.points[k]!r}")
    if mode == "exact":
        blocks = [fixed_projection_dense(b, tol) for b in T.blocks]
    elif mode == "cesaro":
        blocks = [cesaro_average_dense(b, n_steps) for b in T.blocks]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ModuleHom(T.domain, T.domain, blocks)


@dataclass
class SpectralDecomposition:
    """``A = sum_j lambda_j (P_j^+ - P_j^-)`` with ``lambda_j`` decreasing."""

    lambdas: list
    pos_projections: list
    neg_projections: list
    residual_norm: float
    shape: object = field(default=None, repr=False)

    def __len__(self):
        return len(self.lambdas)

    def reconstruct(self) -> ModuleHom:
        out = ModuleHom.zeros(self.shape)
        for lam, pp, pm in zip(self.lambdas, self.pos_projections, self.neg_projections):
            out = out + (pp - pm) * lam
        return out

    def supports(self, tol: float = DEFAULT_TOL) -> list[Idempotent]:
        return [lam.support(tol) for lam in self.lambdas]


def _levels(block: np.ndarray, merge_tol: float, zero_tol: float):
    """Group eigenpairs of a Hermitian block by decreasing absolute value.

    Returns a list of ``(lambda, P_plus, P_minus)``.
    """
    d = block.shape[0]
    if d == 0:
        return []
    w, v = np.linalg.eigh(block)
    order = np.argsort(-np.abs(w), kind="stable")
    w, v = w[order], v[:, order]
    levels = []
    i = 0
    while i < d and abs(w[i]) > zero_tol:
        j = i + 1
        while j < d and abs(w[i]) - abs(w[j]) <= merge_tol:
            j += 1
        lam = float(np.mean(np.abs(w[i:j])))
        cols = v[:, i:j]
        pos = cols[:, w[i:j] > 0]
        neg = cols[:, w[i:j] < 0]
        levels.append((lam, pos @ pos.conj().T, neg @ neg.conj().T))
        i = j
    return levels


def spectral_decompose(A: ModuleHom, max_terms: int | None = None,
                       tol: float = DEFAULT_TOL) -> SpectralDecomposition:
    """Run the spectral algorithm on a self-adjoint homomorphism.

    Parameters
    ----------
    A : ModuleHom
        Square and self-adjoint up to ``tol``.
    max_terms : int, optional
        Keep at most this many levels; the residual then records what is left.
    tol : float
        Relative tolerance: absolute eigenvalues within ``tol * ||A||`` are
        merged into one level, and levels at most ``tol * ||A||`` are zero.

    Returns
    -------
    SpectralDecomposition
    """
    if not A.is_square:
        raise ShapeMismatch("spectral decomposition needs a square homomorphism")
    if (A - adjoint(A)).norm() > tol * max(1.0, A.norm()):
        raise NotSelfAdjoint("A differs from its adjoint")
    shape = A.domain
    base = shape.base
    scale = A.norm()
    per_fiber = [_levels((b + b.conj().T) / 2, tol * scale, tol * scale) for b in A.blocks]
    n = max((len(lv) for lv in per_fiber), default=0)
    if max_terms is not None:
        n = min(n, max_terms)
    lambdas, pos, neg = [], [], []
    for j in range(n):
        lam = np.zeros(len(base))
        pb, nb = [], []
        for k, (lv, d) in enumerate(zip(per_fiber, shape.dims)):
            if j < len(lv):
                lam[k], p, m = lv[j]
            else:
                p = m = np.zeros((d, d), dtype=complex)
            pb.append(p)
            nb.append(m)
        lambdas.append(StoneElement._real(base, lam))
        pos.append(ModuleHom(shape, shape, pb))
        neg.append(ModuleHom(shape, shape, nb))
    dec = SpectralDecomposition(lambdas, pos, neg, 0.0, shape)
    dec.residual_norm = hs_norm(A - dec.reconstruct()).norm()
    return dec
