"""One test per acceptance criterion, each at its stated tolerance.

Every test reports a single PASS/FAIL line through the ``criterion`` fixture;
the lines are repeated in the terminal summary.
"""
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from khsys.generators import random_extension, random_gsystem, random_intertwiner, skew_torus
from khsys.gsystem import (BaseAction, GSystem, ds_wm_decomposition, equivariant_spectral,
                           intertwiner_basis, spectral_equivariance, wm_by_tensor_criterion)
from khsys.homs import (ModuleHom, adjoint, compose, op_lattice_norm, projection_onto)
from khsys.khmod import (KhModuleShape, KhVector, extend_to_basis, gram_schmidt,
                         inner_product, lattice_norm, project_onto)
from khsys.measure import (conditional_expectation, coupling_from_markov, markov_from_extensions,
                           self_joining, tensor_joining_iso)
from khsys.spectral import spectral_decompose
from khsys.stone import BaseSet
from khsys.structure import (fiber_partition, folner_diagnostic, furstenberg_tower,
                             is_weakly_mixing, kronecker_subspace, permutation_order,
                             shift_correlations)

from oracles import dense_commutant_dim, loop_spectral, rand_shape

F = Fraction
SYSTEMS = Path(__file__).resolve().parent.parent / "systems"


def _same_base(shape, rng):
    return KhModuleShape(shape.base, rng.integers(0, 5, size=len(shape.dims)).tolist())


def test_module_algebra(criterion):
    rng = np.random.default_rng(2024)
    tol = 1e-10
    worst = {k: 0.0 for k in ("cauchy_schwarz", "triangle", "parseval", "bessel", "idempotence",
                              "adjoint", "abs_adjoint", "submultiplicative")}
    for _ in range(200):
        a = rand_shape(rng)
        b, c = _same_base(a, rng), _same_base(a, rng)
        x, y = KhVector.random(a, rng), KhVector.random(a, rng)
        nx, ny = lattice_norm(x).real, lattice_norm(y).real
        worst["cauchy_schwarz"] = max(worst["cauchy_schwarz"],
                                      float(np.max(np.abs(inner_product(x, y).values) - nx * ny, initial=0)))
        worst["triangle"] = max(worst["triangle"],
                                float(np.max(lattice_norm(x + y).real - nx - ny, initial=0)))
        B = extend_to_basis([], a)
        total = sum((np.abs(inner_product(x, e).values) ** 2 for e in B), np.zeros(len(a.dims)))
        worst["parseval"] = max(worst["parseval"], float(np.max(np.abs(total - nx ** 2), initial=0)))
        es = gram_schmidt([KhVector.random(a, rng) for _ in range(int(rng.integers(1, 3)))])
        if es:
            px = project_onto(x, es)
            worst["bessel"] = max(worst["bessel"],
                                  float(np.max(lattice_norm(px).real - nx, initial=0)))
            P = projection_onto(es, a)
            worst["idempotence"] = max(worst["idempotence"], (compose(P, P) - P).hs_sup())
        S, T = ModuleHom.random(b, c, rng), ModuleHom.random(a, b, rng)
        z = KhVector.random(b, rng)
        adj = max((adjoint(compose(S, T)) - compose(adjoint(T), adjoint(S))).hs_sup(),
                  (adjoint(adjoint(T)) - T).hs_sup(),
                  float(np.max(np.abs((inner_product(T(x), z)
                                       - inner_product(x, adjoint(T)(z))).values), initial=0)))
        worst["adjoint"] = max(worst["adjoint"], adj)
        worst["abs_adjoint"] = max(worst["abs_adjoint"], float(np.max(np.abs(
            op_lattice_norm(adjoint(T)).real - op_lattice_norm(T).real), initial=0)))
        worst["submultiplicative"] = max(worst["submultiplicative"], float(np.max(
            op_lattice_norm(compose(S, T)).real
            - op_lattice_norm(S).real * op_lattice_norm(T).real, initial=0)))
    ok = all(v <= tol for v in worst.values())
    criterion("module algebra (200 instances per law, 1e-10)", ok,
              ", ".join(f"{k}={v:.1e}" for k, v in worst.items()))


def _spectral_cases(n=100):
    rng = np.random.default_rng(7)
    seed = 0
    cases = []
    while len(cases) < n:
        sys_ = random_gsystem(seed, max_points=8, max_dim=4)
        seed += 1
        if sys_.shape.total_dim == 0:
            continue
        cases.append((sys_, random_intertwiner(sys_, rng)))
    return cases


def _spectral_property_violation(A, dec, tol):
    """Largest violation of properties (i)-(vi) for one decomposition."""
    scale = max(A.norm(), 1.0)
    bad = 0.0
    projs = [(j, s, P) for j, (Pp, Pm) in enumerate(zip(dec.pos_projections, dec.neg_projections))
             for s, P in ((1, Pp), (-1, Pm))]
    for j, s, P in projs:
        lam = dec.lambdas[j]
        bad = max(bad, (compose(P, P) - P).hs_sup(), (adjoint(P) - P).hs_sup())
        bad = max(bad, 0.0 if np.all(np.isfinite((P * lam).dense())) else np.inf)      # (i)
        target = P * lam * float(s)
        bad = max(bad, (compose(P, A) - target).hs_sup() / scale,
                  (compose(A, P) - target).hs_sup() / scale)                          # (iii)
        for k, s2, Q in projs:
            if (k, s2) != (j, s):
                bad = max(bad, compose(P, Q).hs_sup())                                  # (ii)
    for j, lam in enumerate(dec.lambdas):
        cur = lam.real
        nxt = dec.lambdas[j + 1].real if j + 1 < len(dec) else np.zeros_like(cur)
        bad = max(bad, float(np.max(nxt - cur, initial=0)) / scale)                   # (iv)
        on = cur > tol * scale
        if np.any(on & (nxt >= cur)):                                                    # (v)
            bad = np.inf
        ranks = np.array([np.trace(p).real + np.trace(m).real for p, m in
                          zip(dec.pos_projections[j].blocks, dec.neg_projections[j].blocks)])
        if not np.array_equal(on, ranks > 0.5):                                          # (vi)
            bad = np.inf
    return bad


def test_spectral_reconstruction(criterion):
    worst_rec = worst_prop = worst_oracle = 0.0
    for sys_, A in _spectral_cases():
        dec = equivariant_spectral(sys_, A)
        scale = max(A.norm(), 1e-300)
        worst_rec = max(worst_rec, (A - dec.reconstruct()).norm() / scale)
        worst_prop = max(worst_prop, _spectral_property_violation(A, dec, 1e-9))
        for w, blk in enumerate(A.blocks):
            ref = loop_spectral(blk)
            got = [(lam.real[w], P.blocks[w], M.blocks[w])
                   for lam, P, M in zip(dec.lambdas, dec.pos_projections, dec.neg_projections)
                   if lam.real[w] > 0]
            if len(ref) != len(got):
                worst_oracle = np.inf
                continue
            for (l1, p1, m1), (l2, p2, m2) in zip(ref, got):
                worst_oracle = max(worst_oracle, abs(l1 - l2),
                                   float(np.max(np.abs(p1 - p2), initial=0)),
                                   float(np.max(np.abs(m1 - m2), initial=0)))
    ok = worst_rec <= 1e-9 and worst_prop <= 1e-9 and worst_oracle <= 1e-9
    criterion("spectral reconstruction (100 self-adjoint intertwiners)", ok,
              f"reconstruction={worst_rec:.1e}*||A||, properties={worst_prop:.1e}, "
              f"loop oracle={worst_oracle:.1e}")


def test_equivariance(criterion):
    lam = comm = 0.0
    for sys_, A in _spectral_cases():
        eq = spectral_equivariance(sys_, equivariant_spectral(sys_, A))
        lam = max(lam, eq["lambda_invariance"])
        comm = max(comm, eq["projection_commutation"])
    criterion("equivariance of levels and projections", lam <= 1e-10 and comm <= 1e-9,
              f"lambda o sigma - lambda={lam:.1e}, [P, T]={comm:.1e}")


def test_decomposition(criterion):
    rng = np.random.default_rng(11)
    nonempty_wm = 0
    worst = 0.0
    full = True
    for seed in range(100):
        sys_ = random_gsystem(seed, max_points=8, max_dim=4)
        inter = intertwiner_basis(sys_)
        ds, wm = ds_wm_decomposition(sys_, intertwiners=inter)
        full &= wm == [] and wm_by_tensor_criterion(sys_, intertwiners=inter) == []
        if ds:
            full &= bool(np.allclose(projection_onto(ds, sys_.shape).dense(),
                                     np.eye(sys_.shape.total_dim), atol=1e-9))
        # non-vacuous comparison on a proper part of the commutant
        if inter:
            k = int(rng.integers(1, len(inter) + 1))
            sub = [B @ adjoint(B) for B in inter[:k]]
            _, wm_sub = ds_wm_decomposition(sys_, intertwiners=sub)
            wm_t = wm_by_tensor_criterion(sys_, intertwiners=sub)
            nonempty_wm += bool(wm_sub)
            d = np.linalg.norm(projection_onto(wm_sub, sys_.shape).dense()
                               - projection_onto(wm_t, sys_.shape).dense())
            worst = max(worst, float(d))
    ok = full and worst <= 1e-9
    criterion("decomposition E = E_ds + E_wm with E_wm = 0 (100 systems)", ok,
              f"E_wm empty everywhere={full}, characterization distance={worst:.1e} "
              f"({nonempty_wm} cases with nonzero complement)")


def test_commutant(criterion):
    mismatches = 0
    for seed in range(100):
        sys_ = random_gsystem(seed, max_points=6, max_dim=3, n_generators=1 + seed % 2)
        if len(intertwiner_basis(sys_)) != dense_commutant_dim(sys_):
            mismatches += 1
    one = BaseSet(["o"])
    shift = np.roll(np.eye(3), 1, axis=0)
    circ = GSystem(BaseAction(one, {"t": [0]}, "Z"), KhModuleShape(one, [3]), {"t": [shift]})
    dim = len(intertwiner_basis(circ))
    criterion("commutant dimension vs dense nullspace oracle", mismatches == 0 and dim == 3,
              f"mismatches={mismatches}/100, cyclic 3-shift dimension={dim}")


def test_coupling_identities(criterion):
    ok = True
    for seed in range(50):
        ext = random_extension(seed, exact=True)
        X = ext.top.space
        P = markov_from_extensions(ext, ext)
        C = coupling_from_markov(P)
        ok &= C.left_marginal() == list(X.masses) and C.right_marginal() == list(X.masses)
        ok &= C.recovered_operator().tolist() == P.matrix.tolist()
        J = self_joining(ext)
        n = len(X)
        basis = [np.array([F(int(k == i)) for k in range(n)], dtype=object) for i in range(n)]
        for f in basis:
            Ef = conditional_expectation(ext, f)
            for g in basis:
                lhs = conditional_expectation(J, J.tensor(f, g))
                ok &= lhs.tolist() == (Ef * conditional_expectation(ext, g)).tolist()
        if not ok:
            break
    criterion("coupling identities exact on 50 extensions", ok)


def test_w_isomorphism(criterion):
    iso = inter = span = 0.0
    for seed in range(50):
        ext = random_extension(seed, exact=False)
        W = tensor_joining_iso(ext, ext)
        iso = max(iso, W.isometry_residual())
        inter = max(inter, W.intertwining_residual())
        J, n = W.joining, len(ext.top.space)
        eye = np.eye(n)
        for i in range(n):
            for j in range(n):
                u = W.tensor_vector(eye[i], eye[j])
                Wu = W.mz.to_function(W(u))
                for t in ext.top.generators:
                    lhs = W.mz.to_function(W(W.tensor_vector(ext.top.koopman(t, eye[i]),
                                                             ext.top.koopman(t, eye[j]))))
                    span = max(span, float(np.max(np.abs(lhs - J.top.koopman(t, Wu)))))
    ok = max(iso, inter, span) <= 1e-10
    criterion("W isometry and intertwining", ok,
              f"isometry={iso:.1e}, intertwining={inter:.1e}, on indicator tensors={span:.1e}")


def test_kronecker_skew_torus(criterion):
    parts = []
    ok = True
    for n in (4, 6, 8):
        rep = kronecker_subspace(skew_torus(n))
        cm = rep.module
        z = np.array([z for _ in range(n) for z in range(n)])
        chars = [cm.to_vector(np.exp(2j * np.pi * k * z / n)) for k in range(n)]
        char_ok = True
        for e in chars:
            te = cm.system.apply_generator("T", e)
            char_ok &= np.allclose(lattice_norm(e).real, 1.0, atol=1e-12)
            char_ok &= project_onto(te, [e]).allclose(te, 1e-12)
        gram = np.array([[np.max(np.abs(inner_product(a, b).values)) for b in chars] for a in chars])
        char_ok &= np.allclose(gram, np.eye(n), atol=1e-12)
        span = np.linalg.norm(projection_onto(chars, cm.shape).dense()
                              - projection_onto(rep.ds_basis, cm.shape).dense())
        c = rep.checks
        this = (rep.is_full and rep.per_rank_counts == {1: n} and char_ok and span <= 1e-9
                and c["characterization_distance"] <= 1e-9 and c["sons_linfty_passed"]
                and c["sons_linfty_residual"] <= 1e-12)
        ok &= this
        parts.append(f"n={n}: full={rep.is_full} ranks={rep.per_rank_counts} "
                     f"chars={char_ok} char1v4={c['characterization_distance']:.1e} "
                     f"sons={c['sons_linfty_residual']:.1e}")
    criterion("Kronecker pipeline on the skew torus", ok, "; ".join(parts))


def test_dichotomy(criterion):
    ok = True
    counts = {"weakly mixing": 0, "nontrivial factor": 0}
    for seed in range(100):
        ext = random_extension(seed, exact=True)
        wm, _ = is_weakly_mixing(ext)
        nontrivial = kronecker_subspace(ext).partition != fiber_partition(ext)
        tw = furstenberg_tower(ext)
        ok &= (wm != nontrivial) and (wm == ext.is_isomorphism())
        ok &= tw.is_full and len(tw.levels) <= 2 and all(tw.step_discrete_spectrum)
        counts["weakly mixing" if wm else "nontrivial factor"] += 1
    criterion("weak mixing / discrete spectrum dichotomy (100 extensions)", ok,
              f"{counts['weakly mixing']} weakly mixing, {counts['nontrivial factor']} with "
              f"a nontrivial factor")


def test_folner(criterion):
    rng = np.random.default_rng(5)
    gap = 0.0
    exts = [random_extension(s, exact=False, n_generators=1, max_bottom=5, max_fiber=4)
            for s in range(50)] + [skew_torus(n, exact=False) for n in (3, 4, 6)]
    for ext in exts:
        n = len(ext.top.space)
        p = permutation_order(ext.top.generators["T"])
        for centered in (True, False):
            f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            if centered:
                f = f - ext.embed(conditional_expectation(ext, f))
            g = rng.standard_normal(n)
            d = folner_diagnostic(ext, f, g, p)
            gap = max(gap, abs(d["curve"][p - 1] - d["limit"]))
    cyl = [(0, (0,), F(1)), (0, (), F(-1, 2))]
    res = shift_correlations([F(1, 2), F(1, 2)], cyl, cyl, 256)
    exact = res["cesaro"] == [F(1, 4 * N) for N in range(1, 257)]
    criterion("Folner diagnostics", gap <= 1e-12 and exact,
              f"curve at k=p vs limit={gap:.1e}, shift Cesaro = 1/(4N) exactly for N<=256: {exact}")


def test_cli_reports(criterion, tmp_path):
    commands = ["validate", "kronecker", "tower", "spectral", "wm-test", "joining", "folner"]
    runs = [[c, str(SYSTEMS / f)] for f in ("skew6.json", "identity3.json", "four_two.json")
            for c in commands]
    runs.append(["shift", "--alphabet", "2", "--cylinder", "0@0", "--N", "64"])
    failures = []
    for argv in runs:
        outs = []
        for k in range(2):
            out = tmp_path / f"run{k}.json"
            proc = subprocess.run([sys.executable, "-m", "khsys", *argv, "--out", str(out)],
                                  capture_output=True, check=False)
            outs.append((proc.returncode, out.read_bytes() if out.exists() else b""))
        if outs[0][0] != 0 or outs[1][0] != 0 or outs[0][1] != outs[1][1] or not outs[0][1]:
            failures.append(" ".join(argv[:2]))
    criterion("CLI: three systems x all commands, byte-stable", not failures,
              f"{len(runs)} invocations run twice" + (f"; failed: {failures}" if failures else ""))
