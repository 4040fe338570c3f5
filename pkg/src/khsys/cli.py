"""Command line front end: load a system file, run one analysis, emit JSON.

Exit codes: 0 on success, 2 when the input fails to parse or validate, 3 when
a computed cross-check exceeds its tolerance.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import KhError, ParseError, ValidationError
from .gsystem import equivariant_spectral, spectral_equivariance
from .generators import random_intertwiner
from .measure import (FiniteExtension, FiniteProbSpace, MpSystem, as_fraction,
                      conditional_expectation, conditional_module, self_joining,
                      tensor_joining_iso)
from .structure import (cylinder_mean, folner_diagnostic, furstenberg_tower, is_weakly_mixing,
                        kronecker_subspace, parse_cylinder, shift_correlations)
from .stone import DEFAULT_TOL

FILE_MASS_TOL = 1e-9
EXIT_OK, EXIT_INVALID, EXIT_BREACH = 0, 2, 3


# system files ---------------------------------------------------------------

def _atoms(doc, key):
    try:
        atoms = doc[key]["atoms"]
        ids = [str(a["id"]) for a in atoms]
        raw = [a["mass"] for a in atoms]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"missing or malformed {key!r}: {exc}") from exc
    return ids, raw


def _masses(ids, raw, exact):
    for a, m in zip(ids, raw):
        if not isinstance(m, (int, float, str)) or isinstance(m, bool):
            raise ParseError(f"mass of {a!r} must be a number or an 'a/b' string")
    try:
        vals = [as_fraction(m) if exact else float(Fraction(m)) if isinstance(m, str) else float(m)
                for m in raw]
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"cannot read mass: {exc}") from exc
    for a, m in zip(ids, vals):
        if m <= 0:
            raise ValidationError("positive mass", f"atom {a!r} has mass {m}")
    total = sum(vals)
    if abs(float(total) - 1.0) > FILE_MASS_TOL:
        raise ValidationError("mass sum", f"masses sum to {float(total)!r}")
    if exact and total != 1:
        raise ValidationError("mass sum", f"exact masses sum to {total}")
    if not exact:
        vals = [m / total for m in vals]
    return vals


def _perm(mapping, ids, where):
    index = {a: i for i, a in enumerate(ids)}
    if not isinstance(mapping, dict):
        raise ParseError(f"{where} must be an object mapping ids to ids")
    if set(mapping) != set(ids):
        missing = sorted(set(ids) - set(mapping))
        raise ValidationError("bijection", f"{where} is not total (missing {missing[:3]})")
    try:
        perm = [index[str(mapping[a])] for a in ids]
    except KeyError as exc:
        raise ValidationError("bijection", f"{where} maps to unknown atom {exc}") from exc
    if len(set(perm)) != len(perm):
        raise ValidationError("bijection", f"{where} is not injective")
    return perm


def parse_system(doc: dict) -> FiniteExtension:
    """Build a validated extension from a parsed system document."""
    if not isinstance(doc, dict):
        raise ParseError("system file must hold a JSON object")
    xs, xraw = _atoms(doc, "space")
    ys, yraw = _atoms(doc, "bottom_space")
    exact = all(isinstance(m, (int, str)) and not isinstance(m, bool) for m in xraw + yraw)
    X = _space(xs, _masses(xs, xraw, exact), exact)
    Y = _space(ys, _masses(ys, yraw, exact), exact)
    try:
        fmap = doc["factor"]["map"]
        gens = doc["dynamics"]["generators"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"missing key {exc}") from exc
    if not isinstance(fmap, dict):
        raise ParseError("factor.map must be an object")
    yindex = {a: i for i, a in enumerate(ys)}
    factor = []
    for a in xs:
        if a not in fmap:
            raise ValidationError("factor map", f"atom {a!r} has no image")
        if str(fmap[a]) not in yindex:
            raise ValidationError("factor map", f"atom {a!r} maps to unknown {fmap[a]!r}")
        factor.append(yindex[str(fmap[a])])
    group = doc.get("group", "free")
    if group not in ("Z", "free"):
        raise ValidationError("group", f"unknown group {group!r}")
    top, bottom = {}, {}
    for g in gens:
        try:
            name = str(g["name"])
            top[name] = _perm(g["top_perm"], xs, f"top_perm of {name!r}")
            bottom[name] = _perm(g["bottom_perm"], ys, f"bottom_perm of {name!r}")
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed generator entry: {exc}") from exc
    return FiniteExtension(MpSystem(X, top, group), MpSystem(Y, bottom, group), factor)


def _space(ids, masses, exact):
    return FiniteProbSpace(ids, masses, exact=exact)


def load_system(path) -> FiniteExtension:
    """Read and validate a system file.

    Masses given as integers or ``"a/b"`` strings load in exact rational
    mode; any float mass switches the file to floating point.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    return parse_system(doc)


def _mass_out(m):
    if isinstance(m, Fraction):
        return str(m)
    return float(m)


def serialize_system(ext: FiniteExtension) -> dict:
    """Inverse of :func:`parse_system` for validated extensions."""
    X, Y = ext.top.space, ext.bottom.space
    gens = []
    for t in ext.top.generators:
        p, q = ext.top.generators[t], ext.bottom.generators[t]
        gens.append({"name": t,
                     "top_perm": {X.atoms[i]: X.atoms[int(p[i])] for i in range(len(X))},
                     "bottom_perm": {Y.atoms[i]: Y.atoms[int(q[i])] for i in range(len(Y))}})
    return {
        "space": {"atoms": [{"id": a, "mass": _mass_out(m)} for a, m in zip(X.atoms, X.masses)]},
        "bottom_space": {"atoms": [{"id": a, "mass": _mass_out(m)}
                                   for a, m in zip(Y.atoms, Y.masses)]},
        "factor": {"map": {X.atoms[i]: Y.atoms[int(ext.factor[i])] for i in range(len(X))}},
        "dynamics": {"generators": gens},
        "group": "Z" if ext.top.group_kind == "Z" else "free",
    }


# report emission ------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _plain(float(obj.real)), "im": _plain(float(obj.imag))}
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


class _Float17(float):
    def __repr__(self):
        if math.isnan(self) or math.isinf(self):
            return json.dumps(str(float(self)))
        return format(float(self), ".17g")


def _wrap_floats(obj):
    if isinstance(obj, dict):
        return {k: _wrap_floats(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_wrap_floats(v) for v in obj]
    if isinstance(obj, float):
        return _Float17(obj)
    return obj


def dumps_report(report: dict) -> str:
    """Deterministic JSON: sorted keys and 17 significant digits for floats."""
    return _encode(_wrap_floats(_plain(report)), 0) + "\n"


def _encode(obj, level):
    pad = "  " * (level + 1)
    end = "  " * level
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(obj[k], level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        items = [f"{pad}{_encode(v, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, _Float17):
        return repr(obj)
    return json.dumps(obj)


# commands -------------------------------------------------------------------

def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _system_summary(ext):
    return {"top_atoms": len(ext.top.space), "bottom_atoms": len(ext.bottom.space),
            "generators": sorted(ext.top.generators), "exact": ext.exact,
            "fiber_sizes": [len(f) for f in ext.fibers]}


def cmd_validate(ext, args):
    return {"system": _system_summary(ext), "is_isomorphism": ext.is_isomorphism()}, False


def cmd_kronecker(ext, args):
    rep = kronecker_subspace(ext, args.tol, seed=args.seed)
    residuals = {k: v for k, v in rep.checks.items()
                 if isinstance(v, float) and k != "sons_linfty_residual"}
    breach = any(v > args.tol for v in residuals.values()) or not rep.checks["sons_linfty_passed"]
    return {
        "is_full": rep.is_full,
        "rank_histogram": {str(k): v for k, v in rep.per_rank_counts.items()},
        "ds_rank": len(rep.ds_basis),
        "kronecker_factor_atoms": len(rep.factor.top.space),
        "checks": rep.checks,
    }, breach


def cmd_tower(ext, args):
    tw = furstenberg_tower(ext, args.tol)
    X = ext.top.space
    levels = []
    for part in tw.levels:
        blocks = {}
        for i, b in enumerate(part):
            blocks.setdefault(b, []).append(X.atoms[i])
        levels.append([blocks[b] for b in sorted(blocks)])
    return {"levels": levels, "stabilized_at": tw.stabilized_at, "is_full": tw.is_full,
            "steps_have_discrete_spectrum": tw.step_discrete_spectrum}, \
        not all(tw.step_discrete_spectrum)


def _ranks(P):
    return [int(round(float(np.trace(b).real))) for b in P.blocks]


def cmd_spectral(ext, args):
    cm = conditional_module(ext)
    rng = np.random.default_rng(args.seed)
    A = random_intertwiner(cm.system, rng, hermitian=True)
    dec = equivariant_spectral(cm.system, A, max_terms=args.max_terms, tol=args.tol)
    eq = spectral_equivariance(cm.system, dec)
    scale = max(A.norm(), 1.0)
    levels = [{"lambda": lam.real, "pos_rank": _ranks(p), "neg_rank": _ranks(m)}
              for lam, p, m in zip(dec.lambdas, dec.pos_projections, dec.neg_projections)]
    breach = (args.max_terms is None and dec.residual_norm > args.tol * scale) \
        or eq["lambda_invariance"] > args.tol or eq["projection_commutation"] > args.tol * scale
    return {"levels": levels, "residual_norm": dec.residual_norm, "operator_norm": A.norm(),
            "equivariance": eq}, breach


def cmd_wm_test(ext, args):
    wm, info = is_weakly_mixing(ext)
    out = {"weakly_mixing": wm, "joining_orbits": info["joining_orbits"],
           "bottom_orbits": info["bottom_orbits"]}
    breach = False
    if not wm:
        out["witness_fixed_residual"] = info["witness_fixed_residual"]
        out["witness_is_lift"] = info["witness_is_lift"]
        breach = info["witness_fixed_residual"] > args.tol or info["witness_is_lift"]
    return out, breach


def cmd_joining(ext, args):
    J = self_joining(ext)
    X = ext.top.space
    worst = 0.0
    exact_ok = True
    for i in range(len(X)):
        for j in range(len(X)):
            if ext.exact:
                f = np.array([Fraction(int(k == i)) for k in range(len(X))], dtype=object)
                g = np.array([Fraction(int(k == j)) for k in range(len(X))], dtype=object)
            else:
                f, g = np.eye(len(X))[i], np.eye(len(X))[j]
            lhs = conditional_expectation(J, J.tensor(f, g))
            rhs = conditional_expectation(ext, f) * conditional_expectation(ext, g)
            if ext.exact:
                exact_ok &= bool(np.all(lhs == rhs))
            else:
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    W = tensor_joining_iso(ext, ext)
    iso, inter = W.isometry_residual(), W.intertwining_residual()
    out = {"joining_atoms": len(J.top.space),
           "product_identity_exact": exact_ok if ext.exact else None,
           "product_identity_residual": worst,
           "W_isometry_residual": iso, "W_intertwining_residual": inter}
    return out, (not exact_ok) or worst > args.tol or iso > args.tol or inter > args.tol


def cmd_folner(ext, args):
    X = ext.top.space
    f = np.zeros(len(X))
    f[0] = 1.0
    f = f - ext.embed(conditional_expectation(ext, f))
    d = folner_diagnostic(ext, f, f, args.folner_N, args.tol)
    gap = abs(d["curve_at_order"] - d["limit"])
    out = {"order": d["order"], "curve": d["curve"], "limit": d["limit"],
           "limit_orbit_formula": d["limit_orbit"], "curve_at_order": d["curve_at_order"],
           "gap_at_order": gap}
    return out, gap > args.tol or abs(d["limit"] - d["limit_orbit"]) > args.tol


def cmd_shift(args):
    n = args.alphabet
    if n < 1:
        raise ValidationError("alphabet", "alphabet size must be positive")
    probs = [Fraction(1, n)] * n
    cyl = parse_cylinder(args.cylinder)
    mean = cylinder_mean(cyl, probs)
    f = cyl + [(0, (), -mean)]
    res = shift_correlations(probs, f, f, args.N)
    return {"alphabet": n, "cylinder": args.cylinder, "centered_by": mean,
            "correlations": res["correlations"], "cesaro": res["cesaro"],
            "cesaro_float": [float(c) for c in res["cesaro"]]}, False


COMMANDS = {
    "validate": cmd_validate,
    "kronecker": cmd_kronecker,
    "tower": cmd_tower,
    "spectral": cmd_spectral,
    "wm-test": cmd_wm_test,
    "joining": cmd_joining,
    "folner": cmd_folner,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="khsys", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(list(COMMANDS) + ["shift"]))
    p.add_argument("system", nargs="?", help="system file (all commands except shift)")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL,
                   help="numerical tolerance; residuals above it exit with code 3")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for randomized probes")
    p.add_argument("--max-terms", type=int, default=None,
                   help="cap on spectral terms reported")
    p.add_argument("--folner-N", type=int, default=32,
                   help="length of the Cesaro curve")
    p.add_argument("--alphabet", type=int, default=2,
                   help="shift: number of equiprobable symbols")
    p.add_argument("--cylinder", default="0@0",
                   help="shift: cylinder expression such as '1/2*01@3 + 1@0'")
    p.add_argument("--N", type=int, default=64,
                   help="shift: largest Cesaro length")
    return p


def run_command(args) -> tuple[dict, int]:
    """Run one command; returns the report and the exit code."""
    report = {"command": args.command, "tolerance": args.tol}
    try:
        if args.command == "shift":
            results, breach = cmd_shift(args)
        else:
            if not args.system:
                raise ParseError(f"{args.command} needs a system file")
            report["input_sha256"] = _digest(args.system)
            ext = load_system(args.system)
            results, breach = COMMANDS[args.command](ext, args)
    except (ParseError, ValidationError, OSError) as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc),
                           "invariant": getattr(exc, "invariant", None)}
        return report, EXIT_INVALID
    except KhError as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        return report, EXIT_INVALID
    report["results"] = results
    report["tolerance_breach"] = bool(breach)
    return report, EXIT_BREACH if breach else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    report, code = run_command(args)
    text = dumps_report(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
