from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from khsys.errors import EquivarianceViolation, NotCylinder, NotSingleGenerator
from khsys.generators import four_two_extension, identity_extension, random_extension, skew_torus
from khsys.homs import projection_onto
from khsys.khmod import inner_product, lattice_norm, project_onto
from khsys.measure import conditional_expectation, self_joining
from khsys.stone import StoneElement
from khsys.structure import (discrete_partition, fiber_partition, folner_diagnostic,
                             furstenberg_tower, intermediate_factor, is_weakly_mixing,
                             joining_fixed_projection, kronecker_subspace,
                             orthogonality_criteria, parse_cylinder, partition_by_functions,
                             permutation_order, quotient_system, shift_correlations)

F = Fraction


def character(n, k):
    z = np.array([z for _ in range(n) for z in range(n)])
    return np.exp(2j * np.pi * k * z / n)


class TestPartitions:
    def test_fiber_partition_quotient_is_bottom(self):
        ext = random_extension(5)
        Q = quotient_system(ext.top, fiber_partition(ext))
        assert list(Q.space.masses) == list(ext.bottom.space.masses)
        for t in ext.top.generators:
            assert np.array_equal(Q.generators[t], ext.bottom.generators[t])

    def test_non_invariant_partition_rejected(self):
        ext = four_two_extension()
        with pytest.raises(EquivarianceViolation):
            quotient_system(ext.top, (0, 1, 2, 2))

    def test_intermediate_factor_composes(self):
        ext = skew_torus(4)
        lower, upper = intermediate_factor(ext, discrete_partition(ext))
        assert len(lower.top.space) == 16
        assert upper.is_isomorphism()
        for i in range(16):
            assert lower.factor[upper.factor[i]] == ext.factor[i]

    def test_level_sets(self):
        ext = four_two_extension(exact=False)
        assert partition_by_functions(ext, [np.array([1.0, 1.0, 2.0, 3.0])]) == (0, 0, 1, 2)
        assert partition_by_functions(ext, []) == fiber_partition(ext)


class TestKronecker:
    def test_skew_torus_six(self):
        n = 6
        ext = skew_torus(n)
        rep = kronecker_subspace(ext)
        assert rep.is_full
        assert rep.per_rank_counts == {1: n}
        assert rep.checks["characterization_distance"] <= 1e-9
        assert rep.checks["sons_linfty_passed"]
        assert rep.partition == discrete_partition(ext)

    def test_characters_generate_invariant_rank_one_modules(self):
        n = 6
        ext = skew_torus(n)
        rep = kronecker_subspace(ext)
        cm = rep.module
        gens = []
        for k in range(n):
            e = cm.to_vector(character(n, k))
            assert lattice_norm(e).allclose(StoneElement.constant(cm.shape.base, 1.0), 1e-12)
            te = cm.system.apply_generator("T", e)
            assert project_onto(te, [e]).allclose(te, 1e-12)
            gens.append(e)
        for a in range(n):
            for b in range(a + 1, n):
                assert np.allclose(inner_product(gens[a], gens[b]).values, 0, atol=1e-12)
        P_chars = projection_onto(gens, cm.shape).dense()
        P_ds = projection_onto(rep.ds_basis, cm.shape).dense()
        assert np.linalg.norm(P_chars - P_ds) <= 1e-9

    def test_identity_extension(self):
        rep = kronecker_subspace(identity_extension(3))
        assert rep.is_full
        assert list(rep.module.shape.dims) == [1, 1, 1]
        assert rep.per_rank_counts == {1: 1}

    def test_random_extensions_full_and_consistent(self):
        for seed in range(25):
            rep = kronecker_subspace(random_extension(seed, exact=False))
            assert rep.is_full
            c = rep.checks
            assert c["wm_empty"] and c["ds_dimension_matches_fibers"]
            assert c["characterization_distance"] <= 1e-9
            assert c["sons_linfty_residual"] <= 1e-12
            assert c["u_B_fixed_residual"] <= 1e-9
            assert c["contains_one_residual"] <= 1e-9
            assert c["sublattice_residual"] <= 1e-9
            assert c["invariance_residual"] <= 1e-9


class TestOrthogonalityCriteria:
    def test_zero(self):
        out = orthogonality_criteria(skew_torus(4, exact=False), np.zeros(16))
        assert all(out[k]["orthogonal"] for k in "abcde") and out["agree"]

    def test_one(self):
        ext = skew_torus(4, exact=False)
        out = orthogonality_criteria(ext, np.ones(16))
        assert not any(out[k]["orthogonal"] for k in "abcde") and out["agree"]
        J = self_joining(ext)
        P = joining_fixed_projection(J)
        assert np.allclose(P @ np.ones(len(J.top.space)), 1.0)

    def test_random_functions_agree(self):
        rng = np.random.default_rng(0)
        for seed in range(15):
            ext = random_extension(seed, exact=False)
            n = len(ext.top.space)
            f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            out = orthogonality_criteria(ext, f, max_word_length=2)
            assert out["agree"]
            assert not out["a"]["orthogonal"]
            assert out["e"]["value"] > 1e-6
            assert out["exact_pairing"] > 0


class TestFolner:
    def test_finite_order_exactness(self):
        rng = np.random.default_rng(1)
        for seed in range(20):
            ext = random_extension(seed, exact=False, n_generators=1)
            n = len(ext.top.space)
            f = rng.standard_normal(n)
            f = f - ext.embed(conditional_expectation(ext, f))
            p = permutation_order(ext.top.generators["T"])
            d = folner_diagnostic(ext, f, f, p)
            assert d["order"] == p
            assert abs(d["curve"][p - 1] - d["limit"]) <= 1e-12
            assert abs(d["limit"] - d["limit_orbit"]) <= 1e-12

    def test_constant_function(self):
        ext = skew_torus(4, exact=False)
        rng = np.random.default_rng(2)
        g = rng.standard_normal(16)
        d = folner_diagnostic(ext, np.ones(16), g, 10)
        level = float(np.sum(ext.bottom.space.p * conditional_expectation(ext, g) ** 2))
        assert np.allclose(d["curve"], level, atol=1e-12)

    def test_limit_matches_criterion_pairing(self):
        rng = np.random.default_rng(3)
        for seed in range(15):
            ext = random_extension(seed, exact=False, n_generators=1)
            n = len(ext.top.space)
            f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            d = folner_diagnostic(ext, f, f, 4)
            pairing = orthogonality_criteria(ext, f, max_word_length=1)["exact_pairing"]
            assert abs(d["limit"] - pairing) <= 1e-10

    def test_needs_single_generator(self):
        ext = random_extension(0, n_generators=2)
        with pytest.raises(NotSingleGenerator):
            folner_diagnostic(ext, np.ones(len(ext.top.space)), np.ones(len(ext.top.space)), 3)

    def test_permutation_order(self):
        assert permutation_order(np.array([1, 2, 0, 4, 3])) == 6
        assert permutation_order(np.arange(4)) == 1


class TestWeakMixing:
    def test_identity(self):
        wm, _ = is_weakly_mixing(identity_extension(3))
        assert wm

    def test_four_two(self):
        wm, info = is_weakly_mixing(four_two_extension())
        assert not wm
        assert info["witness_fixed_residual"] <= 1e-12
        assert not info["witness_is_lift"]

    def test_skew_torus(self):
        wm, _ = is_weakly_mixing(skew_torus(6))
        assert not wm


class TestTower:
    def test_identity(self):
        tw = furstenberg_tower(identity_extension(3))
        assert len(tw.levels) == 1 and tw.stabilized_at == 0 and tw.is_full

    def test_skew_torus(self):
        ext = skew_torus(6)
        tw = furstenberg_tower(ext)
        assert tw.levels == [fiber_partition(ext), discrete_partition(ext)]
        assert tw.stabilized_at == 1 and tw.is_full and tw.step_discrete_spectrum == [True]

    def test_random(self):
        for seed in range(20):
            tw = furstenberg_tower(random_extension(seed))
            assert tw.is_full and len(tw.levels) <= 2


def brute_correlation(probs, f, g, n):
    """``int (T^n f) conj g`` by summing over every word on a finite window."""
    span = [off + len(pat) for off, pat, _ in f] + [off + len(pat) for off, pat, _ in g]
    L = max(span + [0]) + n
    total = Fraction(0)
    for word in product(range(len(probs)), repeat=L):
        w = Fraction(1)
        for s in word:
            w *= probs[s]

        def val(terms, shift):
            v = Fraction(0)
            for off, pat, c in terms:
                if all(word[off + shift + k] == s for k, s in enumerate(pat)):
                    v += c
            return v
        total += w * val(f, n) * val(g, 0)
    return total


class TestShift:
    FAIR = [F(1, 2), F(1, 2)]
    CENTERED = [(0, (0,), F(1)), (0, (), F(-1, 2))]

    def test_centered_indicator(self):
        res = shift_correlations(self.FAIR, self.CENTERED, self.CENTERED, 32)
        assert res["correlations"][0] == F(1, 4)
        assert all(c == 0 for c in res["correlations"][1:])
        assert res["cesaro"] == [F(1, 4 * N) for N in range(1, 33)]

    def test_constant(self):
        res = shift_correlations(self.FAIR, [(0, (), 1)], [(0, (), 1)], 8)
        assert res["correlations"] == [1] * 8

    def test_length_two_cylinder(self):
        cyl = [(0, (0, 1), F(1)), (0, (), F(-1, 4))]
        res = shift_correlations(self.FAIR, cyl, cyl, 10)
        assert res["correlations"][1] != 0
        assert all(c == 0 for c in res["correlations"][2:])

    def test_against_brute_force(self):
        probs = [F(1, 3), F(2, 3)]
        f = [(0, (1, 0), F(2)), (1, (1,), F(-1))]
        g = [(0, (0,), F(1, 2)), (2, (1, 1), F(3))]
        res = shift_correlations(probs, f, g, 5)
        for n in range(5):
            assert res["correlations"][n] == brute_correlation(probs, f, g, n)

    def test_cesaro_bound(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            pat = tuple(int(s) for s in rng.integers(0, 2, size=int(rng.integers(1, 4))))
            cyl = [(0, pat, F(1)), (0, (), -F(1, 2 ** len(pat)))]
            res = shift_correlations(self.FAIR, cyl, cyl, 40)
            C = sum(abs(c) for c in res["correlations"][:len(pat)])
            assert all(v <= C / (N + 1) for N, v in enumerate(res["cesaro"]))

    def test_parse_cylinder(self):
        assert parse_cylinder("0@0") == [(0, (0,), F(1))]
        assert parse_cylinder("1/2*01@3 + 1@0") == [(3, (0, 1), F(1, 2)), (0, (1,), F(1))]
        with pytest.raises(NotCylinder):
            parse_cylinder("01")

    def test_bad_symbol(self):
        with pytest.raises(NotCylinder):
            shift_correlations(self.FAIR, [(0, (2,), 1)], [(0, (0,), 1)], 2)
