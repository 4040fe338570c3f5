import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from khsys.errors import DomainError
from khsys.stone import (BaseSet, Idempotent, StoneElement, absolute, invert_on_support, sqrt,
                         sup, support_of)

AB = BaseSet(["a", "b"])


def el(vals, base=AB):
    return StoneElement(base, vals)


class TestBaseSet:
    def test_order_and_index(self):
        assert AB.index("b") == 1
        assert list(AB) == ["a", "b"]

    def test_duplicate_points_rejected(self):
        with pytest.raises(ValueError):
            BaseSet(["a", "a"])


class TestPointwiseOps:
    def test_abs(self):
        assert absolute(el([3 + 4j, 0])).allclose(el([5, 0]))

    def test_sup(self):
        assert sup(el([1, 2]), el([2, 1])).allclose(el([2, 2]))

    def test_sqrt(self):
        assert sqrt(el([4, 0])).allclose(el([2, 0]))

    def test_sqrt_of_negative_raises(self):
        with pytest.raises(DomainError):
            sqrt(el([-1, 0]))

    def test_mismatched_bases_raise(self):
        with pytest.raises(ValueError):
            el([1, 2]) + StoneElement(BaseSet(["c", "d"]), [1, 2])

    def test_compose_is_pullback(self):
        f = el([1, 2])
        assert f.compose([1, 0]).allclose(el([2, 1]))


class TestSupport:
    @pytest.mark.parametrize("vals,mask", [
        ([2, 0], [True, False]),
        ([0, 0], [False, False]),
        ([1e-12, 1], [False, True]),
    ])
    def test_support_of(self, vals, mask):
        assert support_of(el(vals), 1e-9) == Idempotent(AB, mask)

    @pytest.mark.parametrize("vals,expected", [
        ([2, 0], [0.5, 0]),
        ([1, 1], [1, 1]),
        ([4, 1e-12], [0.25, 0]),
    ])
    def test_invert_on_support(self, vals, expected):
        assert invert_on_support(el(vals), 1e-9).allclose(el(expected))


masks = st.lists(st.booleans(), min_size=1, max_size=12)


@settings(max_examples=200, deadline=None)
@given(masks, st.data())
def test_boolean_laws(m, data):
    base = BaseSet([str(k) for k in range(len(m))])
    m2 = data.draw(st.lists(st.booleans(), min_size=len(m), max_size=len(m)))
    p, q = Idempotent(base, m), Idempotent(base, m2)
    pe, qe = p.as_element(), q.as_element()
    assert (p & q).as_element().allclose(pe * qe, 0)
    assert (p | q).as_element().allclose(pe + qe - pe * qe, 0)
    assert ~~p == p


def test_support_of_product_is_meet():
    rng = np.random.default_rng(0)
    base = BaseSet([str(k) for k in range(10)])
    for _ in range(100):
        f = rng.uniform(0.5, 2, 10) * (rng.random(10) < 0.6)
        g = rng.uniform(0.5, 2, 10) * (rng.random(10) < 0.6)
        F, G = StoneElement(base, f), StoneElement(base, g)
        assert support_of(F * G) == support_of(F) & support_of(G)


def test_inverse_times_element_is_support():
    rng = np.random.default_rng(1)
    base = BaseSet([str(k) for k in range(8)])
    tol = 1e-9
    for _ in range(100):
        v = (rng.standard_normal(8) + 1j * rng.standard_normal(8)) * (rng.random(8) < 0.7)
        f = StoneElement(base, v)
        assert (invert_on_support(f, tol) * f).allclose(support_of(f, tol).as_element(), 10 * tol)


def test_values_are_immutable():
    f = el([1, 2])
    with pytest.raises(ValueError):
        f.values[0] = 3
